#include "caplab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "caplab/errors.hpp"

namespace caplab {

namespace {

double deriv_wavenumber(const Grid& g, int storage) {
  int k = g.signed_mode(storage);
  if (k == -g.points_per_axis / 2) return 0.0;
  return g.wavenumber(k);
}

// Everything the identity and the five estimates need at one time node.
struct NodeData {
  double u_sq = 0.0;                 // ||u||^2
  std::vector<double> grad_sq_axis;  // ||dj u||^2 per axis
  double grad_sq = 0.0;              // sum_j
  double grad_sq_rate = 0.0;         // d/dt sum_j ||dj u||^2 (from dt u)
  std::vector<double> second_sq;     // per i: sum_j ||dj di u||^2
  std::vector<double> second_sq_rate;
  double grad_dtu_sq = 0.0;          // sum_j ||dj dt u||^2
  double flux_work = 0.0;            // 2 int phi(x, u) dx
  double flux_work_rate = 0.0;       // 2 int divf(x,u) dt u dx
  double divf_sq = 0.0;              // int divf(x, u)^2 dx
};

NodeData assemble_node(const Trajectory& traj, std::size_t k) {
  const Grid& g = traj.grid;
  const int d = g.dim;
  const int N = g.points_per_axis;
  NodeData nd;
  nd.grad_sq_axis.assign(d, 0.0);
  nd.second_sq.assign(d, 0.0);
  nd.second_sq_rate.assign(d, 0.0);

  SpectralField uh = forward_transform(traj.states[k]);
  SpectralField dth = forward_transform(traj.time_derivatives[k]);
  const double inv_box = 1.0 / g.box_volume();

  auto accumulate = [&](std::size_t idx, double xi0, double xi1) {
    double usq = std::norm(uh.coeff[idx]);
    double cross = 2.0 * (uh.coeff[idx].real() * dth.coeff[idx].real() +
                          uh.coeff[idx].imag() * dth.coeff[idx].imag());
    double dsq = std::norm(dth.coeff[idx]);
    double xis[2] = {xi0, xi1};
    double xi_sum = xi0 * xi0 + xi1 * xi1;
    nd.u_sq += usq;
    for (int j = 0; j < d; ++j) nd.grad_sq_axis[j] += xis[j] * xis[j] * usq;
    nd.grad_sq_rate += xi_sum * cross;
    for (int i = 0; i < d; ++i) {
      nd.second_sq[i] += xis[i] * xis[i] * xi_sum * usq;
      nd.second_sq_rate[i] += xis[i] * xis[i] * xi_sum * cross;
    }
    nd.grad_dtu_sq += xi_sum * dsq;
  };

  if (d == 1) {
    for (int m = 0; m < N; ++m) accumulate(m, deriv_wavenumber(g, m), 0.0);
  } else {
    for (int m0 = 0; m0 < N; ++m0)
      for (int m1 = 0; m1 < N; ++m1)
        accumulate(g.index(m0, m1), deriv_wavenumber(g, m0), deriv_wavenumber(g, m1));
  }
  nd.u_sq *= inv_box;
  for (int j = 0; j < d; ++j) nd.grad_sq_axis[j] *= inv_box;
  nd.grad_sq = 0.0;
  for (int j = 0; j < d; ++j) nd.grad_sq += nd.grad_sq_axis[j];
  nd.grad_sq_rate *= inv_box;
  for (int i = 0; i < d; ++i) {
    nd.second_sq[i] *= inv_box;
    nd.second_sq_rate[i] *= inv_box;
  }
  nd.grad_dtu_sq *= inv_box;

  // flux functionals in physical space
  const MollifiedFlux& fl = *traj.flux;
  const RealField& u = traj.states[k];
  const RealField& dtu = traj.time_derivatives[k];
  double fw = 0.0, fwr = 0.0, dsq = 0.0;
  if (d == 1) {
    double x[1];
    for (int j = 0; j < N; ++j) {
      x[0] = g.coord(j);
      std::span<const double> xs(x, 1);
      double phi = fl.divx_antiderivative(xs, u.values[j]);
      double dv = fl.divx(xs, u.values[j]);
      fw += phi;
      fwr += dv * dtu.values[j];
      dsq += dv * dv;
    }
  } else {
    double x[2];
    for (int j0 = 0; j0 < N; ++j0) {
      x[0] = g.coord(j0);
      for (int j1 = 0; j1 < N; ++j1) {
        x[1] = g.coord(j1);
        std::span<const double> xs(x, 2);
        std::size_t idx = g.index(j0, j1);
        double phi = fl.divx_antiderivative(xs, u.values[idx]);
        double dv = fl.divx(xs, u.values[idx]);
        fw += phi;
        fwr += dv * dtu.values[idx];
        dsq += dv * dv;
      }
    }
  }
  nd.flux_work = 2.0 * fw * g.cell_volume();
  nd.flux_work_rate = 2.0 * fwr * g.cell_volume();
  nd.divf_sq = dsq * g.cell_volume();
  return nd;
}

struct Accumulated {
  std::vector<NodeData> nodes;
  // cumulative integrals aligned with the trajectory nodes
  std::vector<double> cum_grad_sq;      // int_0^t sum ||dj u||^2
  std::vector<double> cum_second_sq;    // [node * d + i]
  std::vector<double> cum_grad_dtu_sq;  // int_0^t sum ||dj dt u||^2
  std::vector<double> cum_flux_work;    // 2 int_0^t int phi
  std::vector<double> cum_divf_sq;      // int_0^t int divf(x,u)^2
};

Accumulated accumulate_trajectory(const Trajectory& traj) {
  require(traj.time_derivatives.size() == traj.states.size(),
          ErrorCode::MissingTimeDerivative,
          "energy audit: trajectory lacks time derivatives");
  const std::size_t nt = traj.size();
  const int d = traj.grid.dim;
  Accumulated acc;
  acc.nodes.reserve(nt);
  for (std::size_t k = 0; k < nt; ++k) acc.nodes.push_back(assemble_node(traj, k));
  acc.cum_grad_sq.assign(nt, 0.0);
  acc.cum_second_sq.assign(nt * d, 0.0);
  acc.cum_grad_dtu_sq.assign(nt, 0.0);
  acc.cum_flux_work.assign(nt, 0.0);
  acc.cum_divf_sq.assign(nt, 0.0);
  for (std::size_t k = 1; k < nt; ++k) {
    double h = traj.times[k] - traj.times[k - 1];
    const NodeData& a = acc.nodes[k - 1];
    const NodeData& b = acc.nodes[k];
    // Hermite-corrected trapezoid where the integrand rate is available
    acc.cum_grad_sq[k] = acc.cum_grad_sq[k - 1] +
                         0.5 * h * (a.grad_sq + b.grad_sq) +
                         h * h / 12.0 * (a.grad_sq_rate - b.grad_sq_rate);
    for (int i = 0; i < d; ++i)
      acc.cum_second_sq[k * d + i] =
          acc.cum_second_sq[(k - 1) * d + i] +
          0.5 * h * (a.second_sq[i] + b.second_sq[i]) +
          h * h / 12.0 * (a.second_sq_rate[i] - b.second_sq_rate[i]);
    acc.cum_flux_work[k] = acc.cum_flux_work[k - 1] +
                           0.5 * h * (a.flux_work + b.flux_work) +
                           h * h / 12.0 * (a.flux_work_rate - b.flux_work_rate);
    acc.cum_grad_dtu_sq[k] = acc.cum_grad_dtu_sq[k - 1] +
                             0.5 * h * (a.grad_dtu_sq + b.grad_dtu_sq);
    acc.cum_divf_sq[k] = acc.cum_divf_sq[k - 1] + 0.5 * h * (a.divf_sq + b.divf_sq);
  }
  return acc;
}

}  // namespace

std::vector<double> energy_identity_residual(const Trajectory& traj) {
  Accumulated acc = accumulate_trajectory(traj);
  const double eps = traj.config.eps;
  const double delta = traj.config.delta;
  const NodeData& init = acc.nodes.front();
  std::vector<double> out;
  out.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const NodeData& nd = acc.nodes[k];
    double lhs = nd.u_sq + 2.0 * eps * acc.cum_grad_sq[k] + delta * nd.grad_sq;
    double rhs = init.u_sq + delta * init.grad_sq - acc.cum_flux_work[k];
    out.push_back(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return out;
}

EnergyReport verify_estimates(const Trajectory& traj) {
  Accumulated acc = accumulate_trajectory(traj);
  const double eps = traj.config.eps;
  const double delta = traj.config.delta;
  const int d = traj.grid.dim;
  const MollifiedFlux& fl = *traj.flux;

  EnergyReport report;
  report.divf_l1 = fl.divf_l1();
  report.divf_l2_linf = fl.divf_l2_linf();
  report.dlambda_inf = fl.dlambda_inf();

  const NodeData& init = acc.nodes.front();
  const double u0 = std::sqrt(init.u_sq);
  const double grad0 = std::sqrt(init.grad_sq);
  const double sqrt_delta = std::sqrt(delta);
  const double df1 = report.divf_l1;
  const double df2 = report.divf_l2_linf;
  const double dli = report.dlambda_inf;

  bool intermediate_salvage_possible = true;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const NodeData& nd = acc.nodes[k];
    const double t = traj.times[k];
    EnergyRow row;
    row.t = t;
    row.u_l2 = std::sqrt(nd.u_sq);
    row.grad_l2 = std::sqrt(nd.grad_sq);
    row.cum_dissipation = 2.0 * eps * acc.cum_grad_sq[k];
    row.delta_grad_sq = delta * nd.grad_sq;
    row.cum_flux_work = acc.cum_flux_work[k];
    row.identity_lhs = nd.u_sq + row.cum_dissipation + row.delta_grad_sq;
    row.identity_rhs = init.u_sq + delta * init.grad_sq - acc.cum_flux_work[k];
    row.identity_residual = std::abs(row.identity_lhs - row.identity_rhs) /
                            std::max(1.0, std::abs(row.identity_rhs));
    report.max_identity_residual =
        std::max(report.max_identity_residual, row.identity_residual);

    const double common_rhs = u0 + sqrt_delta * grad0 + std::sqrt(2.0 * t) * std::sqrt(df1);
    row.lhs[kEstimateL2] = row.u_l2;
    row.rhs[kEstimateL2] = common_rhs;
    row.lhs[kEstimateDissipation] = std::sqrt(2.0 * eps * acc.cum_grad_sq[k]);
    row.rhs[kEstimateDissipation] = common_rhs;
    row.lhs[kEstimateGradient] = sqrt_delta * row.grad_l2;
    row.rhs[kEstimateGradient] = common_rhs;

    // fourth estimate, per axis; keep the worst slack
    double worst_lhs4 = 0.0, worst_rhs4 = 0.0, worst_slack4 = 1e300;
    for (int i = 0; i < d; ++i) {
      double lhs4 = eps * delta * acc.cum_second_sq[k * d + i];
      double rhs4 = 2.0 * delta * init.grad_sq_axis[i] +
                    2.0 * delta * delta * init.second_sq[i] +
                    (d * delta / (eps * eps)) * dli * dli *
                        (init.u_sq + delta * init.grad_sq + 2.0 * t * df1) +
                    (4.0 * t * delta / eps) * df2 * df2;
      if (rhs4 - lhs4 < worst_slack4) {
        worst_slack4 = rhs4 - lhs4;
        worst_lhs4 = lhs4;
        worst_rhs4 = rhs4;
      }
      // measured pre-bound form, used only for the salvage note
      double inter_rhs = delta * init.grad_sq_axis[i] + delta * delta * init.second_sq[i] +
                         (d * delta / eps) * dli * dli * acc.cum_grad_sq[k] +
                         (2.0 * delta / eps) * acc.cum_divf_sq[k];
      double inter_lhs = 0.5 * eps * delta * acc.cum_second_sq[k * d + i];
      if (inter_lhs > inter_rhs + std::max(1e-6 * std::abs(inter_rhs), 1e-12))
        intermediate_salvage_possible = false;
    }
    row.lhs[kEstimateSecond] = worst_lhs4;
    row.rhs[kEstimateSecond] = worst_rhs4;

    row.lhs[kEstimateTimeGradient] = delta * std::sqrt(acc.cum_grad_dtu_sq[k]);
    row.rhs[kEstimateTimeGradient] =
        (sqrt_delta * std::sqrt(static_cast<double>(d)) / (2.0 * std::sqrt(eps))) * dli * u0 +
        sqrt_delta *
            (sqrt_delta * std::sqrt(static_cast<double>(d)) / (2.0 * std::sqrt(eps)) * dli +
             std::sqrt(eps) / std::sqrt(2.0)) *
            grad0 +
        (sqrt_delta * std::sqrt(d * t) / std::sqrt(2.0 * eps)) * dli * std::sqrt(df1) +
        sqrt_delta * std::sqrt(t) * df2;

    for (int e = 0; e < 5; ++e) {
      row.slack[e] = row.rhs[e] - row.lhs[e];
      double tol = std::max(1e-6 * std::abs(row.rhs[e]), 1e-12);
      row.pass[e] = row.slack[e] >= -tol;
      double rel = row.slack[e] / std::max(std::abs(row.rhs[e]), 1e-12);
      report.min_relative_slack = std::min(report.min_relative_slack, rel);
      if (!row.pass[e]) report.all_pass = false;
    }
    report.rows.push_back(row);
  }
  if (!report.all_pass) {
    bool only_fourth_failed = true;
    for (const EnergyRow& row : report.rows)
      for (int e = 0; e < 5; ++e)
        if (!row.pass[e] && e != kEstimateSecond) only_fourth_failed = false;
    if (only_fourth_failed && intermediate_salvage_possible) {
      report.cetvrta_intermediate_only = true;
      report.note =
          "fourth estimate failed in the stated form but the measured "
          "pre-bound form holds";
    }
  }
  return report;
}

bool verify_initial_condition(const RealField& u0_eps, double n, double C0,
                              double* lhs_out) {
  SpectralField uh = forward_transform(u0_eps);
  double lhs = l2_norm(uh) + n * l2_norm_gradient(uh) + n * n * l2_norm_second(uh);
  if (lhs_out) *lhs_out = lhs;
  return lhs <= C0;
}

void write_energy_report(std::ostream& os, const EnergyReport& report) {
  os << "# t";
  static const char* names[5] = {"l2", "dissip", "grad", "second", "tgrad"};
  for (int e = 0; e < 5; ++e)
    os << " lhs_" << names[e] << " rhs_" << names[e] << " slack_" << names[e]
       << " pass_" << names[e];
  os << " identity_residual\n";
  char buf[64];
  for (const EnergyRow& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.t);
    os << buf;
    for (int e = 0; e < 5; ++e) {
      std::snprintf(buf, sizeof buf, " %.17g", row.lhs[e]);
      os << buf;
      std::snprintf(buf, sizeof buf, " %.17g", row.rhs[e]);
      os << buf;
      std::snprintf(buf, sizeof buf, " %.17g", row.slack[e]);
      os << buf;
      os << (row.pass[e] ? " 1" : " 0");
    }
    std::snprintf(buf, sizeof buf, " %.17g", row.identity_residual);
    os << buf << "\n";
  }
  os << "verdict pass=" << (report.all_pass ? 1 : 0)
     << " min_relative_slack=" << report.min_relative_slack
     << " max_identity_residual=" << report.max_identity_residual
     << " divf_l1=" << report.divf_l1 << " divf_l2_linf=" << report.divf_l2_linf
     << " dlambda_inf=" << report.dlambda_inf
     << " fourth_intermediate_only=" << (report.cetvrta_intermediate_only ? 1 : 0)
     << "\n";
}

}  // namespace caplab
