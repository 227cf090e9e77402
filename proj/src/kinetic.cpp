#include "caplab/kinetic.hpp"

#include <algorithm>
#include <cmath>

#include "caplab/errors.hpp"

namespace caplab {

LambdaGrid::LambdaGrid(double lo_, double hi_, int count_)
    : lo(lo_), hi(hi_), count(count_) {
  require(hi > lo, ErrorCode::ConfigError, "LambdaGrid: empty interval");
  require(count >= 64, ErrorCode::ConfigError, "LambdaGrid: need at least 64 points");
}

LambdaGrid LambdaGrid::cover(const Trajectory& traj, int count, double margin) {
  double umin = 1e300, umax = -1e300;
  for (const RealField& s : traj.states) {
    umin = std::min(umin, s.min_value());
    umax = std::max(umax, s.max_value());
  }
  double w = std::max(umax - umin, 1e-6);
  return LambdaGrid(umin - margin * w, umax + margin * w, count);
}

namespace {

void check_margin(const Trajectory& traj, const LambdaGrid& grid) {
  double umin = 1e300, umax = -1e300;
  for (const RealField& s : traj.states) {
    umin = std::min(umin, s.min_value());
    umax = std::max(umax, s.max_value());
  }
  double w = umax - umin;
  require(grid.lo <= umin - 0.1 * w + 1e-15 && grid.hi >= umax + 0.1 * w - 1e-15,
          ErrorCode::RangeEscape,
          "kinetic: lambda grid does not cover the value range with 10% margin");
}

std::vector<std::size_t> select_times(std::size_t n, int stride) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n; k += static_cast<std::size_t>(stride)) idx.push_back(k);
  if (idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

}  // namespace

KineticCube kinetic_function(const Trajectory& traj, const LambdaGrid& lambda,
                             int time_stride) {
  require(time_stride >= 1, ErrorCode::ConfigError, "kinetic: bad time stride");
  check_margin(traj, lambda);
  KineticCube cube(traj.grid, lambda);
  cube.traj_index = select_times(traj.size(), time_stride);
  const std::size_t nx = traj.grid.node_count();
  const int nl = lambda.count;
  cube.h.resize(cube.traj_index.size() * nx * nl);
  const double dl = lambda.spacing();
  double worst = 0.0;
  const double edge_sq = 0.5 * (lambda.lo * lambda.lo + lambda.hi * lambda.hi);
  for (std::size_t ti = 0; ti < cube.traj_index.size(); ++ti) {
    const RealField& u = traj.states[cube.traj_index[ti]];
    cube.times.push_back(traj.times[cube.traj_index[ti]]);
    for (std::size_t xi = 0; xi < nx; ++xi) {
      const double uv = u.values[xi];
      std::int8_t* row = cube.h.data() + (ti * nx + xi) * nl;
      // h = +1 iff u >= lambda (ties to +1), nonincreasing in lambda
      double quad = 0.0;  // trapezoid of eta'(lambda) h = 2 lambda h
      for (int li = 0; li < nl; ++li) {
        double lam = lambda.value(li);
        std::int8_t hv = uv >= lam ? 1 : -1;
        row[li] = hv;
        double w = (li == 0 || li == nl - 1) ? 0.5 : 1.0;
        quad += w * 2.0 * lam * hv;
      }
      quad *= 0.5 * dl;
      double exact = uv * uv - edge_sq;
      worst = std::max(worst, std::abs(quad - exact));
    }
  }
  cube.reconstruction_worst = worst;
  double bound = 2.5 * dl * std::max({std::abs(lambda.lo), std::abs(lambda.hi), 1.0}) +
                 dl * dl;
  require(worst <= bound, ErrorCode::InvariantViolation,
          "kinetic: reconstruction identity violated beyond quadrature error");
  return cube;
}

RealField truncation(const RealField& u, double l) {
  require(l > 0.0, ErrorCode::ConfigError, "truncation: level must be positive");
  RealField out = u;
  for (double& v : out.values) v = std::clamp(v, -l, l);
  return out;
}

RealField truncation_from_cube(const KineticCube& cube, std::size_t ti, double l) {
  require(ti < cube.times.size(), ErrorCode::ConfigError, "truncation_from_cube: bad time");
  require(-l >= cube.lambda.lo - 1e-12 && l <= cube.lambda.hi + 1e-12,
          ErrorCode::SupportEscape, "truncation_from_cube: level outside the grid");
  const std::size_t nx = cube.xgrid.node_count();
  const int nl = cube.lambda.count;
  const double dl = cube.lambda.spacing();
  RealField out(cube.xgrid);
  for (std::size_t xi = 0; xi < nx; ++xi) {
    const std::int8_t* row = cube.h.data() + (ti * nx + xi) * nl;
    // integrate the piecewise-linear interpolant of h over [-l, l]
    double acc = 0.0;
    for (int li = 0; li + 1 < nl; ++li) {
      double a = cube.lambda.value(li), b = cube.lambda.value(li + 1);
      double lo = std::max(a, -l), hi = std::min(b, l);
      if (hi <= lo) continue;
      double ha = row[li], hb = row[li + 1];
      auto interp = [&](double lam) { return ha + (hb - ha) * (lam - a) / dl; };
      acc += 0.5 * (interp(lo) + interp(hi)) * (hi - lo);
    }
    out.values[xi] = 0.5 * acc;
  }
  return out;
}

std::vector<RealField> velocity_average(const KineticCube& cube,
                                        const std::function<double(double)>& rho,
                                        Interval support) {
  require(support.lo >= cube.lambda.lo - 1e-12 && support.hi <= cube.lambda.hi + 1e-12,
          ErrorCode::SupportEscape, "velocity_average: profile support escapes the grid");
  const std::size_t nx = cube.xgrid.node_count();
  const int nl = cube.lambda.count;
  const double dl = cube.lambda.spacing();
  std::vector<double> rho_tab(nl);
  for (int li = 0; li < nl; ++li) rho_tab[li] = rho(cube.lambda.value(li));
  std::vector<RealField> out;
  for (std::size_t ti = 0; ti < cube.times.size(); ++ti) {
    RealField avg(cube.xgrid);
    for (std::size_t xi = 0; xi < nx; ++xi) {
      const std::int8_t* row = cube.h.data() + (ti * nx + xi) * nl;
      double acc = 0.0;
      for (int li = 0; li < nl; ++li) {
        double w = (li == 0 || li == nl - 1) ? 0.5 : 1.0;
        acc += w * rho_tab[li] * row[li];
      }
      avg.values[xi] = acc * dl;
    }
    out.push_back(std::move(avg));
  }
  return out;
}

double gamma1_theory(double eps, double delta, double n) {
  return std::sqrt(eps) * (std::sqrt(delta) / n + 1.0);
}

double gamma2_theory(double eps, double delta, double n, int dim) {
  double se = std::sqrt(eps), sd = std::sqrt(delta);
  double nd1 = std::pow(n, dim + 1);
  return sd * (1.0 / (se * nd1) + (sd / (se * nd1) + se) / n + 1.0 / (se * nd1) +
               1.0 / std::pow(n, 0.5 * dim + 1.0));
}

DefectBundle::DefectBundle(const Trajectory& traj, const LambdaGrid& lambda)
    : traj_(traj), lambda_(lambda) {
  require(traj.time_derivatives.size() == traj.states.size(),
          ErrorCode::MissingTimeDerivative, "defect_bundle: missing time derivatives");
  check_margin(traj, lambda);
  const Grid& g = traj.grid;
  const int d = g.dim;
  const std::size_t nt = traj.size();

  summary_.eps = traj.config.eps;
  summary_.delta = traj.config.delta;
  summary_.n = traj.flux->width();
  summary_.bound_gamma1 = gamma1_theory(summary_.eps, summary_.delta, summary_.n);
  summary_.bound_gamma2 = gamma2_theory(summary_.eps, summary_.delta, summary_.n, d);

  double grad_sq_tot = 0.0;     // int_0^T int |grad u|^2
  double grad_dt_sq_tot = 0.0;  // int_0^T int |grad dt u|^2
  double mixed_tot = 0.0;       // int_0^T int |grad u . grad dt u|
  double prev_a = 0.0, prev_b = 0.0, prev_m = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    SpectralField uh = forward_transform(traj.states[k]);
    SpectralField dth = forward_transform(traj.time_derivatives[k]);
    double a = 0.0, b = 0.0, m = 0.0;
    std::vector<RealField> gu, gd;
    for (int j = 0; j < d; ++j) {
      gu.push_back(inverse_transform(derivative(uh, j)));
      gd.push_back(inverse_transform(derivative(dth, j)));
    }
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < d; ++j) {
        a += gu[j].values[i] * gu[j].values[i];
        b += gd[j].values[i] * gd[j].values[i];
        dot += gu[j].values[i] * gd[j].values[i];
      }
      m += std::abs(dot);
    }
    a *= g.cell_volume();
    b *= g.cell_volume();
    m *= g.cell_volume();
    if (k > 0) {
      double h = traj.times[k] - traj.times[k - 1];
      grad_sq_tot += 0.5 * h * (prev_a + a);
      grad_dt_sq_tot += 0.5 * h * (prev_b + b);
      mixed_tot += 0.5 * h * (prev_m + m);
    }
    prev_a = a;
    prev_b = b;
    prev_m = m;
  }
  const double eps = summary_.eps, delta = summary_.delta;
  const double lam_len = lambda.length();
  summary_.gamma1_proxy = 2.0 * eps * std::sqrt(grad_sq_tot);
  summary_.gamma2_proxy = 2.0 * delta * std::sqrt(grad_dt_sq_tot);
  summary_.gamma3_l1 = lam_len * 2.0 * eps * grad_sq_tot;
  summary_.gamma4_l1 = lam_len * 2.0 * delta * mixed_tot;
  summary_.gamma4_bound =
      lam_len * 2.0 * delta * std::sqrt(grad_sq_tot) * std::sqrt(grad_dt_sq_tot);

  // || h (dlambda f - dlambda f_eps) ||_{L1([0,T] x box x Lambda)}; the factor
  // h has unit modulus, and the difference does not depend on t.
  const MollifiedFlux& fl = *traj.flux;
  const int nxq = 129, nlq = 257;
  double acc = 0.0;
  double x[2] = {0.0, 0.0};
  const int transverse = d == 2 ? 17 : 1;
  for (int ix = 0; ix < nxq; ++ix) {
    x[0] = -g.half_width + 2.0 * g.half_width * ix / (nxq - 1);
    double wx = (ix == 0 || ix == nxq - 1) ? 0.5 : 1.0;
    for (int it = 0; it < transverse; ++it) {
      double wt = 1.0;
      if (d == 2) {
        x[1] = -g.half_width + 2.0 * g.half_width * it / (transverse - 1);
        wt = (it == 0 || it == transverse - 1) ? 0.5 : 1.0;
      }
      for (int il = 0; il < nlq; ++il) {
        double lam = lambda.lo + lambda.length() * il / (nlq - 1);
        double wl = (il == 0 || il == nlq - 1) ? 0.5 : 1.0;
        double diff = 0.0;
        for (int j = 0; j < d; ++j)
          diff += std::abs(fl.base().dlambda(j, std::span<const double>(x, d), lam) -
                           fl.dlambda(j, std::span<const double>(x, d), lam));
        acc += wx * wt * wl * diff;
      }
    }
  }
  double cell = (2.0 * g.half_width / (nxq - 1)) * (lambda.length() / (nlq - 1));
  if (d == 2) cell *= 2.0 * g.half_width / (transverse - 1);
  summary_.g3_l1 = acc * cell * traj.times.back();
}

DefectSlice DefectBundle::slice(std::size_t traj_node) const {
  require(traj_.grid.dim == 1, ErrorCode::ConfigError, "defect slice: 1D only");
  require(traj_node < traj_.size(), ErrorCode::ConfigError, "defect slice: bad node");
  const Grid& g = traj_.grid;
  const std::size_t nx = g.node_count();
  const int nl = lambda_.count;
  const double eps = traj_.config.eps, delta = traj_.config.delta;
  DefectSlice out;
  RealField gu = gradient_component(traj_.states[traj_node], 0);
  RealField gd = gradient_component(traj_.time_derivatives[traj_node], 0);
  out.grad = gu.values;
  out.grad_dt = gd.values;
  out.gamma1.resize(nx * nl);
  out.gamma2.resize(nx * nl);
  out.gamma3.resize(nx * nl);
  out.gamma4.resize(nx * nl);
  out.g3.resize(nx * nl);
  const MollifiedFlux& fl = *traj_.flux;
  const RealField& u = traj_.states[traj_node];
  for (std::size_t xi = 0; xi < nx; ++xi) {
    double x[1] = {g.coord(static_cast<int>(xi))};
    for (int li = 0; li < nl; ++li) {
      double lam = lambda_.value(li);
      double h = u.values[xi] >= lam ? 1.0 : -1.0;
      std::size_t idx = xi * nl + li;
      out.gamma1[idx] = 2.0 * eps * h * gu.values[xi];
      out.gamma2[idx] = 2.0 * delta * h * gd.values[xi];
      out.gamma3[idx] = 2.0 * eps * h * gu.values[xi] * gu.values[xi];
      out.gamma4[idx] = 2.0 * delta * h * gu.values[xi] * gd.values[xi];
      out.g3[idx] = h * (fl.base().dlambda(0, std::span<const double>(x, 1), lam) -
                         fl.dlambda(0, std::span<const double>(x, 1), lam));
    }
  }
  return out;
}

DefectBundle defect_bundle(const Trajectory& traj, const LambdaGrid& lambda) {
  return DefectBundle(traj, lambda);
}

DecayTable defect_decay_study(const std::vector<const Trajectory*>& runs,
                              const LambdaGrid& lambda) {
  require(runs.size() >= 2, ErrorCode::InconsistentRuns,
          "defect_decay_study: need at least two runs");
  for (std::size_t i = 1; i < runs.size(); ++i) {
    require(runs[i]->grid == runs[0]->grid, ErrorCode::InconsistentRuns,
            "defect_decay_study: runs use different grids");
    require(runs[i]->flux->base().descriptor == runs[0]->flux->base().descriptor,
            ErrorCode::InconsistentRuns, "defect_decay_study: runs use different fluxes");
    require(runs[i]->config.eps < runs[i - 1]->config.eps, ErrorCode::InconsistentRuns,
            "defect_decay_study: eps must decrease along the schedule");
  }
  DecayTable table;
  for (const Trajectory* traj : runs)
    table.rows.push_back(defect_bundle(*traj, lambda).summary());
  double g3min = 1e300, g3max = 0.0, g4min = 1e300, g4max = 0.0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const DefectSummary& s = table.rows[i];
    if (i > 0) {
      if (s.gamma1_proxy > table.rows[i - 1].gamma1_proxy)
        table.gamma1_nonincreasing = false;
      if (s.gamma2_proxy > table.rows[i - 1].gamma2_proxy)
        table.gamma2_nonincreasing = false;
    }
    g3min = std::min(g3min, s.gamma3_l1);
    g3max = std::max(g3max, s.gamma3_l1);
    g4min = std::min(g4min, s.gamma4_l1);
    g4max = std::max(g4max, s.gamma4_l1);
  }
  table.gamma3_ratio = g3min > 0.0 ? g3max / g3min : (g3max > 0.0 ? 1e300 : 1.0);
  table.gamma4_ratio = g4min > 0.0 ? g4max / g4min : (g4max > 0.0 ? 1e300 : 1.0);
  return table;
}

CompactnessReport compactness_probe(const std::vector<RealField>& averages,
                                    double window_fraction,
                                    const std::vector<int>& cell_shifts) {
  require(averages.size() >= 2, ErrorCode::GridMismatch,
          "compactness_probe: need at least two fields");
  const Grid& g = averages[0].grid;
  for (const RealField& a : averages)
    require(a.grid == g, ErrorCode::GridMismatch, "compactness_probe: grid mismatch");
  const int N = g.points_per_axis;
  require(g.dim == 1, ErrorCode::ConfigError, "compactness_probe: 1D fields expected");
  const double cut = window_fraction * g.half_width;

  auto window_l1 = [&](const RealField& a, const RealField& b, int shift) {
    double acc = 0.0;
    for (int j = 0; j < N; ++j) {
      if (std::abs(g.coord(j)) > cut) continue;
      int js = ((j + shift) % N + N) % N;
      acc += std::abs(a.values[js] - b.values[j]);
    }
    return acc * g.spacing();
  };

  CompactnessReport report;
  for (std::size_t i = 0; i + 1 < averages.size(); ++i)
    report.pairwise_l1.push_back(window_l1(averages[i + 1], averages[i], 0));
  report.cauchy = true;
  for (std::size_t i = 0; i + 1 < report.pairwise_l1.size(); ++i)
    if (report.pairwise_l1[i + 1] >= report.pairwise_l1[i]) report.cauchy = false;

  for (int s : cell_shifts) report.shift_sizes.push_back(s * g.spacing());
  for (const RealField& a : averages) {
    std::vector<double> mods;
    for (int s : cell_shifts) {
      double worst = 0.0;
      for (int tau = -s; tau <= s; ++tau) {
        if (tau == 0) continue;
        worst = std::max(worst, window_l1(a, a, tau));
      }
      mods.push_back(worst);
    }
    report.translation_moduli.push_back(std::move(mods));
  }
  return report;
}

}  // namespace caplab
