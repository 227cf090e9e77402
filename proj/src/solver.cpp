#include "caplab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "caplab/errors.hpp"
#include "caplab/quadrature.hpp"

namespace caplab {

namespace {

void validate(const SolverConfig& cfg) {
  require(cfg.eps > 0.0, ErrorCode::ConfigError, "solver: eps must be positive");
  require(cfg.delta >= 0.0, ErrorCode::ConfigError, "solver: delta must be nonnegative");
  require(cfg.slab_dt > 0.0, ErrorCode::ConfigError, "solver: slab_dt must be positive");
  require(cfg.picard_tol > 0.0, ErrorCode::ConfigError, "solver: picard_tol must be positive");
  require(cfg.quadrature_substeps >= 1 && cfg.quadrature_substeps <= 12,
          ErrorCode::ConfigError, "solver: quadrature_substeps out of range");
}

// Per-slab time geometry: sample fractions {0, gl_1..gl_M}, targets
// {gl_1..gl_M, 1}, sub-quadrature of each target interval, and Lagrange
// weights interpolating the samples at the sub-nodes.
struct SlabGeometry {
  double dt = 0.0;
  std::vector<double> sample_frac;               // M+1
  std::vector<double> target_frac;               // M+1 (last is 1)
  std::vector<std::vector<double>> sub_frac;     // [target][q]
  std::vector<std::vector<double>> sub_weight;   // [target][q], scaled by dt
  std::vector<std::vector<std::vector<double>>> lagrange;  // [target][q][sample]
};

SlabGeometry make_geometry(int substeps, double dt) {
  SlabGeometry geo;
  geo.dt = dt;
  const GaussRule& rule = gauss_legendre(substeps);
  geo.sample_frac = {0.0};
  for (double s : rule.nodes) geo.sample_frac.push_back(0.5 * (s + 1.0));
  geo.target_frac.assign(geo.sample_frac.begin() + 1, geo.sample_frac.end());
  geo.target_frac.push_back(1.0);
  const int nt = static_cast<int>(geo.target_frac.size());
  geo.sub_frac.resize(nt);
  geo.sub_weight.resize(nt);
  geo.lagrange.resize(nt);
  for (int p = 0; p < nt; ++p) {
    double tau = geo.target_frac[p];
    for (int q = 0; q < substeps; ++q) {
      double s = tau * 0.5 * (rule.nodes[q] + 1.0);
      geo.sub_frac[p].push_back(s);
      geo.sub_weight[p].push_back(tau * 0.5 * rule.weights[q] * dt);
      // Lagrange basis over the sample fractions evaluated at s
      std::vector<double> ell(geo.sample_frac.size(), 1.0);
      for (std::size_t m = 0; m < geo.sample_frac.size(); ++m) {
        for (std::size_t r = 0; r < geo.sample_frac.size(); ++r) {
          if (r == m) continue;
          ell[m] *= (s - geo.sample_frac[r]) / (geo.sample_frac[m] - geo.sample_frac[r]);
        }
      }
      geo.lagrange[p].push_back(std::move(ell));
    }
  }
  return geo;
}

// Mode tables for one slab length: decay factors at targets and sub-nodes.
struct ExpTables {
  std::vector<double> target;  // [p * nmodes + i]
  std::vector<double> sub;     // [(p * M + q) * nmodes + i]
};

class Engine {
 public:
  Engine(const Grid& grid, const SolverConfig& cfg, const MollifiedFlux& flux)
      : grid_(grid), cfg_(cfg), flux_(flux) {
    validate(cfg);
    const std::size_t n = grid.node_count();
    symbol_a_.resize(n);
    div_symbol_.resize(n);
    denom_.resize(n);
    keep_.resize(n);
    const int N = grid.points_per_axis;
    const int cut = N / 3;
    separable_ = flux.separable();
    const std::vector<double>& dir = flux.base().direction;
    auto fill = [&](std::size_t idx, double xi0, double xi1, int k0, int k1) {
      double xisq = xi0 * xi0 + xi1 * xi1;
      denom_[idx] = 1.0 / (1.0 + cfg.delta * xisq);
      symbol_a_[idx] = cfg.eps * xisq * denom_[idx];
      double sdiv = xi0 * dir[0];
      if (grid.dim == 2) sdiv += xi1 * dir[1];
      div_symbol_[idx] = sdiv;
      bool keep = std::abs(k0) <= cut && (grid.dim == 1 || std::abs(k1) <= cut);
      keep_[idx] = keep ? 1.0 : 0.0;
    };
    if (grid.dim == 1) {
      for (int m = 0; m < N; ++m) {
        int k = grid.signed_mode(m);
        double xi = (k == -N / 2) ? 0.0 : grid.wavenumber(k);
        fill(m, xi, 0.0, k, 0);
      }
    } else {
      for (int m0 = 0; m0 < N; ++m0) {
        int k0 = grid.signed_mode(m0);
        double xi0 = (k0 == -N / 2) ? 0.0 : grid.wavenumber(k0);
        for (int m1 = 0; m1 < N; ++m1) {
          int k1 = grid.signed_mode(m1);
          double xi1 = (k1 == -N / 2) ? 0.0 : grid.wavenumber(k1);
          fill(grid.index(m0, m1), xi0, xi1, k0, k1);
        }
      }
    }
    if (separable_) {
      perm_nodes_ = RealField(grid);
      const int nn = grid.points_per_axis;
      if (grid.dim == 1) {
        double x[1];
        for (int j = 0; j < nn; ++j) {
          x[0] = grid.coord(j);
          perm_nodes_.values[j] = flux.perm(std::span<const double>(x, 1));
        }
      } else {
        double x[2];
        for (int j0 = 0; j0 < nn; ++j0) {
          x[0] = grid.coord(j0);
          for (int j1 = 0; j1 < nn; ++j1) {
            x[1] = grid.coord(j1);
            perm_nodes_.values[grid.index(j0, j1)] =
                flux.perm(std::span<const double>(x, 2));
          }
        }
      }
    }
  }

  const Grid& grid() const { return grid_; }
  const SolverConfig& config() const { return cfg_; }

  // f_eps(x, v(x)) transformed and dealiased; separable bases share one
  // transform across components (the direction enters through div_symbol_).
  SpectralField flux_transform(const RealField& v) const {
    RealField w(grid_);
    if (separable_) {
      for (std::size_t j = 0; j < w.values.size(); ++j)
        w.values[j] = perm_nodes_.values[j] * flux_.profile(v.values[j]);
    } else {
      const int N = grid_.points_per_axis;
      if (grid_.dim == 1) {
        double x[1];
        for (int j = 0; j < N; ++j) {
          x[0] = grid_.coord(j);
          w.values[j] = flux_.eval(0, std::span<const double>(x, 1), v.values[j]);
        }
      } else {
        fail(ErrorCode::ConfigError, "solver: general fluxes are 1D only");
      }
    }
    SpectralField W = forward_transform(w);
    if (cfg_.dealias)
      for (std::size_t i = 0; i < W.coeff.size(); ++i) W.coeff[i] *= keep_[i];
    return W;
  }

  const SlabGeometry& geometry(double dt) {
    auto it = geo_cache_.find(dt);
    if (it == geo_cache_.end())
      it = geo_cache_.emplace(dt, make_geometry(cfg_.quadrature_substeps, dt)).first;
    return it->second;
  }

  const ExpTables& exp_tables(double dt) {
    auto it = exp_cache_.find(dt);
    if (it != exp_cache_.end()) return it->second;
    const SlabGeometry& geo = geometry(dt);
    ExpTables tab;
    const std::size_t n = grid_.node_count();
    const int nt = static_cast<int>(geo.target_frac.size());
    const int M = cfg_.quadrature_substeps;
    tab.target.resize(nt * n);
    tab.sub.resize(static_cast<std::size_t>(nt) * M * n);
    for (int p = 0; p < nt; ++p) {
      double taudt = geo.target_frac[p] * dt;
      for (std::size_t i = 0; i < n; ++i)
        tab.target[p * n + i] = std::exp(-symbol_a_[i] * taudt);
      for (int q = 0; q < M; ++q) {
        double gap = (geo.target_frac[p] - geo.sub_frac[p][q]) * dt;
        double* row = tab.sub.data() + (static_cast<std::size_t>(p) * M + q) * n;
        for (std::size_t i = 0; i < n; ++i) row[i] = std::exp(-symbol_a_[i] * gap);
      }
    }
    return exp_cache_.emplace(dt, std::move(tab)).first->second;
  }

  // Apply the Duhamel map at all targets. what_nodes are the dealiased flux
  // transforms at the sample nodes. Returns spectra at the geometry targets.
  std::vector<SpectralField> apply_map(const SpectralField& u_hat_a,
                                       const std::vector<SpectralField>& what_nodes,
                                       double dt, double* bound_slack) {
    const SlabGeometry& geo = geometry(dt);
    const ExpTables& tab = exp_tables(dt);
    const std::size_t n = grid_.node_count();
    const int nt = static_cast<int>(geo.target_frac.size());
    const int M = cfg_.quadrature_substeps;
    const int ns = static_cast<int>(geo.sample_frac.size());
    std::vector<SpectralField> out(nt, SpectralField(grid_));
    std::vector<cdouble> interp(n);
    std::vector<double> bsum(n);
    double worst = 0.0;
    for (int p = 0; p < nt; ++p) {
      SpectralField& target = out[p];
      const double* etar = tab.target.data() + static_cast<std::size_t>(p) * n;
      for (std::size_t i = 0; i < n; ++i) target.coeff[i] = etar[i] * u_hat_a.coeff[i];
      std::fill(bsum.begin(), bsum.end(), 0.0);
      for (int q = 0; q < M; ++q) {
        const std::vector<double>& ell = geo.lagrange[p][q];
        std::fill(interp.begin(), interp.end(), cdouble(0.0, 0.0));
        for (int m = 0; m < ns; ++m) {
          const double c = ell[m];
          const cdouble* src = what_nodes[m].coeff.data();
          for (std::size_t i = 0; i < n; ++i) interp[i] += c * src[i];
        }
        const double w = geo.sub_weight[p][q];
        const double* esub = tab.sub.data() + (static_cast<std::size_t>(p) * M + q) * n;
        for (std::size_t i = 0; i < n; ++i) {
          // B = i * (xi . dir) * denom * w_hat
          cdouble b = cdouble(0.0, div_symbol_[i] * denom_[i]) * interp[i];
          target.coeff[i] -= w * esub[i] * b;
          bsum[i] += w * std::abs(b);
        }
      }
      // per-mode bound |u(t)| <= |u(t_a)| + sum w_q |B_q| (weights positive,
      // decay factors <= 1)
      for (std::size_t i = 0; i < n; ++i) {
        double lhs = std::abs(target.coeff[i]);
        double rhs = std::abs(u_hat_a.coeff[i]) + bsum[i];
        worst = std::max(worst, lhs - rhs * (1.0 + 1e-12));
      }
    }
    if (bound_slack) *bound_slack = worst;
    return out;
  }

  double spectral_norm(const SpectralField& a, const SpectralField& b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.coeff.size(); ++i) s += std::norm(a.coeff[i] - b.coeff[i]);
    return std::sqrt(s / grid_.box_volume());
  }

  // dt u_hat = -A u_hat - i (xi . dir) denom w_hat
  SpectralField time_derivative_hat(const SpectralField& u_hat,
                                    const SpectralField& w_hat) const {
    SpectralField out(grid_);
    for (std::size_t i = 0; i < u_hat.coeff.size(); ++i)
      out.coeff[i] = -symbol_a_[i] * u_hat.coeff[i] -
                     cdouble(0.0, div_symbol_[i] * denom_[i]) * w_hat.coeff[i];
    return out;
  }

  double init_scale = 0.0;
  double mode_bound_worst = 0.0;

  // Picard iteration on [t_a, t_b]; u_hat_a is consumed and the end spectrum
  // is returned through it.
  SlabStat run_slab(SpectralField& u_hat_a, double t_a, double t_b, int depth) {
    const double dt = t_b - t_a;
    SlabStat stat{t_a, t_b, 0, 0.0, 0};
    bool contraction_ok = (std::expm1(dt) * flux_.dlambda_inf()) < 1.0;
    if (!contraction_ok) return bisect(u_hat_a, t_a, t_b, depth, stat);

    const SlabGeometry& geo = geometry(dt);
    const int ns = static_cast<int>(geo.sample_frac.size());
    const int M = cfg_.quadrature_substeps;
    RealField u_a_phys = inverse_transform(u_hat_a);
    std::vector<RealField> v_nodes(ns, u_a_phys);
    std::vector<SpectralField> v_hats(M, u_hat_a);  // interior samples only
    double prev_residual = 0.0;
    for (int iter = 1; iter <= cfg_.picard_max_iter; ++iter) {
      std::vector<SpectralField> what_nodes;
      what_nodes.reserve(ns);
      for (int m = 0; m < ns; ++m) what_nodes.push_back(flux_transform(v_nodes[m]));
      double bound_slack = 0.0;
      std::vector<SpectralField> targets = apply_map(u_hat_a, what_nodes, dt, &bound_slack);
      mode_bound_worst = std::max(mode_bound_worst, bound_slack);
      double residual = 0.0;
      for (int m = 0; m < M; ++m)
        residual = std::max(residual, spectral_norm(targets[m], v_hats[m]));
      for (int m = 0; m < M; ++m) {
        v_hats[m] = targets[m];
        v_nodes[m + 1] = inverse_transform(targets[m]);
      }
      stat.iterations = iter;
      stat.residual = residual;
      double amp = 0.0;
      for (const SpectralField& t : targets)
        for (const cdouble& c : t.coeff) amp = std::max(amp, std::abs(c));
      if (amp > 1e8 * std::max(init_scale, 1e-30))
        fail(ErrorCode::UnstableMode, "solver: mode amplitude blow-up");
      if (residual <= cfg_.picard_tol) {
        u_hat_a = std::move(targets.back());  // the t_b target
        return stat;
      }
      if (iter >= 2 && residual > prev_residual && residual > cfg_.picard_tol)
        return bisect(u_hat_a, t_a, t_b, depth, stat);
      prev_residual = residual;
    }
    return bisect(u_hat_a, t_a, t_b, depth, stat);
  }

 private:
  SlabStat bisect(SpectralField& u_hat_a, double t_a, double t_b, int depth,
                  SlabStat stat) {
    if (depth >= 6)
      fail(ErrorCode::NoConvergence,
           "solver: Picard iteration failed after 6 slab bisections");
    double mid = 0.5 * (t_a + t_b);
    SlabStat left = run_slab(u_hat_a, t_a, mid, depth + 1);
    SlabStat right = run_slab(u_hat_a, mid, t_b, depth + 1);
    stat.iterations += left.iterations + right.iterations;
    stat.residual = std::max(left.residual, right.residual);
    stat.bisections = 1 + std::max(left.bisections, right.bisections);
    return stat;
  }

  Grid grid_;
  SolverConfig cfg_;
  const MollifiedFlux& flux_;
  bool separable_ = true;
  RealField perm_nodes_{Grid(1, 1.0, 8)};
  std::vector<double> symbol_a_, div_symbol_, denom_, keep_;
  std::map<double, SlabGeometry> geo_cache_;
  std::map<double, ExpTables> exp_cache_;
};

double max_abs_coeff(const SpectralField& f) {
  double m = 0.0;
  for (const cdouble& c : f.coeff) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

std::vector<double> slab_node_times(const SolverConfig& cfg, double t_a, double t_b) {
  SlabGeometry geo = make_geometry(cfg.quadrature_substeps, t_b - t_a);
  std::vector<double> out;
  for (double c : geo.sample_frac) out.push_back(t_a + c * (t_b - t_a));
  return out;
}

std::vector<RealField> duhamel_linear_solve(const std::vector<RealField>& v_nodes,
                                            const RealField& u_a,
                                            const SolverConfig& cfg,
                                            const MollifiedFlux& flux, double t_a,
                                            double t_b) {
  require(static_cast<int>(v_nodes.size()) == cfg.quadrature_substeps + 1,
          ErrorCode::ConfigError,
          "duhamel_linear_solve: need quadrature_substeps + 1 node samples");
  Engine engine(u_a.grid, cfg, flux);
  SpectralField u_hat_a = forward_transform(u_a);
  engine.init_scale = max_abs_coeff(u_hat_a);
  std::vector<SpectralField> what;
  what.reserve(v_nodes.size());
  for (const RealField& v : v_nodes) what.push_back(engine.flux_transform(v));
  std::vector<SpectralField> targets =
      engine.apply_map(u_hat_a, what, t_b - t_a, nullptr);
  std::vector<RealField> out;
  out.push_back(u_a);
  for (int m = 0; m + 1 < static_cast<int>(targets.size()); ++m)
    out.push_back(inverse_transform(targets[m]));
  double amp = 0.0;
  for (const SpectralField& t : targets) amp = std::max(amp, max_abs_coeff(t));
  if (amp > 1e8 * std::max(engine.init_scale, 1e-30))
    fail(ErrorCode::UnstableMode, "duhamel_linear_solve: mode amplitude blow-up");
  return out;
}

SlabResult picard_solve_slab(const RealField& u_a, const SolverConfig& cfg,
                             const MollifiedFlux& flux, double t_a, double t_b) {
  Engine engine(u_a.grid, cfg, flux);
  SpectralField u_hat = forward_transform(u_a);
  engine.init_scale = max_abs_coeff(u_hat);
  SlabStat stat = engine.run_slab(u_hat, t_a, t_b, 0);
  return SlabResult{inverse_transform(u_hat), stat};
}

Trajectory solve(const RealField& u0, double T_final, const SolverConfig& cfg,
                 std::shared_ptr<const MollifiedFlux> flux) {
  require(T_final >= 0.0, ErrorCode::ConfigError, "solve: T_final must be nonnegative");
  require(u0.all_finite(), ErrorCode::ConfigError, "solve: initial data must be finite");
  const Interval window = flux->window();
  {
    double fuzz = 1e-12 * std::max(1.0, window.length());
    require(u0.min_value() >= window.lo - fuzz && u0.max_value() <= window.hi + fuzz,
            ErrorCode::WindowEscape, "solve: initial data leaves the lambda window");
  }

  Engine engine(u0.grid, cfg, *flux);
  Trajectory traj(u0.grid);
  traj.flux = flux;
  traj.config = cfg;

  SpectralField u_hat = forward_transform(u0);
  engine.init_scale = max_abs_coeff(u_hat);
  const double mass0 = u_hat.coeff[0].real();

  auto record = [&](double t, const SpectralField& uh, const RealField& uphys) {
    SpectralField what = engine.flux_transform(uphys);
    SpectralField dt_hat = engine.time_derivative_hat(uh, what);
    traj.times.push_back(t);
    traj.states.push_back(uphys);
    traj.time_derivatives.push_back(inverse_transform(dt_hat));
    traj.conservation_drift = std::max(
        traj.conservation_drift, std::abs(uh.coeff[0].real() - mass0));
    traj.boundary_mass_worst =
        std::max(traj.boundary_mass_worst, boundary_mass_fraction(uphys));
    double lo_margin = uphys.min_value() - window.lo;
    double hi_margin = window.hi - uphys.max_value();
    double fuzz = 1e-12 * std::max(1.0, window.length());
    if (lo_margin < -fuzz || hi_margin < -fuzz)
      fail(ErrorCode::WindowEscape, "solve: solution range left the lambda window");
    traj.window_margin_worst = std::min(
        traj.window_margin_worst, std::min(lo_margin, hi_margin) / window.length());
  };

  record(0.0, u_hat, u0);

  long steps = T_final > 0.0 ? static_cast<long>(std::ceil(T_final / cfg.slab_dt - 1e-12)) : 0;
  for (long k = 0; k < steps; ++k) {
    double t_a = k * cfg.slab_dt;
    double t_b = std::min((k + 1) * cfg.slab_dt, T_final);
    SlabStat stat = engine.run_slab(u_hat, t_a, t_b, 0);
    traj.slab_stats.push_back(stat);
    RealField uphys = inverse_transform(u_hat);
    record(t_b, u_hat, uphys);
  }
  traj.mode_bound_worst = engine.mode_bound_worst;
  traj.boundary_flagged = traj.boundary_mass_worst > 1e-6;
  traj.window_margin_flagged = traj.window_margin_worst < 0.1;
  return traj;
}

StabilityReport stability_diagnostic(const Trajectory& traj) {
  StabilityReport report;
  const Grid& g = traj.grid;
  const std::size_t nt = traj.size();
  const int d = g.dim;
  report.grad_component_l2.assign(d, 0.0);
  std::vector<double> grad_sq_prev(d, 0.0);
  double dtu_sq_prev = 0.0, flux_sq_prev = 0.0;
  std::vector<double> grad0(d, 0.0);

  std::vector<double> comp_sq(d, 0.0);
  double dtu_sq = 0.0, flux_sq = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    SpectralField uh = forward_transform(traj.states[k]);
    double grad_total = l2_norm_gradient(uh);
    report.sup_grad_l2 = std::max(report.sup_grad_l2, grad_total);
    std::vector<double> gsq(d);
    for (int j = 0; j < d; ++j) {
      double nj = l2_norm(derivative(uh, j));
      gsq[j] = nj * nj;
      if (k == 0) grad0[j] = nj;
    }
    double dsq = 0.0;
    {
      double nd = l2_norm(traj.time_derivatives[k]);
      dsq = nd * nd;
    }
    // |f_eps(x, u)|^2 integrated over the box
    double fsq = 0.0;
    {
      const MollifiedFlux& fl = *traj.flux;
      const RealField& u = traj.states[k];
      const int N = g.points_per_axis;
      if (g.dim == 1) {
        double x[1];
        for (int j = 0; j < N; ++j) {
          x[0] = g.coord(j);
          double fv = fl.eval(0, std::span<const double>(x, 1), u.values[j]);
          fsq += fv * fv;
        }
      } else {
        double x[2];
        for (int j0 = 0; j0 < N; ++j0) {
          x[0] = g.coord(j0);
          for (int j1 = 0; j1 < N; ++j1) {
            x[1] = g.coord(j1);
            double a = fl.eval(0, std::span<const double>(x, 2), u.values[g.index(j0, j1)]);
            double b = fl.eval(1, std::span<const double>(x, 2), u.values[g.index(j0, j1)]);
            fsq += a * a + b * b;
          }
        }
      }
      fsq *= g.cell_volume();
    }
    if (k > 0) {
      double h = traj.times[k] - traj.times[k - 1];
      for (int j = 0; j < d; ++j) comp_sq[j] += 0.5 * h * (grad_sq_prev[j] + gsq[j]);
      dtu_sq += 0.5 * h * (dtu_sq_prev + dsq);
      flux_sq += 0.5 * h * (flux_sq_prev + fsq);
    }
    grad_sq_prev = gsq;
    dtu_sq_prev = dsq;
    flux_sq_prev = fsq;
  }
  const double T = traj.times.back();
  report.dtu_l2_spacetime = std::sqrt(dtu_sq);
  report.flux_l2_spacetime = std::sqrt(flux_sq);
  report.grad_bound_ok = true;
  for (int j = 0; j < d; ++j) {
    report.grad_component_l2[j] = std::sqrt(comp_sq[j]);
    double rhs = std::sqrt(T) * grad0[j] +
                 (1.0 / traj.config.eps) * report.flux_l2_spacetime;
    report.grad_bound_rhs.push_back(rhs);
    report.grad_bound_rhs_normalized.push_back(std::sqrt(T) * grad0[j] +
                                               T * std::exp(T) * report.flux_l2_spacetime);
    if (report.grad_component_l2[j] > rhs * (1.0 + 1e-9)) report.grad_bound_ok = false;
  }
  return report;
}

}  // namespace caplab
