#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "caplab/energy.hpp"
#include "caplab/errors.hpp"
#include "caplab/flux.hpp"
#include "caplab/grid.hpp"
#include "caplab/solver.hpp"

using namespace caplab;

namespace {

RealField gaussian(const Grid& g, double amp, double center, double sigma) {
  return RealField::sample(g, [=](std::span<const double> x) {
    double r = (x[0] - center) / sigma;
    return amp * std::exp(-0.5 * r * r);
  });
}

double l2_diff(const RealField& a, const RealField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s * a.grid.cell_volume());
}

std::shared_ptr<const MollifiedFlux> make_flux(const FluxModel& m, double n, double L) {
  return std::make_shared<MollifiedFlux>(mollify(m, n, 0.05, L));
}

// Independent cross-check: semi-implicit finite differences for
//   dt u + dx f(x,u) = eps uxx + delta dt uxx
// on a periodic grid. (I - delta D2) dt u = -D1 f + eps D2 u, solved with a
// cyclic tridiagonal factorization, marched with Heun steps.
struct FdOracle {
  int n;
  double L, h, eps, delta;
  const MollifiedFlux& flux;

  FdOracle(int n_, double L_, double eps_, double delta_, const MollifiedFlux& f)
      : n(n_), L(L_), h(2.0 * L_ / n_), eps(eps_), delta(delta_), flux(f) {}

  std::vector<double> cyclic_solve(const std::vector<double>& b) const {
    // A = I - delta D2: diag a, off-diag c, periodic corners c
    double a = 1.0 + 2.0 * delta / (h * h);
    double c = -delta / (h * h);
    if (delta == 0.0) return b;
    // Sherman-Morrison with u = (gamma, 0, ..., 0, c)^T, v = (1, 0, ..., 0, c/gamma)
    double gamma = -a;
    std::vector<double> diag(n, a);
    diag[0] = a - gamma;
    diag[n - 1] = a - c * c / gamma;
    auto thomas = [&](const std::vector<double>& rhs) {
      std::vector<double> cp(n), dp(n);
      cp[0] = c / diag[0];
      dp[0] = rhs[0] / diag[0];
      for (int i = 1; i < n; ++i) {
        double m = diag[i] - c * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (rhs[i] - c * dp[i - 1]) / m;
      }
      std::vector<double> x(n);
      x[n - 1] = dp[n - 1];
      for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
      return x;
    };
    std::vector<double> y = thomas(b);
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = c;
    std::vector<double> z = thomas(u);
    double vy = y[0] + (c / gamma) * y[n - 1];
    double vz = 1.0 + z[0] + (c / gamma) * z[n - 1];
    for (int i = 0; i < n; ++i) y[i] -= z[i] * (vy / vz);
    return y;
  }

  std::vector<double> rate(const std::vector<double>& u) const {
    std::vector<double> rhs(n);
    std::vector<double> fv(n);
    for (int i = 0; i < n; ++i) {
      double x[1] = {-L + i * h};
      fv[i] = flux.eval(0, std::span<const double>(x, 1), u[i]);
    }
    for (int i = 0; i < n; ++i) {
      int ip = (i + 1) % n, im = (i + n - 1) % n;
      double d1f = (fv[ip] - fv[im]) / (2.0 * h);
      double d2u = (u[ip] - 2.0 * u[i] + u[im]) / (h * h);
      rhs[i] = -d1f + eps * d2u;
    }
    return cyclic_solve(rhs);
  }

  std::vector<double> run(std::vector<double> u, double T, double dt) const {
    long steps = static_cast<long>(std::llround(T / dt));
    for (long s = 0; s < steps; ++s) {
      std::vector<double> k1 = rate(u);
      std::vector<double> up(n);
      for (int i = 0; i < n; ++i) up[i] = u[i] + dt * k1[i];
      std::vector<double> k2 = rate(up);
      for (int i = 0; i < n; ++i) u[i] += 0.5 * dt * (k1[i] + k2[i]);
    }
    return u;
  }
};

}  // namespace

TEST_CASE("duhamel: pure heat decay, delta = 0") {
  Grid g(1, M_PI, 64);
  auto flux = make_flux(zero_flux(), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.3;
  cfg.delta = 0.0;
  double k = 3.0;
  RealField u0 = RealField::sample(g, [&](std::span<const double> x) {
    return std::cos(k * x[0]);
  });
  double dt = 0.01;
  std::vector<double> nodes = slab_node_times(cfg, 0.0, dt);
  std::vector<RealField> v(nodes.size(), u0);
  std::vector<RealField> out = duhamel_linear_solve(v, u0, cfg, *flux, 0.0, dt);
  for (std::size_t m = 1; m < nodes.size(); ++m) {
    double decay = std::exp(-cfg.eps * k * k * nodes[m]);
    for (int j = 0; j < 64; ++j)
      CHECK(out[m].values[j] ==
            doctest::Approx(decay * u0.values[j]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("duhamel: capillarity slows the decay rate") {
  Grid g(1, M_PI, 64);
  auto flux = make_flux(zero_flux(), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.4;
  cfg.delta = 0.25;  // delta k^2 = 1 at k = 2: rate is eps k^2 / 2
  double k = 2.0;
  RealField u0 = RealField::sample(g, [&](std::span<const double> x) {
    return std::cos(k * x[0]);
  });
  double dt = 0.05;
  std::vector<RealField> v(static_cast<std::size_t>(cfg.quadrature_substeps) + 1, u0);
  std::vector<RealField> out = duhamel_linear_solve(v, u0, cfg, *flux, 0.0, dt);
  std::vector<double> nodes = slab_node_times(cfg, 0.0, dt);
  double expected_rate = cfg.eps * k * k / 2.0;
  for (std::size_t m = 1; m < nodes.size(); ++m) {
    double ratio = out[m].values[0] / u0.values[0];
    CHECK(ratio == doctest::Approx(std::exp(-expected_rate * nodes[m])).epsilon(1e-10));
  }
}

TEST_CASE("linear flux solve matches the analytic per-mode solution") {
  Grid g(1, M_PI, 256);
  auto flux = make_flux(linear_flux(1.0), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.slab_dt = 2e-3;
  cfg.picard_tol = 1e-12;
  RealField u0 = gaussian(g, 1.0, 0.0, 0.35);
  double T = 0.5;
  Trajectory traj = solve(u0, T, cfg, flux);

  SpectralField U0 = forward_transform(u0);
  SpectralField exact(g);
  for (int m = 0; m < 256; ++m) {
    int k = g.signed_mode(m);
    double xi = (k == -128) ? 0.0 : g.wavenumber(k);
    cdouble rate = cdouble(cfg.eps * xi * xi, xi) / (1.0 + cfg.delta * xi * xi);
    exact.coeff[m] = U0.coeff[m] * std::exp(-rate * T);
  }
  RealField exact_phys = inverse_transform(exact);
  CHECK(l2_diff(traj.states.back(), exact_phys) < 1e-8);
}

TEST_CASE("constants are exact fixed points") {
  Grid g(1, 2.0, 32);
  auto flux = make_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.1;
  cfg.delta = 0.01;
  RealField u0(g, 0.42);
  SlabResult res = picard_solve_slab(u0, cfg, *flux, 0.0, cfg.slab_dt);
  CHECK(res.stat.iterations == 1);
  for (double v : res.end_state.values) CHECK(v == doctest::Approx(0.42).epsilon(1e-14));
}

TEST_CASE("observed Picard contraction obeys the Gronwall factor") {
  // delta = 1 keeps |xi|/(1 + delta xi^2) <= 1/2, so the slab map contracts
  // at least as fast as (e^{dt} - 1) ||dlambda f||_inf
  Grid g(1, M_PI, 128);
  auto flux = make_flux(linear_flux(1.0), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 1.0;
  cfg.delta = 1.0;
  double dt = 0.05;
  RealField u0 = gaussian(g, 1.0, 0.3, 0.4);
  std::vector<RealField> v(static_cast<std::size_t>(cfg.quadrature_substeps) + 1, u0);
  double bound = std::expm1(dt) * flux->dlambda_inf();
  double prev_res = -1.0;
  std::vector<RealField> cur = v;
  for (int it = 0; it < 4; ++it) {
    std::vector<RealField> next = duhamel_linear_solve(cur, u0, cfg, *flux, 0.0, dt);
    double res = 0.0;
    for (std::size_t m = 0; m < cur.size(); ++m)
      res = std::max(res, l2_diff(next[m], cur[m]));
    if (prev_res > 0.0) CHECK(res / prev_res <= bound + 1e-9);
    prev_res = res;
    cur = std::move(next);
  }
}

TEST_CASE("Buckley-Leverett slab: geometric residual decay and FD cross-check") {
  Grid g(1, 2.0, 256);
  FluxModel bl = buckley_leverett(1.0, Interval{-0.5, 1.5});
  auto flux = make_flux(bl, 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.slab_dt = 1e-3;
  cfg.picard_tol = 1e-11;
  RealField u0 = gaussian(g, 0.8, 0.0, 0.5);
  double T = 0.1;
  Trajectory traj = solve(u0, T, cfg, flux);
  for (const SlabStat& s : traj.slab_stats) {
    CHECK(s.residual <= cfg.picard_tol);
    CHECK(s.bisections == 0);
  }

  FdOracle oracle(8192, g.half_width, cfg.eps, cfg.delta, *flux);
  std::vector<double> u_fd(8192);
  for (int i = 0; i < 8192; ++i) {
    double x = -g.half_width + i * oracle.h;
    u_fd[i] = 0.8 * std::exp(-0.5 * x * x / (0.5 * 0.5));
  }
  u_fd = oracle.run(u_fd, T, 2.5e-4);
  // compare on the spectral nodes (every 32nd FD node)
  double linf = 0.0;
  for (int j = 0; j < 256; ++j)
    linf = std::max(linf, std::abs(traj.states.back().values[j] - u_fd[32 * j]));
  CHECK(linf < 1e-3);
}

TEST_CASE("T = 0 gives a single-state trajectory") {
  Grid g(1, 1.0, 32);
  auto flux = make_flux(zero_flux(), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.1;
  RealField u0 = gaussian(g, 0.5, 0.0, 0.2);
  Trajectory traj = solve(u0, 0.0, cfg, flux);
  CHECK(traj.size() == 1);
  CHECK(traj.times[0] == 0.0);
  CHECK(l2_diff(traj.states[0], u0) == 0.0);
  CHECK(traj.time_derivatives.size() == 1);
}

TEST_CASE("spectral self-convergence under grid refinement") {
  FluxModel bl = buckley_leverett(1.0, Interval{-0.5, 1.5});
  SolverConfig cfg;
  cfg.eps = 0.2;
  cfg.delta = 0.01;
  cfg.slab_dt = 1e-3;
  cfg.picard_tol = 1e-12;
  double T = 0.05, L = M_PI;
  auto run = [&](int N) {
    Grid g(1, L, N);
    auto flux = make_flux(bl, 0.15, L);
    RealField u0 = gaussian(g, 0.7, 0.0, 0.05);
    return solve(u0, T, cfg, flux).states.back();
  };
  RealField ref = run(1024);
  std::vector<double> errs;
  for (int N : {128, 256, 512}) {
    RealField u = run(N);
    double stride = 1024 / N;
    double err = 0.0;
    for (int j = 0; j < N; ++j)
      err = std::max(err, std::abs(u.values[j] - ref.values[static_cast<int>(j * stride)]));
    errs.push_back(err);
  }
  CHECK(errs[0] / errs[1] > 4.0);
  CHECK(errs[1] / errs[2] > 4.0);
}

TEST_CASE("uniqueness surrogate: slab size does not matter") {
  Grid g(1, 2.0, 128);
  auto flux = make_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.picard_tol = 1e-11;
  RealField u0 = gaussian(g, 0.8, 0.0, 0.5);
  cfg.slab_dt = 1e-3;
  Trajectory a = solve(u0, 0.1, cfg, flux);
  cfg.slab_dt = 5e-4;
  Trajectory b = solve(u0, 0.1, cfg, flux);
  CHECK(l2_diff(a.states.back(), b.states.back()) <= 10.0 * cfg.picard_tol);
}

TEST_CASE("conservation of the box integral") {
  Grid g(1, 2.0, 256);
  auto flux = make_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.1, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.slab_dt = 1e-3;
  RealField u0 = gaussian(g, 0.8, 0.3, 0.4);
  Trajectory traj = solve(u0, 0.1, cfg, flux);
  CHECK(traj.conservation_drift < 1e-12);
  CHECK(std::abs(integral(traj.states.back()) - integral(u0)) < 1e-12);
}

TEST_CASE("Gronwall stability of nearby initial data") {
  Grid g(1, M_PI, 128);
  auto flux = make_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.15, g.half_width);
  SolverConfig cfg;
  cfg.eps = 0.25;
  cfg.delta = 0.25;  // |xi|/(1 + delta xi^2) <= 1, Gronwall factor applies
  cfg.slab_dt = 1e-3;
  cfg.picard_tol = 1e-12;
  double T = 0.25;
  RealField u0 = gaussian(g, 0.8, 0.0, 0.6);
  RealField eta = RealField::sample(g, [&](std::span<const double> x) {
    return std::cos(2.0 * x[0]);
  });
  double eta_norm = l2_norm(eta);
  RealField u0p = u0;
  for (std::size_t i = 0; i < u0p.values.size(); ++i)
    u0p.values[i] += 1e-6 * eta.values[i] / eta_norm;
  Trajectory t1 = solve(u0, T, cfg, flux);
  Trajectory t2 = solve(u0p, T, cfg, flux);
  double growth = l2_diff(t1.states.back(), t2.states.back()) / 1e-6;
  double bound = std::exp(std::expm1(T) * flux->dlambda_inf()) * (1.0 + 1e-6);
  CHECK(growth <= bound);
}

TEST_CASE("window escape is detected") {
  Grid g(1, 2.0, 64);
  auto flux = make_flux(buckley_leverett(1.0), 0.05, g.half_width);  // window [0,1]
  SolverConfig cfg;
  cfg.eps = 0.1;
  RealField bad = gaussian(g, 1.2, 0.0, 0.4);
  CHECK_THROWS_AS(solve(bad, 0.01, cfg, flux), Error);

  RealField tight = gaussian(g, 0.95, 0.0, 0.4);
  Trajectory traj = solve(tight, 0.01, cfg, flux);
  CHECK(traj.window_margin_flagged);
}

TEST_CASE("stability diagnostic") {
  Grid g(1, 2.0, 256);
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.slab_dt = 5e-4;
  cfg.picard_tol = 1e-11;

  SUBCASE("pure diffusion: gradient norm is nonincreasing") {
    auto flux = make_flux(zero_flux(), 0.1, g.half_width);
    Trajectory traj = solve(gaussian(g, 1.0, 0.0, 0.3), 0.05, cfg, flux);
    double prev = 1e300;
    for (const RealField& s : traj.states) {
      double gn = l2_norm_gradient(s);
      CHECK(gn <= prev * (1.0 + 1e-12));
      prev = gn;
    }
  }

  SUBCASE("gradient bound and closed-form time derivative") {
    auto flux = make_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.1, g.half_width);
    Trajectory traj = solve(gaussian(g, 0.8, 0.0, 0.5), 0.1, cfg, flux);
    StabilityReport rep = stability_diagnostic(traj);
    CHECK(rep.grad_bound_ok);
    CHECK(rep.sup_grad_l2 > 0.0);
    CHECK(rep.grad_bound_rhs[0] > rep.grad_component_l2[0]);

    // central difference of states vs the recorded closed form
    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
      double dt2 = traj.times[k + 1] - traj.times[k - 1];
      for (std::size_t j = 0; j < traj.states[k].values.size(); ++j) {
        double fd = (traj.states[k + 1].values[j] - traj.states[k - 1].values[j]) / dt2;
        double cf = traj.time_derivatives[k].values[j];
        num += (fd - cf) * (fd - cf);
        den += cf * cf;
      }
    }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("two-dimensional solve: heat decay, conservation, energy balance") {
  Grid g(2, 1.5, 32);
  SolverConfig cfg;
  cfg.eps = 0.2;
  cfg.delta = 0.05;
  cfg.slab_dt = 1e-3;
  cfg.picard_tol = 1e-11;

  SUBCASE("per-mode decay rate with capillarity") {
    auto flux = std::make_shared<MollifiedFlux>(
        mollify(planar_extension(zero_flux(), {1.0, 1.0}), 0.1, 0.05, g.half_width));
    double k0 = g.wavenumber(2), k1 = g.wavenumber(3);
    RealField u0 = RealField::sample(g, [&](std::span<const double> x) {
      return std::cos(k0 * x[0]) * std::cos(k1 * x[1]);
    });
    double T = 0.02;
    Trajectory traj = solve(u0, T, cfg, flux);
    double xisq = k0 * k0 + k1 * k1;
    double rate = cfg.eps * xisq / (1.0 + cfg.delta * xisq);
    double decay = std::exp(-rate * T);
    for (std::size_t j = 0; j < u0.values.size(); ++j)
      CHECK(traj.states.back().values[j] ==
            doctest::Approx(decay * u0.values[j]).epsilon(1e-9).scale(1.0));
  }

  SUBCASE("planar two-rock flux in 2D conserves mass and balances energy") {
    Grid g2(2, 1.5, 64);
    FluxModel tr = two_rock_flux(buckley_leverett(1.0, Interval{-0.5, 1.5}),
                                 1.0, 2.0, 0.0);
    auto flux = std::make_shared<MollifiedFlux>(
        mollify(planar_extension(tr, {0.8, 0.6}), 0.2, 0.05, g2.half_width));
    RealField u0 = RealField::sample(g2, [&](std::span<const double> x) {
      return 0.6 * std::exp(-4.0 * (x[0] * x[0] + x[1] * x[1]));
    });
    Trajectory traj = solve(u0, 0.02, cfg, flux);
    CHECK(traj.conservation_drift < 1e-12);
    CHECK(traj.mode_bound_worst <= 1e-12);
    EnergyReport report = verify_estimates(traj);
    CHECK(report.all_pass);
    CHECK(report.max_identity_residual < 1e-4);
    CHECK(report.divf_l1 > 0.0);
  }
}

TEST_CASE("per-mode Duhamel bound holds on recorded slabs") {
  Grid g(1, 2.0, 128);
  auto flux = std::make_shared<MollifiedFlux>(
      mollify(buckley_leverett(1.0, Interval{-0.5, 1.5}), 0.1, 0.05, g.half_width));
  SolverConfig cfg;
  cfg.eps = 0.05;
  cfg.delta = 0.0025;
  cfg.slab_dt = 1e-3;
  RealField u0 = gaussian(g, 0.8, 0.0, 0.4);
  Trajectory traj = solve(u0, 0.05, cfg, flux);
  CHECK(traj.mode_bound_worst <= 1e-12);
}
