#include "caplab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "caplab/errors.hpp"
#include "caplab/quadrature.hpp"

namespace caplab {

FVState fv_sample(double L, int cells, const std::function<double(double)>& f) {
  require(cells >= 4, ErrorCode::ConfigError, "fv_sample: need at least 4 cells");
  FVState out(L, cells);
  const GaussRule& rule = gauss_legendre(4);
  for (int m = 0; m < cells; ++m) {
    double a = -L + m * out.dx();
    double mid = a + 0.5 * out.dx(), half = 0.5 * out.dx();
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
      acc += rule.weights[q] * f(mid + half * rule.nodes[q]);
    out.values[m] = 0.5 * acc;
  }
  return out;
}

namespace {

enum class Monotonicity { Increasing, Decreasing, General };

Monotonicity classify(const FluxModel& flux) {
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i <= 512; ++i) {
    double lam = flux.domain.lo + flux.domain.length() * i / 512.0;
    double d = flux.profile_deriv(lam);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (lo >= -1e-12) return Monotonicity::Increasing;
  if (hi <= 1e-12) return Monotonicity::Decreasing;
  return Monotonicity::General;
}

// Godunov flux for a single flux function phi: min over [a,b] when a <= b,
// max over [b,a] otherwise. Exact at the endpoints for monotone profiles;
// sampled over 65 interior points otherwise.
double godunov_flux(const std::function<double(double)>& phi, double a, double b,
                    Monotonicity mono) {
  if (mono == Monotonicity::Increasing) return phi(a);
  if (mono == Monotonicity::Decreasing) return phi(b);
  double lo = std::min(a, b), hi = std::max(a, b);
  double best = phi(a <= b ? lo : hi);
  for (int i = 0; i <= 64; ++i) {
    double s = lo + (hi - lo) * i / 64.0;
    double v = phi(s);
    best = a <= b ? std::min(best, v) : std::max(best, v);
  }
  return best;
}

}  // namespace

FVState godunov_solve(const FVState& u0, const FluxModel& flux, double T_final,
                      double cfl, const std::function<void(const FVState&)>& observer) {
  require(flux.dim == 1, ErrorCode::ConfigError, "godunov_solve: flux must be 1D");
  require(flux.separable, ErrorCode::ConfigError,
          "godunov_solve: general fluxes are not supported");
  require(cfl > 0.0 && cfl <= 0.45, ErrorCode::CFLViolation,
          "godunov_solve: CFL must lie in (0, 0.45]");
  const double fuzz = 1e-12 * std::max(1.0, flux.window.length());
  for (double v : u0.values)
    require(v >= flux.window.lo - fuzz && v <= flux.window.hi + fuzz,
            ErrorCode::WindowEscape, "godunov_solve: data leaves the lambda window");

  const int M = u0.cells();
  const double dx = u0.dx();
  Monotonicity mono = classify(flux);

  // cell permeabilities and interface pairing (adjacent-side evaluation)
  std::vector<double> k(M);
  for (int m = 0; m < M; ++m) {
    double x[1] = {u0.cell_center(m)};
    k[m] = flux.permeability(std::span<const double>(x, 1));
  }
  double kmax = 0.0;
  for (double v : k) kmax = std::max(kmax, std::abs(v));
  double max_speed = kmax * 0.0;
  for (int i = 0; i <= 512; ++i) {
    double lam = flux.domain.lo + flux.domain.length() * i / 512.0;
    max_speed = std::max(max_speed, kmax * std::abs(flux.profile_deriv(lam)));
  }
  require(max_speed > 0.0 || T_final == 0.0, ErrorCode::ConfigError,
          "godunov_solve: flux has no characteristic speed");

  FVState u = u0;
  double t = 0.0;
  std::vector<double> fluxes(M);
  auto g = [&flux](double s) { return flux.profile_clamped(s); };
  while (t < T_final - 1e-14) {
    double dt = std::min(cfl * dx / max_speed, T_final - t);
    for (int m = 0; m < M; ++m) {
      int mr = (m + 1) % M;
      double a = u.values[m], b = u.values[mr];
      if (k[m] == k[mr]) {
        fluxes[m] = k[m] * godunov_flux(g, a, b, mono);
      } else {
        // permeability jump at the interface: upwind with the adjacent side
        if (mono == Monotonicity::Increasing)
          fluxes[m] = k[m] * g(a);
        else if (mono == Monotonicity::Decreasing)
          fluxes[m] = k[mr] * g(b);
        else
          fail(ErrorCode::ConfigError,
               "godunov_solve: two-rock coupling needs a monotone profile");
      }
    }
    for (int m = 0; m < M; ++m) {
      int ml = (m + M - 1) % M;
      u.values[m] -= dt / dx * (fluxes[m] - fluxes[ml]);
    }
    t += dt;
    u.time = t;
    if (observer) observer(u);
  }
  return u;
}

double rankine_hugoniot_speed(const FluxModel& flux, double s_left, double s_right) {
  require(flux.jumps.empty() && flux.separable, ErrorCode::ConfigError,
          "rankine_hugoniot_speed: flux must be homogeneous");
  require(s_left != s_right, ErrorCode::EqualStates,
          "rankine_hugoniot_speed: equal states");
  double x[1] = {0.0};
  std::span<const double> xs(x, 1);
  return (flux.eval(0, xs, s_left) - flux.eval(0, xs, s_right)) / (s_left - s_right);
}

double RiemannSolution::eval(double xi) const {
  if (waves.empty()) return s_left;
  if (xi < waves.front().speed_lo) return s_left;
  if (xi >= waves.back().speed_hi) return s_right;
  for (const Wave& w : waves) {
    if (xi < w.speed_lo) return w.left_state;
    if (xi < w.speed_hi || (w.type == Wave::Type::Shock && xi < w.speed_hi + 1e-300)) {
      if (w.type == Wave::Type::Shock) return w.right_state;
      // rarefaction fan lookup
      double pos = (xi - fan_lo) / (fan_hi - fan_lo) * (fan_values.size() - 1);
      pos = std::clamp(pos, 0.0, static_cast<double>(fan_values.size() - 1));
      int i = std::min(static_cast<int>(pos), static_cast<int>(fan_values.size()) - 2);
      double u = pos - i;
      return (1.0 - u) * fan_values[i] + u * fan_values[i + 1];
    }
  }
  return s_right;
}

RiemannSolution bl_riemann_exact(double A, double s_left, double s_right) {
  require(A > 0.0, ErrorCode::NonPositiveA, "bl_riemann_exact: A must be positive");
  require(s_left >= 0.0 && s_left <= 1.0 && s_right >= 0.0 && s_right <= 1.0,
          ErrorCode::ConfigError, "bl_riemann_exact: states must lie in [0,1]");
  require(s_left >= s_right, ErrorCode::ConfigError,
          "bl_riemann_exact: expected s_left >= s_right");
  RiemannSolution sol;
  sol.s_left = s_left;
  sol.s_right = s_right;
  if (s_left == s_right) return sol;  // constant solution, empty wave list

  auto g = [A](double s) {
    double d = s * s + A * (1.0 - s) * (1.0 - s);
    return s * s / d;
  };
  auto dg = [A](double s) {
    double d = s * s + A * (1.0 - s) * (1.0 - s);
    return 2.0 * A * s * (1.0 - s) / (d * d);
  };
  auto chord = [&](double s) { return (g(s) - g(s_right)) / (s - s_right); };
  // tangency function: zero where the chord from (s_right, g(s_right))
  // touches the graph
  auto phi = [&](double s) { return dg(s) - chord(s); };

  // bracket a sign change on (s_right, 1]
  const int scan = 4096;
  double s_star = -1.0;
  double prev_s = s_right + (1.0 - s_right) * 1e-6;
  double prev_phi = phi(prev_s);
  for (int i = 1; i <= scan; ++i) {
    double s = s_right + (1.0 - s_right) * (1e-6 + (1.0 - 1e-6) * i / scan);
    double cur = phi(s);
    if (prev_phi > 0.0 && cur <= 0.0) {
      double lo = prev_s, hi = s;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (phi(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
        if (hi - lo < 1e-15) break;
      }
      s_star = 0.5 * (lo + hi);
      break;
    }
    prev_s = s;
    prev_phi = cur;
  }

  bool had_positive = prev_phi > 0.0 || s_star > 0.0;
  if (s_star < 0.0 && had_positive)
    fail(ErrorCode::NoTangency, "bl_riemann_exact: no tangency point found");

  auto add_shock = [&](double sl, double sr) {
    Wave w;
    w.type = Wave::Type::Shock;
    w.left_state = sl;
    w.right_state = sr;
    w.speed_lo = w.speed_hi = (g(sl) - g(sr)) / (sl - sr);
    sol.waves.push_back(w);
  };
  auto add_rarefaction = [&](double sl, double sr) {
    Wave w;
    w.type = Wave::Type::Rarefaction;
    w.left_state = sl;
    w.right_state = sr;
    w.speed_lo = dg(sl);
    w.speed_hi = dg(sr);
    sol.waves.push_back(w);
    // fan table: invert dg on [sr, sl] (dg decreasing in s there)
    sol.fan_lo = w.speed_lo;
    sol.fan_hi = w.speed_hi;
    sol.fan_values.resize(1024);
    for (int i = 0; i < 1024; ++i) {
      double xi = sol.fan_lo + (sol.fan_hi - sol.fan_lo) * i / 1023.0;
      double lo = sr, hi = sl;  // dg(hi) = speed_lo <= xi <= speed_hi = dg(lo)
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (dg(mid) > xi)
          lo = mid;
        else
          hi = mid;
      }
      sol.fan_values[i] = 0.5 * (lo + hi);
    }
  };

  if (s_star < 0.0) {
    // no tangency anywhere: the flux is concave over the range, pure fan
    add_rarefaction(s_left, s_right);
  } else if (s_star >= s_left) {
    add_shock(s_left, s_right);
  } else {
    sol.tangency_state = s_star;
    sol.tangency_residual = std::abs(dg(s_star) - chord(s_star));
    add_rarefaction(s_left, s_star);
    add_shock(s_star, s_right);
  }
  for (std::size_t i = 0; i + 1 < sol.waves.size(); ++i)
    require(sol.waves[i].speed_hi <= sol.waves[i + 1].speed_lo + 1e-12,
            ErrorCode::InvariantViolation, "bl_riemann_exact: waves out of order");
  return sol;
}

namespace {

struct PiecewiseConstant {
  std::vector<double> edges;   // size n+1, increasing
  std::vector<double> values;  // size n
};

PiecewiseConstant view(const FVState& u) {
  PiecewiseConstant pc;
  const int M = u.cells();
  pc.edges.resize(M + 1);
  for (int m = 0; m <= M; ++m) pc.edges[m] = -u.half_width + m * u.dx();
  pc.values = u.values;
  return pc;
}

PiecewiseConstant view(const RealField& f) {
  require(f.grid.dim == 1, ErrorCode::ConfigError, "l1_distance: 1D fields expected");
  PiecewiseConstant pc;
  const int N = f.grid.points_per_axis;
  const double h = f.grid.spacing();
  pc.edges.resize(N + 1);
  for (int j = 0; j <= N; ++j) pc.edges[j] = f.grid.coord(j) - 0.5 * h;
  pc.values = f.values;
  return pc;
}

double pc_l1(const PiecewiseConstant& a, const PiecewiseConstant& b, double lo,
             double hi) {
  // merged sweep over both partitions restricted to [lo, hi]
  std::size_t ia = 0, ib = 0;
  double x = lo, acc = 0.0;
  auto value_at = [](const PiecewiseConstant& p, std::size_t& i, double xq) {
    while (i + 1 < p.values.size() && p.edges[i + 1] <= xq + 1e-300) ++i;
    return p.values[i];
  };
  // advance the cursors to lo
  while (ia + 1 < a.values.size() && a.edges[ia + 1] <= lo) ++ia;
  while (ib + 1 < b.values.size() && b.edges[ib + 1] <= lo) ++ib;
  while (x < hi - 1e-14) {
    double next = hi;
    if (ia + 1 < a.values.size()) next = std::min(next, std::max(a.edges[ia + 1], x));
    if (ib + 1 < b.values.size()) next = std::min(next, std::max(b.edges[ib + 1], x));
    if (next <= x) next = hi;
    double mid = 0.5 * (x + next);
    acc += std::abs(value_at(a, ia, mid) - value_at(b, ib, mid)) * (next - x);
    x = next;
    if (ia + 1 < a.values.size() && a.edges[ia + 1] <= x + 1e-14) ++ia;
    if (ib + 1 < b.values.size() && b.edges[ib + 1] <= x + 1e-14) ++ib;
  }
  return acc;
}

double window_l1(const PiecewiseConstant& a, const PiecewiseConstant& b, double L,
                 double window_fraction) {
  double cut = window_fraction * L;
  return pc_l1(a, b, -cut, cut);
}

}  // namespace

double l1_distance(const FVState& a, const FVState& b, double window_fraction) {
  require(a.half_width == b.half_width, ErrorCode::BoxMismatch, "l1_distance: box mismatch");
  return window_l1(view(a), view(b), a.half_width, window_fraction);
}

double l1_distance(const RealField& a, const FVState& b, double window_fraction) {
  require(a.grid.half_width == b.half_width, ErrorCode::BoxMismatch,
          "l1_distance: box mismatch");
  return window_l1(view(a), view(b), b.half_width, window_fraction);
}

double l1_distance(const RealField& a, const RealField& b, double window_fraction) {
  require(a.grid.half_width == b.grid.half_width, ErrorCode::BoxMismatch,
          "l1_distance: box mismatch");
  return window_l1(view(a), view(b), a.grid.half_width, window_fraction);
}

FVState riemann_to_fv(const RiemannSolution& sol, double L, int cells, double t) {
  require(t > 0.0, ErrorCode::ConfigError, "riemann_to_fv: need t > 0");
  return fv_sample(L, cells, [&](double x) { return sol.eval(x / t); });
}

double total_variation(const FVState& u) {
  double tv = 0.0;
  for (int m = 0; m < u.cells(); ++m)
    tv += std::abs(u.values[(m + 1) % u.cells()] - u.values[m]);
  return tv;
}

void write_fv_snapshot(std::ostream& os, const FVState& u, double t) {
  char line[160];
  std::snprintf(line, sizeof line, "# 1 %.17g %d %.17g\n", u.half_width, u.cells(), t);
  os << line;
  for (int m = 0; m < u.cells(); ++m) {
    std::snprintf(line, sizeof line, "%.17g %.17g\n", u.cell_center(m), u.values[m]);
    os << line;
  }
}

}  // namespace caplab
