#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "caplab/errors.hpp"
#include "caplab/flux.hpp"
#include "caplab/quadrature.hpp"

using namespace caplab;

namespace {

double eval1(const FluxModel& f, double x, double lam) {
  double xs[1] = {x};
  return f.eval(0, std::span<const double>(xs, 1), lam);
}

double eval1(const MollifiedFlux& f, double x, double lam) {
  double xs[1] = {x};
  return f.eval(0, std::span<const double>(xs, 1), lam);
}

// L2 distance between mollified and base flux over box x window by lattice
// quadrature (the independent oracle for the refinement test).
double moll_error_l2(const FluxModel& base, const MollifiedFlux& moll, double L) {
  const int nx = 65, nl = 1025;
  const Interval win = base.window;
  double acc = 0.0;
  for (int ix = 0; ix < nx; ++ix) {
    double x = -L + 2.0 * L * ix / (nx - 1);
    double wx = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
    for (int il = 0; il < nl; ++il) {
      double lam = win.lo + win.length() * il / (nl - 1);
      double wl = (il == 0 || il == nl - 1) ? 0.5 : 1.0;
      double d = eval1(moll, x, lam) - eval1(base, x, lam);
      acc += wx * wl * d * d;
    }
  }
  return std::sqrt(acc * (2.0 * L / (nx - 1)) * (win.length() / (nl - 1)));
}

}  // namespace

TEST_CASE("buckley-leverett values") {
  FluxModel f1 = buckley_leverett(1.0);
  CHECK(eval1(f1, 0.0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval1(f1, 0.0, 0.0) == 0.0);
  CHECK(eval1(f1, 0.0, 1.0) == 1.0);
  FluxModel f2 = buckley_leverett(2.0);
  CHECK(eval1(f2, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(eval1(f2, 0.0, 0.0) == 0.0);
  CHECK(eval1(f2, 0.0, 1.0) == 1.0);
  CHECK_THROWS_AS(buckley_leverett(0.0), Error);
  CHECK_THROWS_AS(buckley_leverett(-2.0), Error);
}

TEST_CASE("frozen extension outside the profile domain") {
  FluxModel f = buckley_leverett(1.0, Interval{-0.5, 1.5});
  CHECK(eval1(f, 0.0, -0.3) == 0.0);
  CHECK(eval1(f, 0.0, 1.4) == 1.0);
  double xs[1] = {0.0};
  for (double lam : {-0.49, -0.01, 1.01, 1.49})
    CHECK(f.dlambda(0, std::span<const double>(xs, 1), lam) == 0.0);
}

TEST_CASE("two-rock flux") {
  FluxModel base = buckley_leverett(1.0);
  FluxModel same = two_rock_flux(base, 1.0, 1.0, 0.0);
  CHECK(same.jumps.size() == 1);
  CHECK(same.jumps[0].perm_jump == 0.0);
  for (double x : {-0.7, 0.3})
    for (double lam : {0.2, 0.5, 0.9})
      CHECK(eval1(same, x, lam) == doctest::Approx(eval1(base, 0.0, lam)));

  FluxModel tr = two_rock_flux(base, 1.0, 2.0, 0.0);
  CHECK(eval1(tr, -0.5, 0.5) == doctest::Approx(0.5));
  CHECK(eval1(tr, 0.5, 0.5) == doctest::Approx(1.0));
  CHECK(std::abs(tr.jumps[0].strength(1.0)) == doctest::Approx(1.0));
  CHECK(tr.mu_mass > 0.0);
  CHECK_THROWS_AS(two_rock_flux(base, 0.0, 1.0, 0.0), Error);
  CHECK_THROWS_AS(two_rock_flux(base, 1.0, -1.0, 0.0), Error);
}

TEST_CASE("mollifier unit mass and support scaling") {
  for (double n : {1.0, 0.1, 0.01}) {
    Mollifier m = mollifier(n, 1);
    CHECK(m.support_radius() == n);
    // tensor quadrature of the (x, lambda) kernel over its support
    const int cells = 2048;
    double hx = 2.0 * n / cells;
    double mass_x = 0.0, mass_l = 0.0;
    for (int i = 1; i < cells; ++i) {
      double s = -n + i * hx;
      double xv[1] = {s};
      mass_x += m.value_space(std::span<const double>(xv, 1)) * hx;
      mass_l += m.value_lambda(s) * hx;
    }
    CHECK(mass_x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mass_l == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mass_x * mass_l == doctest::Approx(1.0).epsilon(1e-12));
    // support is exactly n * (support of the unit bump)
    double xv[1] = {1.001 * n};
    CHECK(m.value_space(std::span<const double>(xv, 1)) == 0.0);
    xv[0] = 0.999 * n;
    CHECK(m.value_space(std::span<const double>(xv, 1)) > 0.0);
  }
  CHECK_THROWS_AS(mollifier(0.0, 1), Error);
  CHECK_THROWS_AS(mollifier(-0.2, 1), Error);
}

TEST_CASE("even kernel kills first moments; linear functions pass through") {
  double first_moment =
      gauss_integrate([](double s) { return s * bump::value(s); }, -1.0, 1.0, 64);
  CHECK(std::abs(first_moment) < 1e-14);
  // mollified linear flux equals the linear flux on the domain interior
  FluxModel lin = linear_flux(2.0, Interval{-4.0, 4.0});
  MollifiedFlux ml = mollify(lin, 0.25, 0.1, 2.0);
  for (double lam : {-3.0, -1.0, 0.0, 0.7, 3.0})
    CHECK(ml.profile(lam) == doctest::Approx(2.0 * lam).epsilon(1e-12));
  CHECK(ml.profile_antiderivative(1.5) == doctest::Approx(2.0 * 1.5 * 1.5 / 2.0).epsilon(1e-12));
  CHECK(ml.profile_deriv(0.5) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("mollify: refinement decreases L2 distance; cutoff precondition") {
  FluxModel base = buckley_leverett(1.0);
  double L = 2.0;
  double prev = 1e300;
  for (double n : {0.2, 0.1, 0.05}) {
    MollifiedFlux m = mollify(base, n, 0.1, L);
    double err = moll_error_l2(base, m, L);
    CHECK(err < prev);
    prev = err;
  }
  CHECK_THROWS_AS(mollify(base, 0.1, 1.0, 4.0), Error);
}

TEST_CASE("mollified two-rock: jump concentrates but L1 mass is stable") {
  FluxModel tr = two_rock_flux(buckley_leverett(1.0), 1.0, 2.0, 0.0);
  double L = 2.0;
  std::vector<double> l1s, l2s, dsups, widths;
  for (double n : {0.2, 0.1, 0.05}) {
    MollifiedFlux m = mollify(tr, n, 0.1, L);
    l1s.push_back(m.divf_l1());
    l2s.push_back(m.divf_l2_linf());
    dsups.push_back(m.dlambda_inf());
    widths.push_back(n);
    // div concentrates: sup of |divx| grows as n shrinks
    double xs[1] = {0.0};
    CHECK(m.divx(std::span<const double>(xs, 1), 0.9) > 0.0);
  }
  double lo = *std::min_element(l1s.begin(), l1s.end());
  double hi = *std::max_element(l1s.begin(), l1s.end());
  CHECK(hi / lo < 1.05);

  // paper-scaling ceilings: sup-norm bound with C from the base flux data
  double supg_deriv = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    double lam = i / 1000.0;
    double xs[1] = {0.0};
    supg_deriv = std::max(supg_deriv, std::abs(tr.dlambda(0, std::span<const double>(xs, 1), lam)) / 1.0);
  }
  // integral over the box of sup_lambda |dlambda f| = int k(x) dx * sup g'
  double int_k = 1.0 * L + 2.0 * L;  // k=1 on [-L,0), k=2 on [0,L)
  double c_paper = int_k * 2.0 * std::pow(bump::sup(), 2.0);  // sup g' = 2 for A=1
  for (std::size_t i = 0; i < widths.size(); ++i) {
    double n = widths[i];
    CHECK(dsups[i] * n * n <= c_paper * (1.0 + 1e-9));
    // mollification cannot raise the sup of the lambda derivative
    CHECK(dsups[i] <= 2.0 * 2.0 * (1.0 + 1e-9));
  }
  // || div f_eps ||_{L2, Linf} * n^{d/2+1} stays bounded
  double w_l2 = std::sqrt(
      gauss_integrate([](double s) { double v = bump::value(s); return v * v; }, -1.0,
                      1.0, 64));
  double ceiling = 1.0 * 1.0 * w_l2 * std::sqrt(0.2) * 1.01;  // |dk| sup_g ||w||_2 sqrt(n_max)
  for (std::size_t i = 0; i < widths.size(); ++i)
    CHECK(l2s[i] * std::pow(widths[i], 1.5) <= ceiling);
}

TEST_CASE("smoothed permeability profile") {
  FluxModel tr = two_rock_flux(buckley_leverett(1.0), 1.0, 2.0, 0.25);
  MollifiedFlux m = mollify(tr, 0.1, 0.1, 2.0);
  double xs[1] = {0.25 - 0.2};
  CHECK(m.perm(std::span<const double>(xs, 1)) == doctest::Approx(1.0));
  xs[0] = 0.25 + 0.2;
  CHECK(m.perm(std::span<const double>(xs, 1)) == doctest::Approx(2.0));
  xs[0] = 0.25;
  CHECK(m.perm(std::span<const double>(xs, 1)) == doctest::Approx(1.5).epsilon(1e-12));
  double prev = 0.0;
  for (int i = 0; i <= 40; ++i) {
    xs[0] = 0.25 - 0.15 + 0.3 * i / 40.0;
    double k = m.perm(std::span<const double>(xs, 1));
    CHECK(k >= prev - 1e-13);
    prev = k;
  }
}

TEST_CASE("profile antiderivative matches direct quadrature") {
  FluxModel base = buckley_leverett(1.0, Interval{-0.5, 1.5});
  MollifiedFlux m = mollify(base, 0.1, 0.1, 2.0);
  for (double u : {-0.4, 0.3, 0.8, 1.2}) {
    // composite rule; the profile is interpolated, so the blind oracle is
    // accurate to ~1e-9 across cell boundaries
    double direct = 0.0;
    int panels = 512;
    for (int p = 0; p < panels; ++p) {
      double a = u * p / panels, b = u * (p + 1) / panels;
      direct += gauss_integrate([&](double lam) { return m.profile(lam); }, a, b, 8);
    }
    CHECK(m.profile_antiderivative(u) ==
          doctest::Approx(direct).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("non-degeneracy verdicts") {
  std::vector<double> lambdas;
  for (int i = 0; i < 10000; ++i) lambdas.push_back(i / 9999.0);
  std::vector<std::vector<double>> xs = {{0.0}};

  // linear flux with the aligned direction: the symbol vanishes identically
  FluxModel lin = linear_flux(1.0, Interval{-2.0, 2.0});
  double r = 1.0 / std::sqrt(2.0);
  NondegeneracyReport bad = check_nondegeneracy(lin, xs, {{-r, r, 0.0}}, lambdas);
  CHECK(bad.degenerate);
  CHECK(bad.max_fraction == doctest::Approx(1.0));

  // Buckley-Leverett is non-degenerate on the default direction set
  FluxModel bl = buckley_leverett(1.0);
  NondegeneracyReport good =
      check_nondegeneracy(bl, xs, default_sphere_samples(1), lambdas, 1e-6);
  CHECK_FALSE(good.degenerate);

  // zero flux: the map is xi_0, identically zero at xi_0 = 0
  FluxModel zf = zero_flux();
  NondegeneracyReport zero =
      check_nondegeneracy(zf, xs, default_sphere_samples(1), lambdas, 1e-6);
  CHECK(zero.degenerate);

  CHECK_THROWS_AS(check_nondegeneracy(bl, {}, default_sphere_samples(1), lambdas), Error);
}

TEST_CASE("mollify_field smooths and contracts") {
  Grid g(1, 2.0, 256);
  RealField u = RealField::sample(g, [](std::span<const double> x) {
    return std::exp(-8.0 * x[0] * x[0]);
  });
  RealField un = mollify_field(u, 0.1);
  CHECK(l2_norm(un) <= l2_norm(u) * (1.0 + 1e-12));
  // Young: n ||grad u_n|| <= ||u|| * ||w'||_L1
  CHECK(0.1 * l2_norm_gradient(un) <= l2_norm(u) * bump::l1_norm_derivative() * (1.0 + 1e-9));
  double mid = std::abs(un.values[128] - u.values[128]);
  CHECK(mid < 0.05);
}

TEST_CASE("table flux interpolates and mollifies") {
  std::vector<double> xs, ls, vals;
  for (int i = 0; i <= 16; ++i) xs.push_back(-2.0 + 4.0 * i / 16.0);
  for (int j = 0; j <= 32; ++j) ls.push_back(j / 32.0);
  for (double x : xs)
    for (double lam : ls) vals.push_back((2.0 + std::tanh(x)) * lam * lam);
  FluxModel tf = table_flux(xs, ls, vals, Interval{0.0, 1.0});
  CHECK(eval1(tf, 0.5, 0.5) ==
        doctest::Approx((2.0 + std::tanh(0.5)) * 0.25).epsilon(1e-3));
  MollifiedFlux m = mollify(tf, 0.1, 0.2, 2.0);
  CHECK(eval1(m, 0.5, 0.5) ==
        doctest::Approx((2.0 + std::tanh(0.5)) * 0.25).epsilon(5e-2));
  CHECK(m.divf_l1() > 0.0);
}
