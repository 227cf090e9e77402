#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "caplab/grid.hpp"

namespace caplab {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool contains(const Interval& other) const {
    return other.lo >= lo && other.hi <= hi;
  }
};

// The standard even C_c^inf bump exp(-1/(1-s^2)) on (-1,1), scaled to unit
// integral. All helpers refer to the normalized kernel.
namespace bump {
double value(double s);
double derivative(double s);
double cdf(double s);  // integral from -1 to s
double sup();          // value(0)
double l1_norm_derivative();
double l1_norm_second_derivative();
}  // namespace bump

// Product mollifier omega_n(x, lambda) = n^{-d} w(x/n) * n^{-1} w(lambda/n),
// with w the normalized bump (per-axis product in d = 2).
struct Mollifier {
  double n = 1.0;
  int dim = 1;
  Mollifier(double width, int dim);  // throws NonPositiveWidth
  double value(std::span<const double> x, double lambda) const;
  double value_space(std::span<const double> x) const;  // n^{-d} w(x/n)
  double value_lambda(double lambda) const;             // n^{-1} w(lambda/n)
  double support_radius() const { return n; }
};

Mollifier mollifier(double n, int dim);

// Hyperplane jump of the flux: the component normal to the plane jumps by
// strength(lambda) across x[axis] = position.
struct JumpRecord {
  int axis = 0;
  double position = 0.0;
  double perm_jump = 0.0;  // jump of k(x) across the plane
  std::function<double(double)> strength;
};

// f(x, lambda) with the structural data of the flux conditions: lambda-window
// freeze, measure bound metadata (mu_mass, beta), and explicit jump records
// for the x-discontinuous part. Built-in models are separable,
// f_i(x, lambda) = k(x) * dir_i * g(lambda), with g evaluated on the clamped
// profile domain (so dlambda f vanishes outside it).
struct FluxModel {
  int dim = 1;
  Interval domain{0.0, 1.0};  // clamp range of the profile
  Interval window{0.0, 1.0};  // norm/monitor window, contains domain
  double mu_mass = 0.0;
  double beta = 1.0;
  double dlambda_bound = 0.0;  // analytic sup of |dlambda f|, set by factories
  std::string descriptor;  // config echo, used for run-consistency checks

  bool separable = true;
  std::vector<double> direction;                    // size dim
  std::function<double(double)> profile;            // g on the domain
  std::function<double(double)> profile_deriv;      // g' on the domain
  std::function<double(std::span<const double>)> permeability;  // k(x)
  double perm_left = 1.0;                           // k left of every jump
  std::vector<JumpRecord> jumps;                    // jumps of k * dir_a * g

  // General (non-separable) path, used by table fluxes.
  std::function<double(int, std::span<const double>, double)> eval_general;
  std::function<double(int, std::span<const double>, double)> dlambda_general;

  double clamp_lambda(double lam) const;
  double profile_clamped(double lam) const;
  double profile_deriv_clamped(double lam) const;  // 0 outside the domain
  double eval(int i, std::span<const double> x, double lam) const;
  double dlambda(int i, std::span<const double> x, double lam) const;
  // sup over box x window of max_i |dlambda f_i| (dense sample).
  double dlambda_sup(double box_half_width) const;
};

// f(S) = S^2 / (S^2 + A (1-S)^2) on [0,1], frozen constant outside. The
// declared window may be wider than [0,1] to give runs headroom; the profile
// stays clamped at the unit interval (a C^1 extension since f'(0)=f'(1)=0).
FluxModel buckley_leverett(double A);
FluxModel buckley_leverett(double A, Interval window);

// f(x, lambda) = k(x) * base(lambda) with piecewise-constant permeability
// jumping from k_left to k_right across x[0] = jump_at.
FluxModel two_rock_flux(const FluxModel& base, double k_left, double k_right,
                        double jump_at);

// f(lambda) = c * lambda on the domain, frozen outside.
FluxModel linear_flux(double c, Interval domain = {-8.0, 8.0});

// Planar extension of a 1D separable model to d = 2:
// f_i(x, lambda) = k(x_1) dir_i g(lambda), jumps stay on x_1 planes.
FluxModel planar_extension(const FluxModel& flux_1d, std::array<double, 2> direction);

FluxModel zero_flux(Interval window = {-8.0, 8.0});

// Columnar (x, lambda, f) table on a rectangular lattice, Catmull-Rom
// interpolated. 1D only.
FluxModel table_flux(const std::vector<double>& xs, const std::vector<double>& lambdas,
                     const std::vector<double>& f, Interval window);
FluxModel table_flux_from_file(const std::string& path, Interval window);

// Smooth flux f_eps = K_eps * (f star omega_n). The cutoff is identically one
// on the box provided the box x window fits inside B(0, 1/eps); mollify
// rejects the call otherwise. Cached norms are quadratures over box x window.
class MollifiedFlux {
 public:
  const FluxModel& base() const { return base_; }
  double width() const { return n_; }
  double cutoff_eps() const { return eps_; }
  double box_half_width() const { return box_L_; }
  int dim() const { return base_.dim; }
  Interval window() const { return base_.window; }
  Interval domain() const { return base_.domain; }

  double eval(int i, std::span<const double> x, double lam) const;
  double dlambda(int i, std::span<const double> x, double lam) const;
  double divx(std::span<const double> x, double lam) const;
  // Phi(x, u) = integral_0^u divx(x, lambda) dlambda, via jump records.
  double divx_antiderivative(std::span<const double> x, double u) const;

  bool separable() const { return base_.separable; }
  double profile(double lam) const;                 // g_n
  double profile_deriv(double lam) const;           // g_n'
  double profile_antiderivative(double lam) const;  // integral_0^lam g_n
  double perm(std::span<const double> x) const;     // k_n
  double perm_deriv(std::span<const double> x) const;  // d k_n / d x_axis

  double divf_l1() const { return divf_l1_; }
  double divf_l2_linf() const { return divf_l2_linf_; }
  double dlambda_inf() const { return dlambda_inf_; }
  double profile_sup() const { return profile_sup_; }
  double profile_deriv_sup() const { return profile_deriv_sup_; }

 private:
  friend MollifiedFlux mollify(const FluxModel&, double, double, double);
  MollifiedFlux() = default;
  void build_tables();
  void build_general_tables();
  void compute_norms();

  FluxModel base_;
  double n_ = 0.1;
  double eps_ = 0.1;
  double box_L_ = 1.0;

  // profile tables on a uniform lambda lattice (value + derivative pairs,
  // evaluated by cubic Hermite interpolation)
  double tab_lo_ = 0.0, tab_dl_ = 1.0;
  std::vector<double> g_tab_, dg_tab_, big_g_tab_;
  double g_left_ = 0.0, g_right_ = 0.0;  // frozen values beyond the table
  double big_g_zero_ = 0.0;

  // general-path tables (x, lambda lattice), dim 1 only
  std::vector<double> gen_f_, gen_df_, gen_divx_;
  int gen_nx_ = 0, gen_nl_ = 0;
  double gen_x0_ = 0, gen_dx_ = 1, gen_l0_ = 0, gen_dl_ = 1;

  double divf_l1_ = 0.0, divf_l2_linf_ = 0.0, dlambda_inf_ = 0.0;
  double profile_sup_ = 0.0, profile_deriv_sup_ = 0.0;
};

MollifiedFlux mollify(const FluxModel& base, double n, double eps,
                      double box_half_width);

// u0 star omega^(1)_n on the periodic grid (Fourier-side product with the
// kernel transform; exact while the kernel support fits in the box).
RealField mollify_field(const RealField& u0, double n);

struct NondegeneracyReport {
  double max_fraction = 0.0;
  std::vector<double> worst_x;
  std::array<double, 3> worst_xi{};
  double zero_tol = 1e-6;
  int lambda_points = 0;
  bool degenerate = false;
};

// For each (x, xi) pair, the fraction of the lambda grid where
// |xi_0 + sum_k F_k(x,lambda) xi_k| < zero_tol; degenerate when the worst
// fraction exceeds two grid cells.
NondegeneracyReport check_nondegeneracy(
    const FluxModel& flux, const std::vector<std::vector<double>>& x_samples,
    const std::vector<std::array<double, 3>>& xi_samples,
    const std::vector<double>& lambda_grid, double zero_tol = 1e-6);

// Uniform directions on S^d in R^{d+1}: 64 for d=1, 512 for d=2.
std::vector<std::array<double, 3>> default_sphere_samples(int dim);

}  // namespace caplab
