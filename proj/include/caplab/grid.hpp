#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace caplab {

using cdouble = std::complex<double>;

// Periodic grid on the box [-L, L)^dim with N nodes per axis, N a power of
// two. Node j sits at x_j = -L + j*h with h = 2L/N. The discrete wavenumbers
// are xi_k = pi*k/L for k in {-N/2, ..., N/2 - 1} per axis.
struct Grid {
  int dim = 1;
  double half_width = 1.0;  // L
  int points_per_axis = 8;  // N

  Grid(int dim_, double half_width_, int points_per_axis_);

  double spacing() const { return 2.0 * half_width / points_per_axis; }
  std::size_t node_count() const;
  double cell_volume() const;  // h^dim
  double box_volume() const;   // (2L)^dim

  double coord(int j) const { return -half_width + j * spacing(); }
  // Storage index (FFT order, 0..N-1) to signed mode in [-N/2, N/2).
  int signed_mode(int storage) const {
    return storage < points_per_axis / 2 ? storage : storage - points_per_axis;
  }
  double wavenumber(int signed_k) const;

  // Flattened index helpers; x1 is the slow axis for dim == 2.
  std::size_t index(int j0) const { return static_cast<std::size_t>(j0); }
  std::size_t index(int j0, int j1) const {
    return static_cast<std::size_t>(j0) * points_per_axis + j1;
  }

  bool operator==(const Grid&) const = default;
};

// Point samples u(x_j), one per node.
struct RealField {
  Grid grid;
  std::vector<double> values;

  explicit RealField(const Grid& g, double fill = 0.0);

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // Sample a function of the node coordinates.
  static RealField sample(const Grid& g,
                          const std::function<double(std::span<const double>)>& f);
  bool all_finite() const;
  double min_value() const;
  double max_value() const;
};

// Discrete Fourier coefficients u_hat(xi_k), normalized so that forward
// transform of the constant c has u_hat(0) = c*(2L)^dim (the quadrature of
// the integral transform over the box). Storage order per axis is FFT order.
struct SpectralField {
  Grid grid;
  std::vector<cdouble> coeff;

  explicit SpectralField(const Grid& g);

  cdouble& operator[](std::size_t i) { return coeff[i]; }
  cdouble operator[](std::size_t i) const { return coeff[i]; }
};

// u_hat(xi_k) = h^dim sum_j u_j exp(-i xi_k . x_j). Exact for trigonometric
// polynomials resolved by the grid.
SpectralField forward_transform(const RealField& f);

// u_j = (2L)^{-dim} sum_k u_hat(xi_k) exp(i xi_k . x_j); exact inverse of
// forward_transform to rounding. Throws SymmetryViolation when the
// reconstruction has relative imaginary residue above 1e-8.
RealField inverse_transform(const SpectralField& F);

// Pointwise multiplication of coefficients by s(xi).
SpectralField apply_symbol(
    const SpectralField& F,
    const std::function<cdouble(std::span<const double>)>& symbol);

// Spectral derivative along one axis (i*xi_axis symbol; the unmatched
// Nyquist mode is zeroed so real fields stay real).
SpectralField derivative(const SpectralField& F, int axis);
RealField gradient_component(const RealField& f, int axis);
SpectralField laplacian(const SpectralField& F);

// Quadrature norm (h^dim sum f_j^2)^{1/2}.
double l2_norm(const RealField& f);
// Plancherel norm ((2L)^{-dim} sum |u_hat|^2)^{1/2}; equals the physical one.
double l2_norm(const SpectralField& F);
// ||grad u|| via Plancherel on the derivative symbols.
double l2_norm_gradient(const SpectralField& F);
double l2_norm_gradient(const RealField& f);
// Frobenius norm of all second derivatives, (sum_{i,j} ||didj u||^2)^{1/2}.
double l2_norm_second(const SpectralField& F);
double inner_product(const RealField& a, const RealField& b);

// h^dim sum_j f_j  (box integral; equals u_hat(0)).
double integral(const RealField& f);

// Fraction of |u|-mass in the outermost `band` portion of the box per side
// (boundary-influence monitor for the periodic realization).
double boundary_mass_fraction(const RealField& f, double band = 0.1);

// Columnar snapshot: header "# dim L N t", one row per node "x1 [x2] u",
// fields printed with %.17g. Row order is node order (x1 slow for dim 2).
void write_snapshot(std::ostream& os, const RealField& f, double t);
void write_snapshot(const std::string& path, const RealField& f, double t);
RealField read_snapshot(std::istream& is, double* t_out = nullptr);
RealField read_snapshot(const std::string& path, double* t_out = nullptr);

}  // namespace caplab
