#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "caplab/flux.hpp"

namespace caplab {

// Cell averages on the box [-L, L), cell m = [-L + m dx, -L + (m+1) dx).
struct FVState {
  double half_width = 1.0;
  std::vector<double> values;
  double time = 0.0;

  FVState(double L, int cells) : half_width(L), values(cells, 0.0) {}
  int cells() const { return static_cast<int>(values.size()); }
  double dx() const { return 2.0 * half_width / cells(); }
  double cell_center(int m) const { return -half_width + (m + 0.5) * dx(); }
};

// Cell averages of a pointwise function (4-node Gauss rule per cell).
FVState fv_sample(double L, int cells, const std::function<double(double)>& f);

// First-order Godunov march to T_final with exact scalar interface fluxes
// (min/max formula; upwind across permeability jumps, using the
// adjacent-side values). The optional observer sees every accepted step.
FVState godunov_solve(const FVState& u0, const FluxModel& flux, double T_final,
                      double cfl = 0.45,
                      const std::function<void(const FVState&)>& observer = {});

// c = (f(S_L) - f(S_R)) / (S_L - S_R) for a homogeneous flux.
double rankine_hugoniot_speed(const FluxModel& flux, double s_left, double s_right);

struct Wave {
  enum class Type { Shock, Rarefaction };
  Type type = Type::Shock;
  double left_state = 0.0;
  double right_state = 0.0;
  double speed_lo = 0.0;  // = speed_hi for shocks
  double speed_hi = 0.0;
};

// Self-similar entropy solution of the Buckley-Leverett Riemann problem for
// S_L > S_R (composite rarefaction + tangent shock when the flux is
// S-shaped over the data range).
class RiemannSolution {
 public:
  double s_left = 0.0, s_right = 0.0;
  std::vector<Wave> waves;  // speeds nondecreasing left to right
  double tangency_state = -1.0;  // S*, or < 0 when no tangent shock occurs
  double tangency_residual = 0.0;

  double eval(double xi) const;  // xi = x / t

 private:
  friend RiemannSolution bl_riemann_exact(double A, double s_left, double s_right);
  // rarefaction fan cache: values on a uniform xi lattice
  std::vector<double> fan_values;
  double fan_lo = 0.0, fan_hi = 0.0;
};

RiemannSolution bl_riemann_exact(double A, double s_left, double s_right);

// L1 distance over the central window (default 80% of the box), computed on
// the merged piecewise-constant partitions; spectral samples are read as
// cell values centered at the nodes.
double l1_distance(const FVState& a, const FVState& b, double window_fraction = 0.8);
double l1_distance(const RealField& a, const FVState& b, double window_fraction = 0.8);
double l1_distance(const RealField& a, const RealField& b, double window_fraction = 0.8);

// Evaluate a Riemann solution as cell averages at time t (jump at x = 0).
FVState riemann_to_fv(const RiemannSolution& sol, double L, int cells, double t);

double total_variation(const FVState& u);

// Snapshot in the grid dump format (header "# 1 L M t", rows "x u").
void write_fv_snapshot(std::ostream& os, const FVState& u, double t);

}  // namespace caplab
