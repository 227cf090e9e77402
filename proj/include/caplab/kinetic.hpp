#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "caplab/solver.hpp"

namespace caplab {

// Uniform lambda lattice, endpoints included.
struct LambdaGrid {
  double lo = -1.0;
  double hi = 1.0;
  int count = 256;

  LambdaGrid(double lo_, double hi_, int count_);
  double spacing() const { return (hi - lo) / (count - 1); }
  double value(int m) const { return lo + m * spacing(); }
  double length() const { return hi - lo; }

  // Smallest grid covering the trajectory value range with the given
  // relative margin.
  static LambdaGrid cover(const Trajectory& traj, int count, double margin = 0.1);
};

// h(t, x, lambda) = sgn(u(t,x) - lambda) with sgn(0) := +1, on the selected
// trajectory times (every `time_stride`-th node, last node always included).
struct KineticCube {
  Grid xgrid;
  LambdaGrid lambda;
  std::vector<double> times;
  std::vector<std::size_t> traj_index;
  std::vector<std::int8_t> h;  // [time][x][lambda]
  double reconstruction_worst = 0.0;

  KineticCube(const Grid& g, const LambdaGrid& l) : xgrid(g), lambda(l) {}
  std::size_t index(std::size_t ti, std::size_t xi, int li) const {
    return (ti * xgrid.node_count() + xi) * lambda.count + li;
  }
  std::int8_t at(std::size_t ti, std::size_t xi, int li) const {
    return h[index(ti, xi, li)];
  }
};

// Builds the cube; throws RangeEscape when the margin invariant fails and
// InvariantViolation when the eta(u) = u^2 reconstruction identity is off by
// more than the one-cell quadrature bound.
KineticCube kinetic_function(const Trajectory& traj, const LambdaGrid& lambda,
                             int time_stride = 1);

// T_l(u): clamp to [-l, l].
RealField truncation(const RealField& u, double l);

// (1/2) int_{-l}^{l} h dlambda at one cube time, trapezoid on the lattice.
RealField truncation_from_cube(const KineticCube& cube, std::size_t ti, double l);

// int rho(lambda) h(t, x, lambda) dlambda for every cube time. rho must be
// supported inside the lambda grid (SupportEscape otherwise).
std::vector<RealField> velocity_average(const KineticCube& cube,
                                        const std::function<double(double)>& rho,
                                        Interval support);

struct DefectSummary {
  double eps = 0.0, delta = 0.0, n = 0.0;
  double gamma1_proxy = 0.0;   // 2 eps ||grad u||_{L2([0,T] x box)}
  double gamma2_proxy = 0.0;   // 2 delta ||grad dt u||_{L2([0,T] x box)}
  double gamma3_l1 = 0.0;      // |Lambda| 2 eps int int |grad u|^2
  double gamma4_l1 = 0.0;      // |Lambda| 2 delta int int |grad u . grad dt u|
  double gamma4_bound = 0.0;   // Cauchy-Schwarz majorant of gamma4_l1
  double g3_l1 = 0.0;          // || h (dlambda f - dlambda f_eps) ||_{L1}
  double bound_gamma1 = 0.0;   // sqrt(eps) (n^{-1} sqrt(delta) + 1)
  double bound_gamma2 = 0.0;   // composite schedule bound
};

// Closed-form bound columns.
double gamma1_theory(double eps, double delta, double n);
double gamma2_theory(double eps, double delta, double n, int dim);

// Gamma fields at one trajectory node (1D runs), flattened [x * count + li].
struct DefectSlice {
  std::vector<double> gamma1, gamma2, gamma3, gamma4, g3;
  std::vector<double> grad, grad_dt;  // |du/dx|, |d(dt u)/dx| at the nodes
};

class DefectBundle {
 public:
  DefectBundle(const Trajectory& traj, const LambdaGrid& lambda);
  const DefectSummary& summary() const { return summary_; }
  const LambdaGrid& lambda() const { return lambda_; }
  DefectSlice slice(std::size_t traj_node) const;

 private:
  const Trajectory& traj_;
  LambdaGrid lambda_;
  DefectSummary summary_;
};

DefectBundle defect_bundle(const Trajectory& traj, const LambdaGrid& lambda);

struct DecayTable {
  std::vector<DefectSummary> rows;  // ordered by decreasing eps
  bool gamma1_nonincreasing = true;
  bool gamma2_nonincreasing = true;
  double gamma3_ratio = 1.0;  // max/min across the sweep
  double gamma4_ratio = 1.0;
};

// Runs must share grid, flux family and data, and differ only in eps along
// the schedule (InconsistentRuns otherwise).
DecayTable defect_decay_study(const std::vector<const Trajectory*>& runs,
                              const LambdaGrid& lambda);

struct CompactnessReport {
  std::vector<double> pairwise_l1;  // consecutive L1 distances on the window
  std::vector<std::vector<double>> translation_moduli;  // [field][shift]
  std::vector<double> shift_sizes;                      // physical shifts
  bool cauchy = false;  // consecutive distances strictly decrease
};

CompactnessReport compactness_probe(const std::vector<RealField>& averages,
                                    double window_fraction = 0.8,
                                    const std::vector<int>& cell_shifts = {1, 2, 4});

}  // namespace caplab
