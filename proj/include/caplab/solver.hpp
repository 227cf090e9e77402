#pragma once

#include <memory>
#include <vector>

#include "caplab/flux.hpp"
#include "caplab/grid.hpp"

namespace caplab {

struct SolverConfig {
  double eps = 0.05;    // diffusion coefficient, > 0
  double delta = 0.0;   // capillarity coefficient, >= 0
  double slab_dt = 1e-3;
  double picard_tol = 1e-10;
  int picard_max_iter = 64;
  int quadrature_substeps = 4;  // Gauss-Legendre nodes per slab
  bool dealias = true;          // 2/3-rule truncation of the flux transform
};

struct SlabStat {
  double t_begin = 0.0;
  double t_end = 0.0;
  int iterations = 0;
  double residual = 0.0;
  int bisections = 0;
};

// Time-stamped solution states at slab boundaries, with the time derivative
// evaluated from the closed-form mode relation dt u_hat = -A u_hat - B.
struct Trajectory {
  Grid grid;
  std::vector<double> times;
  std::vector<RealField> states;
  std::vector<RealField> time_derivatives;
  std::shared_ptr<const MollifiedFlux> flux;
  SolverConfig config;

  std::vector<SlabStat> slab_stats;
  double conservation_drift = 0.0;   // max |int u(t) - int u0|
  double boundary_mass_worst = 0.0;  // worst boundary-band |u| fraction
  bool boundary_flagged = false;     // band fraction exceeded 1e-6
  double window_margin_worst = 1.0;  // min distance of range(u) to the window
                                     // edge, relative to the window length
  bool window_margin_flagged = false;  // margin dipped below 10%
  double mode_bound_worst = 0.0;     // worst per-mode Duhamel bound violation

  explicit Trajectory(const Grid& g) : grid(g) {}
  std::size_t size() const { return times.size(); }
  const RealField& state(std::size_t k) const { return states[k]; }
};

// Node times {t_a, Gauss-Legendre nodes of (t_a, t_b)} used by the slab map.
std::vector<double> slab_node_times(const SolverConfig& cfg, double t_a, double t_b);

// One application of the slab map: given iterate samples v at the slab nodes,
// returns u = T(v) at the same nodes, where per mode
//   dt u_hat = -(eps |xi|^2 u_hat + i xi . f_hat(v)) / (1 + delta |xi|^2).
// Throws UnstableMode if a mode exceeds 1e8 x the initial scale.
std::vector<RealField> duhamel_linear_solve(const std::vector<RealField>& v_nodes,
                                            const RealField& u_a,
                                            const SolverConfig& cfg,
                                            const MollifiedFlux& flux, double t_a,
                                            double t_b);

// Picard iteration of the slab map from the constant-in-time extension of
// u_a; the slab is bisected when the a priori contraction bound
// (e^{dt} - 1) ||dlambda f_eps||_inf >= 1 fails, when residuals stop
// decreasing, or when the iteration cap is hit (up to 6 levels).
struct SlabResult {
  RealField end_state;
  SlabStat stat;
};
SlabResult picard_solve_slab(const RealField& u_a, const SolverConfig& cfg,
                             const MollifiedFlux& flux, double t_a, double t_b);

// March slabs to T_final, recording states and closed-form time derivatives
// at every slab boundary. Throws WindowEscape when the solution range leaves
// the flux lambda-window.
Trajectory solve(const RealField& u0, double T_final, const SolverConfig& cfg,
                 std::shared_ptr<const MollifiedFlux> flux);

struct StabilityReport {
  double sup_grad_l2 = 0.0;       // sup_t ||grad u(t)||_{L2}
  double dtu_l2_spacetime = 0.0;  // ||dt u||_{L2([0,T] x box)}
  std::vector<double> grad_component_l2;  // per axis, space-time L2
  // sqrt(T) ||dj u0|| + (1/eps) ||f_eps(.,u)||_{L2([0,T] x box)}; the exact
  // L1 bound of the Duhamel kernel replaces the unit-coefficient form valid
  // for eps = delta = 1.
  std::vector<double> grad_bound_rhs;
  // the unit-coefficient form sqrt(T) ||dj u0|| + T e^T ||f||, for reference
  std::vector<double> grad_bound_rhs_normalized;
  double flux_l2_spacetime = 0.0;
  bool grad_bound_ok = false;
};
StabilityReport stability_diagnostic(const Trajectory& traj);

}  // namespace caplab
