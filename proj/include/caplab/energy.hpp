#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "caplab/solver.hpp"

namespace caplab {

// Estimate indices in the report arrays.
enum EstimateIndex {
  kEstimateL2 = 0,        // ||u(t)|| bound
  kEstimateDissipation,   // sqrt(2 eps) ||grad u||_{L2 L2} bound
  kEstimateGradient,      // sqrt(delta) ||grad u(t)|| bound
  kEstimateSecond,        // eps delta ||grad d_i u||^2_{L2 L2} bound
  kEstimateTimeGradient,  // delta ||grad dt u||_{L2 L2} bound
};

struct EnergyRow {
  double t = 0.0;
  double u_l2 = 0.0;
  double grad_l2 = 0.0;
  double cum_dissipation = 0.0;  // 2 eps int_0^t ||grad u||^2 ds
  double delta_grad_sq = 0.0;    // delta sum_j ||dj u(t)||^2
  double cum_flux_work = 0.0;    // 2 int_0^t int phi(x,u) dx ds
  double identity_lhs = 0.0;
  double identity_rhs = 0.0;
  double identity_residual = 0.0;
  std::array<double, 5> lhs{};
  std::array<double, 5> rhs{};
  std::array<double, 5> slack{};
  std::array<bool, 5> pass{};
};

struct EnergyReport {
  std::vector<EnergyRow> rows;
  double divf_l1 = 0.0;
  double divf_l2_linf = 0.0;
  double dlambda_inf = 0.0;
  bool all_pass = true;
  double min_relative_slack = 1e300;
  double max_identity_residual = 0.0;
  // the stated fourth estimate failed but its pre-bound measured form held
  bool cetvrta_intermediate_only = false;
  std::string note;
};

// Relative residual of the integrated energy balance
//   ||u(t)||^2 + 2 eps int ||grad u||^2 + delta sum ||dj u(t)||^2
//     = ||u0||^2 + delta sum ||dj u0||^2 - 2 int int phi
// at every recorded node. phi(x,u) is the lambda integral of div_x f_eps,
// assembled from the flux jump records.
std::vector<double> energy_identity_residual(const Trajectory& traj);

// Evaluate the five a priori inequalities at every node; slack is RHS - LHS
// with tolerance 1e-6 relative (absolute floor 1e-12).
EnergyReport verify_estimates(const Trajectory& traj);

// ||u0|| + n ||grad u0|| + n^2 ||D^2 u0|| <= C0 (second derivatives via
// spectral symbols).
bool verify_initial_condition(const RealField& u0_eps, double n, double C0,
                              double* lhs_out = nullptr);

// Columnar report (t, per-estimate lhs/rhs/slack/pass) plus a one-line
// machine-readable verdict.
void write_energy_report(std::ostream& os, const EnergyReport& report);

}  // namespace caplab
