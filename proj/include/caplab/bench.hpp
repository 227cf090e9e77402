#pragma once

#include <string>
#include <vector>

#include "caplab/config.hpp"
#include "caplab/kinetic.hpp"
#include "caplab/reference.hpp"

namespace caplab {

// delta = c_delta eps^a, n = c_n eps^b along a decreasing epsilon list.
struct ScalingSchedule {
  double a = 3.0;
  double b = 0.125;
  double c_delta = 1.0;
  double c_n = 1.0;
  int dim = 1;
  std::vector<double> epsilons;
  std::string regime = "i";  // i | ii | iii | custom

  double delta_of(double eps) const;
  double n_of(double eps) const;
};

struct ScheduleVerdict {
  bool regime_i = false;
  bool regime_ii = false;
  bool regime_iii = false;
  std::string strongest = "none";  // iii beats i beats ii
  bool requires_bounded_dlambda = false;  // set when only regime ii applies
  bool accepted = false;                  // the requested regime is satisfied
  std::string violation;                  // named inequality when rejected
};

ScheduleVerdict validate_schedule(const ScalingSchedule& schedule);

struct SweepRow {
  double eps = 0.0, delta = 0.0, n = 0.0;
  double l1_to_reference = -1.0;  // negative when no reference comparison ran
  double overshoot = -1.0;        // negative when not a Riemann-type run
  bool energy_pass = false;
  double energy_min_slack = 0.0;
  double identity_max_residual = 0.0;
  bool cond_pass = false;
  double cond_lhs = 0.0;
  DefectSummary defects;
  long picard_total_iterations = 0;
  double picard_worst_residual = 0.0;
  int bisections = 0;
  bool window_flag = false;
  bool boundary_flag = false;
};

struct SweepResult {
  ScalingSchedule schedule;
  ScheduleVerdict verdict;
  std::vector<SweepRow> rows;
  std::string config_hash;
  bool l1_nonincreasing = true;  // reference distances along decreasing eps
};

struct SweepSetup {
  ScalingSchedule schedule;
  GridSpec grid;
  FluxSpec flux;
  InitSpec initial;
  SolverConfig solver;  // eps/delta replaced per run
  double T_final = 0.25;
  RefSpec reference;
  bool compare_reference = true;
  int lambda_points = 256;
  int workers = 1;
  std::string out_dir;  // empty disables persistence
  int snapshot_stride = 25;
};

std::string to_json(const SweepSetup& setup);
SweepSetup sweep_setup_from_json(const std::string& text);
SweepSetup load_sweep_setup(const std::string& path);

// Runs the schedule: per epsilon mollify the flux at n(eps), mollify the
// data, solve, audit, probe, and compare against the entropy reference.
// Rows completed before a failure are persisted when out_dir is set.
SweepResult run_sweep(const SweepSetup& setup);

// max(0, max_x u - S_L): the non-classical signature on Riemann data.
double overshoot_metric(const RealField& u, double s_left);
double overshoot_metric(const FVState& u, double s_left);

// Deterministic columnar outputs: sweep.csv (one row per epsilon, schema
// versioned in the header) plus a timestamped manifest.
void emit_report(const SweepResult& result, const std::string& out_dir);

struct OvershootScanSetup {
  GridSpec grid;
  double A = 1.0;
  std::vector<double> taus = {1.0, 2.0, 5.0, 10.0};
  std::vector<double> s_lefts = {0.6, 0.75, 0.9};
  double s_right = 0.0;
  double eps = 0.05;                                // capillary phase
  std::vector<double> classical_eps = {0.1, 0.05, 0.025};  // delta = eps^3 phase
  double T_final = 1.0;
  SolverConfig solver;
  Interval window{-0.5, 1.5};
  int workers = 1;
  std::string out_dir;
};

std::string to_json(const OvershootScanSetup& setup);
OvershootScanSetup overshoot_setup_from_json(const std::string& text);
OvershootScanSetup load_overshoot_setup(const std::string& path);

struct OvershootRow {
  std::string phase;  // "capillary" or "classical"
  double tau = 0.0;
  double s_left = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double metric = 0.0;
};

struct OvershootScanResult {
  std::vector<OvershootRow> rows;
  double best_metric = 0.0;  // largest capillary-phase overshoot
  double best_tau = 0.0;
  double best_s_left = 0.0;
  double classical_final_metric = 0.0;  // smallest-eps classical metric
};

// Scans delta = tau eps^2 over (tau, S_L), then reruns the best S_L with
// delta = eps^3 along the classical list.
OvershootScanResult run_overshoot_scan(const OvershootScanSetup& setup);
void emit_report(const OvershootScanResult& result, const std::string& out_dir);

}  // namespace caplab
