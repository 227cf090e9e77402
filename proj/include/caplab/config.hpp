#pragma once

#include <functional>
#include <string>
#include <vector>

#include "caplab/flux.hpp"
#include "caplab/grid.hpp"
#include "caplab/solver.hpp"

namespace caplab {

struct GridSpec {
  int dim = 1;
  double box_half_width = 2.0;
  int points = 256;
  Grid make() const { return Grid(dim, box_half_width, points); }
};

struct FluxSpec {
  std::string kind = "buckley_leverett";  // buckley_leverett|two_rock|linear|table
  double A = 1.0;
  double k_left = 1.0, k_right = 2.0;
  double jump_at = 0.0;
  double c = 1.0;  // linear slope
  bool has_window = false;
  Interval window{0.0, 1.0};
  std::string table_path;
};

FluxModel build_flux(const FluxSpec& spec);

struct InitSpec {
  std::string kind = "gaussian";  // constant|gaussian|cosine|riemann
  double value = 0.0;             // constant
  double amplitude = 0.8, center = 0.0, sigma = 0.5;  // gaussian
  int mode = 1;                                       // cosine
  double s_left = 1.0, s_right = 0.0;                 // riemann
  double jump_at = 0.0;
  double upstep_frac = 0.75;  // periodic up-step at -frac * L
  double width = 0.0;         // riemann smoothing width; 0 selects 4h
};

// Pointwise initial profile; `default_width` replaces a zero riemann width.
std::function<double(double)> initial_function(const InitSpec& spec, double L,
                                               double default_width);
RealField build_initial(const InitSpec& spec, const Grid& grid);

struct RefSpec {
  int cells = 4096;
  double cfl = 0.45;
};

// One solve: grid + flux + data + solver coefficients + mollification.
struct RunConfig {
  GridSpec grid;
  FluxSpec flux;
  InitSpec initial;
  SolverConfig solver;
  double n_moll = 0.1;
  double cutoff_eps = 0.05;  // K_eps scale; box x window must fit in B(0, 1/eps)
  double T_final = 0.25;
  int snapshot_stride = 1;
};

std::string to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string fnv1a_hex(const std::string& data);

// Trajectory persistence: states and time derivatives in the grid snapshot
// format plus a manifest carrying the configuration echo.
void save_trajectory(const Trajectory& traj, const RunConfig& cfg,
                     const std::string& dir);
Trajectory load_trajectory(const std::string& dir, RunConfig* cfg_out = nullptr);

}  // namespace caplab
