// caplab: spectral laboratory for the capillarity-regularized conservation
// law  dt u + div f(x,u) = eps Lap u + delta dt Lap u  with mollified
// heterogeneous fluxes. Subcommands: solve, reference, audit, kinetic,
// sweep, overshoot-scan.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "caplab/bench.hpp"
#include "caplab/config.hpp"
#include "caplab/energy.hpp"
#include "caplab/errors.hpp"
#include "caplab/kinetic.hpp"
#include "caplab/reference.hpp"
#include "caplab/solver.hpp"

using namespace caplab;
namespace fs = std::filesystem;

namespace {

int map_exit(const Error& e) {
  switch (e.code()) {
    case ErrorCode::IoError:
    case ErrorCode::ConfigError:
      return 4;
    case ErrorCode::ScheduleRejected:
      return 3;
    default:
      return 2;
  }
}

FluxSpec load_flux_spec(const std::string& path) {
  RunConfig wrapper = load_run_config(path);  // accepts {"flux": {...}} or flat
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  std::string text = ss.str();
  if (text.find("\"flux\"") == std::string::npos) {
    // flat flux object: wrap it
    RunConfig flat = run_config_from_json("{\"flux\":" + text + "}");
    return flat.flux;
  }
  return wrapper.flux;
}

struct SolveOptions {
  std::string config_path, flux_path, out_dir = "out";
  double eps = -1.0, delta = -1.0, n_moll = -1.0, box_L = -1.0, T = -1.0,
         slab_dt = -1.0;
  int grid_N = -1;
};

RunConfig assemble_run_config(const SolveOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) cfg = load_run_config(opt.config_path);
  if (!opt.flux_path.empty()) cfg.flux = load_flux_spec(opt.flux_path);
  if (opt.eps > 0.0) cfg.solver.eps = opt.eps;
  if (opt.delta >= 0.0) cfg.solver.delta = opt.delta;
  if (opt.n_moll > 0.0) cfg.n_moll = opt.n_moll;
  if (opt.box_L > 0.0) cfg.grid.box_half_width = opt.box_L;
  if (opt.grid_N > 0) cfg.grid.points = opt.grid_N;
  if (opt.T >= 0.0) cfg.T_final = opt.T;
  if (opt.slab_dt > 0.0) cfg.solver.slab_dt = opt.slab_dt;
  return cfg;
}

int cmd_solve(const SolveOptions& opt) {
  RunConfig cfg = assemble_run_config(opt);
  Grid grid = cfg.grid.make();
  FluxModel base = build_flux(cfg.flux);
  auto flux = std::make_shared<MollifiedFlux>(
      mollify(base, cfg.n_moll, cfg.cutoff_eps, grid.half_width));
  RealField u0 = build_initial(cfg.initial, grid);
  Trajectory traj = solve(u0, cfg.T_final, cfg.solver, flux);
  save_trajectory(traj, cfg, opt.out_dir);
  std::printf("solve: %zu states to t=%.6g written to %s\n", traj.size(),
              traj.times.back(), opt.out_dir.c_str());
  std::printf("solve: conservation drift %.3e, window margin %.3f%s\n",
              traj.conservation_drift, traj.window_margin_worst,
              traj.window_margin_flagged ? " (flagged)" : "");
  return 0;
}

int cmd_reference(const SolveOptions& opt, int cells, double cfl) {
  RunConfig cfg = assemble_run_config(opt);
  FluxModel base = build_flux(cfg.flux);
  double L = cfg.grid.box_half_width;
  double h = 2.0 * L / cfg.grid.points;
  auto f0 = initial_function(cfg.initial, L, 4.0 * h);
  FVState u0 = fv_sample(L, cells, f0);
  FVState uT = godunov_solve(u0, base, cfg.T_final, cfl);
  fs::create_directories(opt.out_dir);
  {
    std::ofstream os(opt.out_dir + "/reference_initial.dat");
    write_fv_snapshot(os, u0, 0.0);
  }
  {
    std::ofstream os(opt.out_dir + "/reference_final.dat");
    write_fv_snapshot(os, uT, cfg.T_final);
  }
  std::printf("reference: %d cells marched to t=%.6g, TV %.6g -> %.6g\n", cells,
              cfg.T_final, total_variation(u0), total_variation(uT));
  return 0;
}

int cmd_audit(const std::string& traj_dir, const std::string& out_path) {
  Trajectory traj = load_trajectory(traj_dir);
  EnergyReport report = verify_estimates(traj);
  if (out_path.empty()) {
    write_energy_report(std::cout, report);
  } else {
    std::ofstream os(out_path);
    require(os.good(), ErrorCode::IoError, "audit: cannot write " + out_path);
    write_energy_report(os, report);
    std::printf("audit: report written to %s\n", out_path.c_str());
  }
  std::printf("audit: pass=%d min_relative_slack=%.3e max_identity_residual=%.3e\n",
              report.all_pass ? 1 : 0, report.min_relative_slack,
              report.max_identity_residual);
  if (report.cetvrta_intermediate_only)
    std::printf("audit: note: %s\n", report.note.c_str());
  return report.all_pass ? 0 : 2;
}

int cmd_kinetic(const std::string& traj_dir, int lambda_points,
                const std::vector<double>& l_values, const std::string& out_dir) {
  Trajectory traj = load_trajectory(traj_dir);
  LambdaGrid range = LambdaGrid::cover(traj, lambda_points);
  double l_max = 0.0;
  for (double l : l_values) l_max = std::max(l_max, std::abs(l));
  LambdaGrid lam(std::min(range.lo, -1.05 * l_max), std::max(range.hi, 1.05 * l_max),
                 lambda_points);
  KineticCube cube = kinetic_function(traj, lam,
                                      std::max<std::size_t>(1, traj.size() / 16));
  DefectSummary defects = defect_bundle(traj, lam).summary();
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir + "/kinetic_summary.txt");
    os << "lambda_grid " << lam.lo << " " << lam.hi << " " << lam.count << "\n";
    os << "reconstruction_worst " << cube.reconstruction_worst << "\n";
    os << "gamma1_proxy " << defects.gamma1_proxy << "\n";
    os << "gamma2_proxy " << defects.gamma2_proxy << "\n";
    os << "gamma3_l1 " << defects.gamma3_l1 << "\n";
    os << "gamma4_l1 " << defects.gamma4_l1 << "\n";
    os << "gamma4_bound " << defects.gamma4_bound << "\n";
    os << "g3_l1 " << defects.g3_l1 << "\n";
    os << "bound_gamma1 " << defects.bound_gamma1 << "\n";
    os << "bound_gamma2 " << defects.bound_gamma2 << "\n";
  }
  {
    std::ofstream os(out_dir + "/truncation_identity.csv");
    os << "# caplab truncation csv v1\n";
    os << "l,max_abs_error,cell\n";
    char buf[96];
    for (double l : l_values) {
      double worst = 0.0;
      for (std::size_t ti = 0; ti < cube.times.size(); ++ti) {
        RealField lhs = truncation_from_cube(cube, ti, l);
        RealField rhs = truncation(traj.states[cube.traj_index[ti]], l);
        for (std::size_t j = 0; j < lhs.values.size(); ++j)
          worst = std::max(worst, std::abs(lhs.values[j] - rhs.values[j]));
      }
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", l, worst, lam.spacing());
      os << buf;
    }
  }
  std::printf("kinetic: cube %zu x %zu x %d, reconstruction defect %.3e\n",
              cube.times.size(), traj.grid.node_count(), lam.count,
              cube.reconstruction_worst);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int workers) {
  SweepSetup setup = load_sweep_setup(config_path);
  if (!out_dir.empty()) setup.out_dir = out_dir;
  setup.workers = workers;
  SweepResult result = run_sweep(setup);
  std::printf("sweep: regime %s (strongest %s), %zu runs, hash %s\n",
              result.schedule.regime.c_str(), result.verdict.strongest.c_str(),
              result.rows.size(), result.config_hash.c_str());
  bool all_energy = true;
  for (const SweepRow& row : result.rows) {
    std::printf("  eps=%-8g delta=%-10g n=%-8g l1=%-10g overshoot=%-10g energy=%d\n",
                row.eps, row.delta, row.n, row.l1_to_reference, row.overshoot,
                row.energy_pass ? 1 : 0);
    if (!row.energy_pass) all_energy = false;
  }
  if (!all_energy) return 2;
  return 0;
}

int cmd_overshoot(const std::string& config_path, const std::string& out_dir,
                  int workers) {
  OvershootScanSetup setup;
  if (!config_path.empty()) setup = load_overshoot_setup(config_path);
  if (!out_dir.empty()) setup.out_dir = out_dir;
  setup.workers = workers;
  OvershootScanResult result = run_overshoot_scan(setup);
  std::printf("overshoot-scan: best metric %.4f at tau=%g S_L=%g; classical final %.5f\n",
              result.best_metric, result.best_tau, result.best_s_left,
              result.classical_final_metric);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caplab: pseudo-spectral laboratory for a capillarity-regularized "
               "conservation law with discontinuous flux"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  int workers = 1;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "concurrent runs for sweeps");

  SolveOptions sopt;
  CLI::App* solve_cmd = app.add_subcommand("solve", "march the regularized equation");
  solve_cmd->add_option("--config", sopt.config_path, "run config JSON");
  solve_cmd->add_option("--flux", sopt.flux_path, "flux spec JSON");
  solve_cmd->add_option("--eps", sopt.eps, "diffusion coefficient");
  solve_cmd->add_option("--delta", sopt.delta, "capillarity coefficient");
  solve_cmd->add_option("--n-moll", sopt.n_moll, "mollification width");
  solve_cmd->add_option("--grid-N", sopt.grid_N, "points per axis");
  solve_cmd->add_option("--box-L", sopt.box_L, "box half width");
  solve_cmd->add_option("--T", sopt.T, "final time");
  solve_cmd->add_option("--slab-dt", sopt.slab_dt, "time slab length");

  int ref_cells = 4096;
  double ref_cfl = 0.45;
  CLI::App* ref_cmd = app.add_subcommand("reference", "entropy reference solve");
  ref_cmd->add_option("--config", sopt.config_path, "run config JSON");
  ref_cmd->add_option("--flux", sopt.flux_path, "flux spec JSON");
  ref_cmd->add_option("--T", sopt.T, "final time");
  ref_cmd->add_option("--box-L", sopt.box_L, "box half width");
  ref_cmd->add_option("--cells", ref_cells, "finite-volume cells");
  ref_cmd->add_option("--cfl", ref_cfl, "CFL number (<= 0.45)");

  std::string traj_dir, audit_out;
  CLI::App* audit_cmd = app.add_subcommand("audit", "energy estimates audit");
  audit_cmd->add_option("--traj", traj_dir, "trajectory directory")->required();
  audit_cmd->add_option("--report", audit_out, "report file (default stdout)");

  int lambda_points = 256;
  std::vector<double> l_values = {0.25, 0.5, 0.75};
  CLI::App* kin_cmd = app.add_subcommand("kinetic", "kinetic cube and defects");
  kin_cmd->add_option("--traj", traj_dir, "trajectory directory")->required();
  kin_cmd->add_option("--lambda-points", lambda_points, "lambda lattice size");
  kin_cmd->add_option("--l-values", l_values, "truncation levels");

  std::string sweep_config;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "epsilon sweep experiment");
  sweep_cmd->add_option("--config", sweep_config, "sweep setup JSON")->required();

  std::string scan_config;
  CLI::App* scan_cmd = app.add_subcommand("overshoot-scan",
                                          "capillarity overshoot dichotomy scan");
  scan_cmd->add_option("--config", scan_config, "scan setup JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) {
      sopt.out_dir = out_dir;
      return cmd_solve(sopt);
    }
    if (ref_cmd->parsed()) {
      sopt.out_dir = out_dir;
      return cmd_reference(sopt, ref_cells, ref_cfl);
    }
    if (audit_cmd->parsed()) return cmd_audit(traj_dir, audit_out);
    if (kin_cmd->parsed()) return cmd_kinetic(traj_dir, lambda_points, l_values, out_dir);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, out_dir, workers);
    if (scan_cmd->parsed()) return cmd_overshoot(scan_config, out_dir, workers);
  } catch (const Error& e) {
    std::fprintf(stderr, "caplab: error: %s\n", e.what());
    return map_exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "caplab: error: %s\n", e.what());
    return 2;
  }
  return 0;
}
