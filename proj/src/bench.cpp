#include "caplab/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "caplab/energy.hpp"
#include "caplab/errors.hpp"

namespace caplab {

namespace fs = std::filesystem;
using nlohmann::json;

double ScalingSchedule::delta_of(double eps) const { return c_delta * std::pow(eps, a); }
double ScalingSchedule::n_of(double eps) const { return c_n * std::pow(eps, b); }

ScheduleVerdict validate_schedule(const ScalingSchedule& s) {
  ScheduleVerdict v;
  const double d = s.dim;
  const double exp_i = 0.5 * s.a - 1.0 - s.b * (d + 2.0);
  const double exp_ii = 0.5 * s.a - 0.5 - s.b * (0.5 * d + 2.0);
  v.regime_i = s.a > 2.0 && exp_i > 0.0;
  v.regime_ii = s.a >= 2.0 && exp_ii > 0.0;
  v.regime_iii = s.a > 2.0 && exp_ii > 0.0;
  if (v.regime_iii)
    v.strongest = "iii";
  else if (v.regime_i)
    v.strongest = "i";
  else if (v.regime_ii)
    v.strongest = "ii";
  v.requires_bounded_dlambda = v.strongest == "ii";

  auto describe = [&](const char* name, bool a_ok, const char* a_req, double expn,
                      const char* expn_name) {
    std::ostringstream os;
    if (!a_ok)
      os << name << " requires " << a_req << " (got a=" << s.a << ")";
    else
      os << name << " requires " << expn_name << " > 0 (got " << expn << ")";
    return os.str();
  };
  if (s.regime == "custom") {
    v.accepted = true;
  } else if (s.regime == "i") {
    v.accepted = v.regime_i;
    if (!v.accepted)
      v.violation = describe("regime i", s.a > 2.0, "a > 2", exp_i,
                             "a/2 - 1 - b(d+2)");
  } else if (s.regime == "ii") {
    v.accepted = v.regime_ii;
    if (!v.accepted)
      v.violation = describe("regime ii", s.a >= 2.0, "a >= 2", exp_ii,
                             "a/2 - 1/2 - b(d/2+2)");
  } else if (s.regime == "iii") {
    v.accepted = v.regime_iii;
    if (!v.accepted)
      v.violation = describe("regime iii", s.a > 2.0, "a > 2", exp_ii,
                             "a/2 - 1/2 - b(d/2+2)");
  } else {
    v.accepted = false;
    v.violation = "unknown regime '" + s.regime + "'";
  }
  return v;
}

double overshoot_metric(const RealField& u, double s_left) {
  return std::max(0.0, u.max_value() - s_left);
}

double overshoot_metric(const FVState& u, double s_left) {
  double m = -1e300;
  for (double v : u.values) m = std::max(m, v);
  return std::max(0.0, m - s_left);
}

namespace {

std::string format_eps(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

SweepRow run_single(const SweepSetup& setup, double eps) {
  const ScalingSchedule& sched = setup.schedule;
  SweepRow row;
  row.eps = eps;
  row.delta = sched.delta_of(eps);
  row.n = sched.n_of(eps);

  Grid grid = setup.grid.make();
  FluxModel base = build_flux(setup.flux);
  if (setup.schedule.regime == "ii") {
    double measured = base.dlambda_sup(grid.half_width);
    require(measured <= base.dlambda_bound * (1.0 + 1e-6), ErrorCode::ScheduleRejected,
            "regime ii requires a bounded lambda-derivative of the flux");
  }
  auto moll = std::make_shared<MollifiedFlux>(
      mollify(base, row.n, eps, grid.half_width));

  RealField u0_raw = build_initial(setup.initial, grid);
  RealField u0 = mollify_field(u0_raw, row.n);
  double c0 = l2_norm(u0_raw) * (1.0 + bump::l1_norm_derivative() +
                                 bump::l1_norm_second_derivative());
  row.cond_pass = verify_initial_condition(u0, row.n, c0, &row.cond_lhs);

  SolverConfig scfg = setup.solver;
  scfg.eps = eps;
  scfg.delta = row.delta;
  Trajectory traj = solve(u0, setup.T_final, scfg, moll);
  for (const SlabStat& s : traj.slab_stats) {
    row.picard_total_iterations += s.iterations;
    row.picard_worst_residual = std::max(row.picard_worst_residual, s.residual);
    row.bisections += s.bisections;
  }
  row.window_flag = traj.window_margin_flagged;
  row.boundary_flag = traj.boundary_flagged;

  EnergyReport energy = verify_estimates(traj);
  row.energy_pass = energy.all_pass;
  row.energy_min_slack = energy.min_relative_slack;
  row.identity_max_residual = energy.max_identity_residual;

  LambdaGrid lam(moll->window().lo, moll->window().hi, setup.lambda_points);
  row.defects = defect_bundle(traj, lam).summary();

  if (setup.compare_reference) {
    auto f0 = initial_function(setup.initial, grid.half_width, 4.0 * grid.spacing());
    FVState v0 = fv_sample(grid.half_width, setup.reference.cells, f0);
    FVState vT = godunov_solve(v0, base, setup.T_final, setup.reference.cfl);
    row.l1_to_reference = l1_distance(traj.states.back(), vT);
  }
  if (setup.initial.kind == "riemann")
    row.overshoot = overshoot_metric(traj.states.back(), setup.initial.s_left);

  if (!setup.out_dir.empty()) {
    std::string dir = setup.out_dir + "/run_eps_" + format_eps(eps);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::IoError, "sweep: cannot create " + dir);
    for (std::size_t k = 0; k < traj.size();
         k += static_cast<std::size_t>(std::max(1, setup.snapshot_stride)))
      write_snapshot(dir + "/state_" + std::to_string(k) + ".dat", traj.states[k],
                     traj.times[k]);
    write_snapshot(dir + "/state_final.dat", traj.states.back(), traj.times.back());
    std::ofstream er(dir + "/energy_report.txt");
    write_energy_report(er, energy);
  }
  return row;
}

const char* kSweepCsvHeader =
    "eps,delta,n,l1_to_reference,overshoot,energy_pass,energy_min_slack,"
    "identity_max_residual,cond_pass,cond_lhs,gamma1_proxy,gamma2_proxy,"
    "gamma3_l1,gamma4_l1,gamma4_bound,g3_l1,bound_gamma1,bound_gamma2,"
    "picard_iterations,picard_worst_residual,bisections,window_flag,"
    "boundary_flag";

void write_row_csv(std::ostream& os, const SweepRow& r) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  num(r.eps);
  os << ",";
  num(r.delta);
  os << ",";
  num(r.n);
  os << ",";
  num(r.l1_to_reference);
  os << ",";
  num(r.overshoot);
  os << "," << (r.energy_pass ? 1 : 0) << ",";
  num(r.energy_min_slack);
  os << ",";
  num(r.identity_max_residual);
  os << "," << (r.cond_pass ? 1 : 0) << ",";
  num(r.cond_lhs);
  os << ",";
  num(r.defects.gamma1_proxy);
  os << ",";
  num(r.defects.gamma2_proxy);
  os << ",";
  num(r.defects.gamma3_l1);
  os << ",";
  num(r.defects.gamma4_l1);
  os << ",";
  num(r.defects.gamma4_bound);
  os << ",";
  num(r.defects.g3_l1);
  os << ",";
  num(r.defects.bound_gamma1);
  os << ",";
  num(r.defects.bound_gamma2);
  os << "," << r.picard_total_iterations << ",";
  num(r.picard_worst_residual);
  os << "," << r.bisections << "," << (r.window_flag ? 1 : 0) << ","
     << (r.boundary_flag ? 1 : 0) << "\n";
}

json setup_to_json(const SweepSetup& setup) {
  json j;
  j["schedule"] = {{"a", setup.schedule.a},
                   {"b", setup.schedule.b},
                   {"c_delta", setup.schedule.c_delta},
                   {"c_n", setup.schedule.c_n},
                   {"dim", setup.schedule.dim},
                   {"epsilons", setup.schedule.epsilons},
                   {"regime", setup.schedule.regime}};
  RunConfig rc;
  rc.grid = setup.grid;
  rc.flux = setup.flux;
  rc.initial = setup.initial;
  rc.solver = setup.solver;
  rc.T_final = setup.T_final;
  j["run"] = json::parse(to_json(rc));
  j["reference"] = {{"cells", setup.reference.cells}, {"cfl", setup.reference.cfl}};
  j["compare_reference"] = setup.compare_reference;
  j["lambda_points"] = setup.lambda_points;
  j["snapshot_stride"] = setup.snapshot_stride;
  return j;
}

}  // namespace

std::string to_json(const SweepSetup& setup) { return setup_to_json(setup).dump(2); }

SweepSetup sweep_setup_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("sweep config: bad JSON: ") + e.what());
  }
  SweepSetup setup;
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    if (s.contains("a")) setup.schedule.a = s.at("a").get<double>();
    if (s.contains("b")) setup.schedule.b = s.at("b").get<double>();
    if (s.contains("c_delta")) setup.schedule.c_delta = s.at("c_delta").get<double>();
    if (s.contains("c_n")) setup.schedule.c_n = s.at("c_n").get<double>();
    if (s.contains("dim")) setup.schedule.dim = s.at("dim").get<int>();
    if (s.contains("epsilons"))
      setup.schedule.epsilons = s.at("epsilons").get<std::vector<double>>();
    if (s.contains("regime")) setup.schedule.regime = s.at("regime").get<std::string>();
  }
  if (j.contains("run")) {
    RunConfig rc = run_config_from_json(j.at("run").dump());
    setup.grid = rc.grid;
    setup.flux = rc.flux;
    setup.initial = rc.initial;
    setup.solver = rc.solver;
    setup.T_final = rc.T_final;
  }
  if (j.contains("reference")) {
    const json& r = j.at("reference");
    if (r.contains("cells")) setup.reference.cells = r.at("cells").get<int>();
    if (r.contains("cfl")) setup.reference.cfl = r.at("cfl").get<double>();
  }
  if (j.contains("compare_reference"))
    setup.compare_reference = j.at("compare_reference").get<bool>();
  if (j.contains("lambda_points"))
    setup.lambda_points = j.at("lambda_points").get<int>();
  if (j.contains("snapshot_stride"))
    setup.snapshot_stride = j.at("snapshot_stride").get<int>();
  return setup;
}

SweepSetup load_sweep_setup(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::IoError, "sweep config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return sweep_setup_from_json(ss.str());
}

SweepResult run_sweep(const SweepSetup& setup) {
  require(!setup.schedule.epsilons.empty(), ErrorCode::ConfigError,
          "sweep: empty epsilon list");
  for (std::size_t i = 1; i < setup.schedule.epsilons.size(); ++i)
    require(setup.schedule.epsilons[i] < setup.schedule.epsilons[i - 1],
            ErrorCode::ConfigError, "sweep: epsilons must decrease");
  SweepResult result;
  result.schedule = setup.schedule;
  result.verdict = validate_schedule(setup.schedule);
  result.config_hash = fnv1a_hex(to_json(setup));
  if (!result.verdict.accepted)
    fail(ErrorCode::ScheduleRejected, "sweep: schedule rejected: " + result.verdict.violation);

  std::ofstream partial;
  if (!setup.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(setup.out_dir, ec);
    require(!ec, ErrorCode::IoError, "sweep: cannot create " + setup.out_dir);
    partial.open(setup.out_dir + "/rows_partial.csv");
    partial << "# caplab sweep csv v1\n" << kSweepCsvHeader << "\n";
  }

  const int workers = std::max(1, setup.workers);
  const std::size_t n = setup.schedule.epsilons.size();
  std::vector<std::future<SweepRow>> futures(n);
  std::size_t launched = 0;
  auto launch_upto = [&](std::size_t hi) {
    for (; launched < hi; ++launched) {
      double eps = setup.schedule.epsilons[launched];
      futures[launched] = std::async(std::launch::async,
                                     [&setup, eps] { return run_single(setup, eps); });
    }
  };
  launch_upto(std::min<std::size_t>(workers, n));
  for (std::size_t k = 0; k < n; ++k) {
    SweepRow row;
    try {
      row = futures[k].get();
    } catch (...) {
      // rows completed so far are already persisted; wait for stragglers
      for (std::size_t j = k + 1; j < launched; ++j)
        if (futures[j].valid()) {
          try {
            futures[j].get();
          } catch (...) {
          }
        }
      throw;
    }
    launch_upto(std::min<std::size_t>(launched + 1, n));
    result.rows.push_back(row);
    if (partial.is_open()) {
      write_row_csv(partial, row);
      partial.flush();
    }
  }
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (result.rows[i].l1_to_reference >= 0.0 &&
        result.rows[i].l1_to_reference > result.rows[i - 1].l1_to_reference)
      result.l1_nonincreasing = false;
  }
  if (!setup.out_dir.empty()) emit_report(result, setup.out_dir);
  return result;
}

void emit_report(const SweepResult& result, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::IoError, "emit_report: cannot create " + out_dir);
  {
    std::ofstream csv(out_dir + "/sweep.csv");
    require(csv.good(), ErrorCode::IoError, "emit_report: cannot write sweep.csv");
    csv << "# caplab sweep csv v1\n" << kSweepCsvHeader << "\n";
    for (const SweepRow& row : result.rows) write_row_csv(csv, row);
  }
  json manifest;
  manifest["config_hash"] = result.config_hash;
  manifest["regime"] = result.schedule.regime;
  manifest["strongest_regime"] = result.verdict.strongest;
  manifest["l1_nonincreasing"] = result.l1_nonincreasing;
  manifest["rows"] = result.rows.size();
  auto now = std::chrono::system_clock::now().time_since_epoch();
  manifest["timestamp_ns"] =
      std::chrono::duration_cast<std::chrono::nanoseconds>(now).count();
  std::ofstream ms(out_dir + "/manifest.json");
  ms << manifest.dump(2) << "\n";
}

namespace {

json overshoot_to_json(const OvershootScanSetup& setup) {
  json j;
  j["grid"] = {{"dim", setup.grid.dim},
               {"L", setup.grid.box_half_width},
               {"N", setup.grid.points}};
  j["A"] = setup.A;
  j["taus"] = setup.taus;
  j["s_lefts"] = setup.s_lefts;
  j["s_right"] = setup.s_right;
  j["eps"] = setup.eps;
  j["classical_eps"] = setup.classical_eps;
  j["T"] = setup.T_final;
  j["window"] = {setup.window.lo, setup.window.hi};
  j["solver"] = {{"slab_dt", setup.solver.slab_dt},
                 {"picard_tol", setup.solver.picard_tol},
                 {"picard_max_iter", setup.solver.picard_max_iter},
                 {"quadrature_substeps", setup.solver.quadrature_substeps}};
  return j;
}

}  // namespace

std::string to_json(const OvershootScanSetup& setup) {
  return overshoot_to_json(setup).dump(2);
}

OvershootScanSetup overshoot_setup_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("overshoot config: bad JSON: ") + e.what());
  }
  OvershootScanSetup setup;
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("dim")) setup.grid.dim = g.at("dim").get<int>();
    if (g.contains("L")) setup.grid.box_half_width = g.at("L").get<double>();
    if (g.contains("N")) setup.grid.points = g.at("N").get<int>();
  }
  if (j.contains("A")) setup.A = j.at("A").get<double>();
  if (j.contains("taus")) setup.taus = j.at("taus").get<std::vector<double>>();
  if (j.contains("s_lefts")) setup.s_lefts = j.at("s_lefts").get<std::vector<double>>();
  if (j.contains("s_right")) setup.s_right = j.at("s_right").get<double>();
  if (j.contains("eps")) setup.eps = j.at("eps").get<double>();
  if (j.contains("classical_eps"))
    setup.classical_eps = j.at("classical_eps").get<std::vector<double>>();
  if (j.contains("T")) setup.T_final = j.at("T").get<double>();
  if (j.contains("window")) {
    setup.window.lo = j.at("window").at(0).get<double>();
    setup.window.hi = j.at("window").at(1).get<double>();
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    if (s.contains("slab_dt")) setup.solver.slab_dt = s.at("slab_dt").get<double>();
    if (s.contains("picard_tol"))
      setup.solver.picard_tol = s.at("picard_tol").get<double>();
    if (s.contains("picard_max_iter"))
      setup.solver.picard_max_iter = s.at("picard_max_iter").get<int>();
    if (s.contains("quadrature_substeps"))
      setup.solver.quadrature_substeps = s.at("quadrature_substeps").get<int>();
  }
  return setup;
}

OvershootScanSetup load_overshoot_setup(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::IoError, "overshoot config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return overshoot_setup_from_json(ss.str());
}

OvershootScanResult run_overshoot_scan(const OvershootScanSetup& setup) {
  Grid grid = setup.grid.make();
  FluxModel base = buckley_leverett(setup.A, setup.window);

  auto run_one = [&](double eps, double delta, double s_left) {
    auto moll = std::make_shared<MollifiedFlux>(
        mollify(base, 0.1, eps, grid.half_width));
    InitSpec init;
    init.kind = "riemann";
    init.s_left = s_left;
    init.s_right = setup.s_right;
    RealField u0 = build_initial(init, grid);
    SolverConfig cfg = setup.solver;
    cfg.eps = eps;
    cfg.delta = delta;
    Trajectory traj = solve(u0, setup.T_final, cfg, moll);
    return overshoot_metric(traj.states.back(), s_left);
  };

  OvershootScanResult result;
  struct Job {
    double tau, s_left;
  };
  std::vector<Job> jobs;
  for (double tau : setup.taus)
    for (double sl : setup.s_lefts) jobs.push_back({tau, sl});

  const int workers = std::max(1, setup.workers);
  for (std::size_t start = 0; start < jobs.size();
       start += static_cast<std::size_t>(workers)) {
    std::size_t stop = std::min(jobs.size(), start + workers);
    std::vector<std::future<double>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      double delta = jobs[i].tau * setup.eps * setup.eps;
      batch.push_back(std::async(std::launch::async, run_one, setup.eps, delta,
                                 jobs[i].s_left));
    }
    for (std::size_t i = start; i < stop; ++i) {
      OvershootRow row;
      row.phase = "capillary";
      row.tau = jobs[i].tau;
      row.s_left = jobs[i].s_left;
      row.eps = setup.eps;
      row.delta = row.tau * setup.eps * setup.eps;
      row.metric = batch[i - start].get();
      result.rows.push_back(row);
      if (row.metric > result.best_metric) {
        result.best_metric = row.metric;
        result.best_tau = row.tau;
        result.best_s_left = row.s_left;
      }
    }
  }

  double s_left = result.best_metric > 0.0 ? result.best_s_left : setup.s_lefts.front();
  double smallest = 1e300;
  for (double eps : setup.classical_eps) {
    OvershootRow row;
    row.phase = "classical";
    row.tau = 0.0;
    row.s_left = s_left;
    row.eps = eps;
    row.delta = eps * eps * eps;
    row.metric = run_one(eps, row.delta, s_left);
    result.rows.push_back(row);
    if (eps < smallest) {
      smallest = eps;
      result.classical_final_metric = row.metric;
    }
  }
  if (!setup.out_dir.empty()) emit_report(result, setup.out_dir);
  return result;
}

void emit_report(const OvershootScanResult& result, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::IoError, "emit_report: cannot create " + out_dir);
  std::ofstream csv(out_dir + "/overshoot.csv");
  require(csv.good(), ErrorCode::IoError, "emit_report: cannot write overshoot.csv");
  csv << "# caplab overshoot csv v1\n";
  csv << "phase,tau,s_left,eps,delta,metric\n";
  char buf[64];
  for (const OvershootRow& row : result.rows) {
    csv << row.phase;
    for (double v : {row.tau, row.s_left, row.eps, row.delta, row.metric}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      csv << buf;
    }
    csv << "\n";
  }
}

}  // namespace caplab
