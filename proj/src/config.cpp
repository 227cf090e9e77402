#include "caplab/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "caplab/errors.hpp"

namespace caplab {

namespace fs = std::filesystem;
using nlohmann::json;

FluxModel build_flux(const FluxSpec& spec) {
  if (spec.kind == "buckley_leverett") {
    return spec.has_window ? buckley_leverett(spec.A, spec.window)
                           : buckley_leverett(spec.A);
  }
  if (spec.kind == "two_rock") {
    FluxModel base = spec.has_window ? buckley_leverett(spec.A, spec.window)
                                     : buckley_leverett(spec.A);
    return two_rock_flux(base, spec.k_left, spec.k_right, spec.jump_at);
  }
  if (spec.kind == "linear") {
    return spec.has_window ? linear_flux(spec.c, spec.window) : linear_flux(spec.c);
  }
  if (spec.kind == "table") {
    require(spec.has_window, ErrorCode::ConfigError,
            "flux: table fluxes need an explicit lambda window");
    return table_flux_from_file(spec.table_path, spec.window);
  }
  fail(ErrorCode::ConfigError, "flux: unknown kind '" + spec.kind + "'");
}

std::function<double(double)> initial_function(const InitSpec& spec, double L,
                                               double default_width) {
  if (spec.kind == "constant") {
    double v = spec.value;
    return [v](double) { return v; };
  }
  if (spec.kind == "gaussian") {
    double a = spec.amplitude, c = spec.center, s = spec.sigma;
    require(s > 0.0, ErrorCode::ConfigError, "initial: gaussian needs sigma > 0");
    return [a, c, s](double x) {
      double r = (x - c) / s;
      return a * std::exp(-0.5 * r * r);
    };
  }
  if (spec.kind == "cosine") {
    double a = spec.amplitude;
    double w = M_PI * spec.mode / L;
    return [a, w](double x) { return a * std::cos(w * x); };
  }
  if (spec.kind == "riemann") {
    double w = spec.width > 0.0 ? spec.width : default_width;
    require(w > 0.0, ErrorCode::ConfigError, "initial: riemann needs a positive width");
    double sl = spec.s_left, sr = spec.s_right;
    double down_at = spec.jump_at;
    double up_at = -spec.upstep_frac * L;
    return [=](double x) {
      double up = 0.5 * (1.0 + std::tanh((x - up_at) / w));
      double down = 0.5 * (1.0 - std::tanh((x - down_at) / w));
      return sr + (sl - sr) * up * down;
    };
  }
  fail(ErrorCode::ConfigError, "initial: unknown kind '" + spec.kind + "'");
}

RealField build_initial(const InitSpec& spec, const Grid& grid) {
  auto f = initial_function(spec, grid.half_width, 4.0 * grid.spacing());
  return RealField::sample(grid,
                           [&](std::span<const double> x) { return f(x[0]); });
}

namespace {

json to_json_obj(const RunConfig& cfg) {
  json j;
  j["grid"] = {{"dim", cfg.grid.dim},
               {"L", cfg.grid.box_half_width},
               {"N", cfg.grid.points}};
  json f;
  f["kind"] = cfg.flux.kind;
  f["A"] = cfg.flux.A;
  f["k_left"] = cfg.flux.k_left;
  f["k_right"] = cfg.flux.k_right;
  f["jump_at"] = cfg.flux.jump_at;
  f["c"] = cfg.flux.c;
  if (cfg.flux.has_window)
    f["lambda_window"] = {cfg.flux.window.lo, cfg.flux.window.hi};
  if (!cfg.flux.table_path.empty()) f["table"] = cfg.flux.table_path;
  j["flux"] = f;
  json i;
  i["kind"] = cfg.initial.kind;
  i["value"] = cfg.initial.value;
  i["amplitude"] = cfg.initial.amplitude;
  i["center"] = cfg.initial.center;
  i["sigma"] = cfg.initial.sigma;
  i["mode"] = cfg.initial.mode;
  i["s_left"] = cfg.initial.s_left;
  i["s_right"] = cfg.initial.s_right;
  i["jump_at"] = cfg.initial.jump_at;
  i["upstep_frac"] = cfg.initial.upstep_frac;
  i["width"] = cfg.initial.width;
  j["initial"] = i;
  j["solver"] = {{"eps", cfg.solver.eps},
                 {"delta", cfg.solver.delta},
                 {"slab_dt", cfg.solver.slab_dt},
                 {"picard_tol", cfg.solver.picard_tol},
                 {"picard_max_iter", cfg.solver.picard_max_iter},
                 {"quadrature_substeps", cfg.solver.quadrature_substeps},
                 {"dealias", cfg.solver.dealias}};
  j["n_moll"] = cfg.n_moll;
  j["cutoff_eps"] = cfg.cutoff_eps;
  j["T"] = cfg.T_final;
  j["snapshot_stride"] = cfg.snapshot_stride;
  return j;
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig from_json_obj(const json& j) {
  RunConfig cfg;
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    maybe(g, "dim", cfg.grid.dim);
    maybe(g, "L", cfg.grid.box_half_width);
    maybe(g, "N", cfg.grid.points);
  }
  if (j.contains("flux")) {
    const json& f = j.at("flux");
    maybe(f, "kind", cfg.flux.kind);
    maybe(f, "A", cfg.flux.A);
    maybe(f, "k_left", cfg.flux.k_left);
    maybe(f, "k_right", cfg.flux.k_right);
    maybe(f, "jump_at", cfg.flux.jump_at);
    maybe(f, "c", cfg.flux.c);
    if (f.contains("lambda_window")) {
      cfg.flux.has_window = true;
      cfg.flux.window.lo = f.at("lambda_window").at(0).get<double>();
      cfg.flux.window.hi = f.at("lambda_window").at(1).get<double>();
    }
    maybe(f, "table", cfg.flux.table_path);
  }
  if (j.contains("initial")) {
    const json& i = j.at("initial");
    maybe(i, "kind", cfg.initial.kind);
    maybe(i, "value", cfg.initial.value);
    maybe(i, "amplitude", cfg.initial.amplitude);
    maybe(i, "center", cfg.initial.center);
    maybe(i, "sigma", cfg.initial.sigma);
    maybe(i, "mode", cfg.initial.mode);
    maybe(i, "s_left", cfg.initial.s_left);
    maybe(i, "s_right", cfg.initial.s_right);
    maybe(i, "jump_at", cfg.initial.jump_at);
    maybe(i, "upstep_frac", cfg.initial.upstep_frac);
    maybe(i, "width", cfg.initial.width);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    maybe(s, "eps", cfg.solver.eps);
    maybe(s, "delta", cfg.solver.delta);
    maybe(s, "slab_dt", cfg.solver.slab_dt);
    maybe(s, "picard_tol", cfg.solver.picard_tol);
    maybe(s, "picard_max_iter", cfg.solver.picard_max_iter);
    maybe(s, "quadrature_substeps", cfg.solver.quadrature_substeps);
    maybe(s, "dealias", cfg.solver.dealias);
  }
  maybe(j, "n_moll", cfg.n_moll);
  maybe(j, "cutoff_eps", cfg.cutoff_eps);
  maybe(j, "T", cfg.T_final);
  maybe(j, "snapshot_stride", cfg.snapshot_stride);
  return cfg;
}

}  // namespace

std::string to_json(const RunConfig& cfg) { return to_json_obj(cfg).dump(2); }

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("config: bad JSON: ") + e.what());
  }
  return from_json_obj(j);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::IoError, "config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json(ss.str());
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_trajectory(const Trajectory& traj, const RunConfig& cfg,
                     const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "save_trajectory: cannot create " + dir);
  json manifest;
  manifest["config"] = json::parse(to_json(cfg));
  manifest["config_hash"] = fnv1a_hex(to_json(cfg));
  manifest["states"] = traj.size();
  manifest["conservation_drift"] = traj.conservation_drift;
  manifest["boundary_mass_worst"] = traj.boundary_mass_worst;
  manifest["boundary_flagged"] = traj.boundary_flagged;
  manifest["window_margin_worst"] = traj.window_margin_worst;
  manifest["window_margin_flagged"] = traj.window_margin_flagged;
  manifest["mode_bound_worst"] = traj.mode_bound_worst;
  long total_iters = 0;
  double worst_res = 0.0;
  int bisections = 0;
  for (const SlabStat& s : traj.slab_stats) {
    total_iters += s.iterations;
    worst_res = std::max(worst_res, s.residual);
    bisections += s.bisections;
  }
  manifest["picard_total_iterations"] = total_iters;
  manifest["picard_worst_residual"] = worst_res;
  manifest["bisections"] = bisections;
  {
    std::ofstream os(dir + "/manifest.json");
    require(os.good(), ErrorCode::IoError, "save_trajectory: manifest write failed");
    os << manifest.dump(2) << "\n";
  }
  char name[64];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::snprintf(name, sizeof name, "/state_%06zu.dat", k);
    write_snapshot(dir + name, traj.states[k], traj.times[k]);
    std::snprintf(name, sizeof name, "/dstate_%06zu.dat", k);
    write_snapshot(dir + name, traj.time_derivatives[k], traj.times[k]);
  }
}

Trajectory load_trajectory(const std::string& dir, RunConfig* cfg_out) {
  std::ifstream ms(dir + "/manifest.json");
  require(ms.good(), ErrorCode::IoError, "load_trajectory: no manifest in " + dir);
  json manifest;
  try {
    ms >> manifest;
  } catch (const std::exception& e) {
    fail(ErrorCode::IoError, std::string("load_trajectory: bad manifest: ") + e.what());
  }
  RunConfig cfg = from_json_obj(manifest.at("config"));
  if (cfg_out) *cfg_out = cfg;
  Grid grid = cfg.grid.make();
  Trajectory traj(grid);
  traj.config = cfg.solver;
  FluxModel base = build_flux(cfg.flux);
  traj.flux = std::make_shared<MollifiedFlux>(
      mollify(base, cfg.n_moll, cfg.cutoff_eps, grid.half_width));
  std::size_t count = manifest.at("states").get<std::size_t>();
  char name[64];
  for (std::size_t k = 0; k < count; ++k) {
    double t = 0.0;
    std::snprintf(name, sizeof name, "/state_%06zu.dat", k);
    traj.states.push_back(read_snapshot(dir + name, &t));
    traj.times.push_back(t);
    std::snprintf(name, sizeof name, "/dstate_%06zu.dat", k);
    traj.time_derivatives.push_back(read_snapshot(dir + name));
  }
  return traj;
}

}  // namespace caplab
