#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/lattice/potential.hpp"
#include "fhtgibbs/mcmc/schedule.hpp"

namespace fhtgibbs {

// Flat dotted-key configuration. Unknown keys are hard errors; every numeric
// field is range-checked on assignment. Times (burnin, baseline) and the trace
// axis are in descaled units: one kernel step always advances the descaled
// clock by sampler.dt, while the absolute step size is sampler.dt * sampler.scale.
struct RunConfig {
  // potential.*
  Geometry geometry = Geometry::Chain1D;
  int d = 32;
  double lambda_factor = 0.1;
  double cubic_a = 0.0;
  // sampler.*
  double beta0 = 1.0;
  double beta = 8.0;
  ScheduleKind schedule = ScheduleKind::Geometric;
  int levels = 10;
  int mala_steps = 700;
  double dt = 0.0005;
  double scale = 12.0;
  int n_ensembles = 4;
  int particles = 100;
  int ula_substeps = 0;  // 0 = one descaled time unit split across levels
  double stretch_a = 2.0;
  std::string init = "uniform";  // plus | minus | zero | uniform
  double burnin_time = 7.0;
  double baseline_time = 0.0;  // 0 = match the annealed run's step budget
  int trace_stride = 20;
  // fht.*
  int q = 15;
  double half_width = 2.5;
  int rank = 3;
  double oversampling = 2.0;
  double svd_tol = 1e-8;
  std::uint64_t sketch_seed = 7;
  int grid_resolution = 512;
  // io.*
  std::string out_dir = "out";
  std::uint64_t master_seed = 1;
  int workers = 1;

  PotentialSpec potential_spec() const { return PotentialSpec{geometry, d, lambda_factor, cubic_a}; }

  AnnealingSchedule annealing() const {
    return AnnealingSchedule::make(beta0, beta, levels, schedule);
  }

  void validate() const {
    if (d < 2) throw ValidationError("config: potential.d must be >= 2");
    if (!(lambda_factor > 0)) throw ValidationError("config: potential.lambda_factor must be > 0");
    if (!(beta0 > 0)) throw ValidationError("config: sampler.beta0 must be > 0");
    if (!(beta >= beta0)) throw ValidationError("config: sampler.beta must be >= beta0");
    if (levels < 1) throw ValidationError("config: sampler.levels must be >= 1");
    if (mala_steps < 1) throw ValidationError("config: sampler.mala_steps must be >= 1");
    if (!(dt > 0)) throw ValidationError("config: sampler.dt must be > 0");
    if (!(scale > 0)) throw ValidationError("config: sampler.scale must be > 0");
    if (n_ensembles < 1) throw ValidationError("config: sampler.n_ensembles must be >= 1");
    if (particles < 1) throw ValidationError("config: sampler.particles must be >= 1");
    if (ula_substeps < 0) throw ValidationError("config: sampler.ula_substeps must be >= 0");
    if (!(stretch_a > 1)) throw ValidationError("config: sampler.stretch_a must be > 1");
    if (init != "plus" && init != "minus" && init != "zero" && init != "uniform")
      throw ValidationError("config: sampler.init must be plus, minus, zero or uniform");
    if (!(burnin_time >= 0)) throw ValidationError("config: sampler.burnin_time must be >= 0");
    if (!(baseline_time >= 0)) throw ValidationError("config: sampler.baseline_time must be >= 0");
    if (trace_stride < 1) throw ValidationError("config: sampler.trace_stride must be >= 1");
    if (q < 1) throw ValidationError("config: fht.q must be >= 1");
    if (!(half_width > 0)) throw ValidationError("config: fht.half_width must be > 0");
    if (rank < 1) throw ValidationError("config: fht.rank must be >= 1");
    if (!(oversampling >= 1.5)) throw ValidationError("config: fht.oversampling must be >= 1.5");
    if (!(svd_tol >= 0) || svd_tol >= 1)
      throw ValidationError("config: fht.svd_tol must be in [0, 1)");
    if (grid_resolution < 64) throw ValidationError("config: fht.grid_resolution must be >= 64");
    if (workers < 1) throw ValidationError("config: io.workers must be >= 1");
    if (out_dir.empty()) throw ValidationError("config: io.out_dir must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_double(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' has non-numeric value '" + v + "'");
  }
  if (used != v.size())
    throw ValidationError("config: key '" + key + "' has trailing junk in value '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& v, const std::string& key) {
  const double x = parse_double(v, key);
  const long long i = static_cast<long long>(x);
  if (static_cast<double>(i) != x)
    throw ValidationError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return i;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  // stoull would wrap negatives around instead of failing
  if (v.find('-') != std::string::npos)
    throw ValidationError("config: key '" + key + "' must be a nonnegative integer, got '" + v + "'");
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' has non-integer value '" + v + "'");
  }
  if (used != v.size())
    throw ValidationError("config: key '" + key + "' has trailing junk in value '" + v + "'");
  return out;
}

}  // namespace detail

inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_u64;
  if (key == "potential.geometry") {
    if (value == "chain1d") cfg.geometry = Geometry::Chain1D;
    else if (value == "grid2d") cfg.geometry = Geometry::Grid2D;
    else throw ValidationError("config: potential.geometry must be chain1d or grid2d");
  } else if (key == "potential.d") {
    cfg.d = static_cast<int>(parse_int(value, key));
  } else if (key == "potential.lambda_factor") {
    cfg.lambda_factor = parse_double(value, key);
  } else if (key == "potential.cubic_a") {
    cfg.cubic_a = parse_double(value, key);
  } else if (key == "sampler.beta0") {
    cfg.beta0 = parse_double(value, key);
  } else if (key == "sampler.beta") {
    cfg.beta = parse_double(value, key);
  } else if (key == "sampler.schedule") {
    if (value == "linear") cfg.schedule = ScheduleKind::Linear;
    else if (value == "geometric") cfg.schedule = ScheduleKind::Geometric;
    else throw ValidationError("config: sampler.schedule must be linear or geometric");
  } else if (key == "sampler.levels") {
    cfg.levels = static_cast<int>(parse_int(value, key));
  } else if (key == "sampler.mala_steps") {
    cfg.mala_steps = static_cast<int>(parse_int(value, key));
  } else if (key == "sampler.dt") {
    cfg.dt = parse_double(value, key);
  } else if (key == "sampler.scale") {
    cfg.scale = parse_double(value, key);
  } else if (key == "sampler.n_ensembles") {
    cfg.n_ensembles = static_cast<int>(parse_int(value, key));
  } else if (key == "sampler.particles") {
    cfg.particles = static_cast<int>(parse_int(value, key));
  } else if (key == "sampler.ula_substeps") {
    cfg.ula_substeps = static_cast<int>(parse_int(value, key));
  } else if (key == "sampler.stretch_a") {
    cfg.stretch_a = parse_double(value, key);
  } else if (key == "sampler.init") {
    cfg.init = value;
  } else if (key == "sampler.burnin_time") {
    cfg.burnin_time = parse_double(value, key);
  } else if (key == "sampler.baseline_time") {
    cfg.baseline_time = parse_double(value, key);
  } else if (key == "sampler.trace_stride") {
    cfg.trace_stride = static_cast<int>(parse_int(value, key));
  } else if (key == "fht.q") {
    cfg.q = static_cast<int>(parse_int(value, key));
  } else if (key == "fht.half_width") {
    cfg.half_width = parse_double(value, key);
  } else if (key == "fht.rank") {
    cfg.rank = static_cast<int>(parse_int(value, key));
  } else if (key == "fht.oversampling") {
    cfg.oversampling = parse_double(value, key);
  } else if (key == "fht.svd_tol") {
    cfg.svd_tol = parse_double(value, key);
  } else if (key == "fht.sketch_seed") {
    cfg.sketch_seed = parse_u64(value, key);
  } else if (key == "fht.grid_resolution") {
    cfg.grid_resolution = static_cast<int>(parse_int(value, key));
  } else if (key == "io.out_dir") {
    cfg.out_dir = value;
  } else if (key == "io.master_seed") {
    cfg.master_seed = parse_u64(value, key);
  } else if (key == "io.workers") {
    cfg.workers = static_cast<int>(parse_int(value, key));
  } else {
    throw ValidationError("config: unknown key '" + key + "'");
  }
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = RunConfig()) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError("config: line " + std::to_string(lineno) + " has empty key or value");
    apply_config_line(base, key, value);
  }
  base.validate();
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = RunConfig()) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), base);
}

// Canonical round-trippable rendering; used verbatim in run manifests.
inline std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "potential.geometry = " << to_string(cfg.geometry) << "\n";
  out << "potential.d = " << cfg.d << "\n";
  out << "potential.lambda_factor = " << cfg.lambda_factor << "\n";
  out << "potential.cubic_a = " << cfg.cubic_a << "\n";
  out << "sampler.beta0 = " << cfg.beta0 << "\n";
  out << "sampler.beta = " << cfg.beta << "\n";
  out << "sampler.schedule = " << to_string(cfg.schedule) << "\n";
  out << "sampler.levels = " << cfg.levels << "\n";
  out << "sampler.mala_steps = " << cfg.mala_steps << "\n";
  out << "sampler.dt = " << cfg.dt << "\n";
  out << "sampler.scale = " << cfg.scale << "\n";
  out << "sampler.n_ensembles = " << cfg.n_ensembles << "\n";
  out << "sampler.particles = " << cfg.particles << "\n";
  out << "sampler.ula_substeps = " << cfg.ula_substeps << "\n";
  out << "sampler.stretch_a = " << cfg.stretch_a << "\n";
  out << "sampler.init = " << cfg.init << "\n";
  out << "sampler.burnin_time = " << cfg.burnin_time << "\n";
  out << "sampler.baseline_time = " << cfg.baseline_time << "\n";
  out << "sampler.trace_stride = " << cfg.trace_stride << "\n";
  out << "fht.q = " << cfg.q << "\n";
  out << "fht.half_width = " << cfg.half_width << "\n";
  out << "fht.rank = " << cfg.rank << "\n";
  out << "fht.oversampling = " << cfg.oversampling << "\n";
  out << "fht.svd_tol = " << cfg.svd_tol << "\n";
  out << "fht.sketch_seed = " << cfg.sketch_seed << "\n";
  out << "fht.grid_resolution = " << cfg.grid_resolution << "\n";
  out << "io.out_dir = " << cfg.out_dir << "\n";
  out << "io.master_seed = " << cfg.master_seed << "\n";
  out << "io.workers = " << cfg.workers << "\n";
  return out.str();
}

}  // namespace fhtgibbs
