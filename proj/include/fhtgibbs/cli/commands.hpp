#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/log.hpp"
#include "fhtgibbs/core/parallel.hpp"
#include "fhtgibbs/core/rng.hpp"
#include "fhtgibbs/diag/metrics.hpp"
#include "fhtgibbs/fht/sample.hpp"
#include "fhtgibbs/fht/sketch.hpp"
#include "fhtgibbs/io/config.hpp"
#include "fhtgibbs/io/formats.hpp"
#include "fhtgibbs/lattice/potential.hpp"
#include "fhtgibbs/mcmc/ais.hpp"
#include "fhtgibbs/version.hpp"

namespace fhtgibbs {

inline constexpr std::uint64_t kSaltAnnealed = 0x616e6e65616cULL;
inline constexpr std::uint64_t kSaltBaseline = 0x626173656cULL;

struct Trace {
  std::vector<double> time;        // descaled axis: one kernel sweep = dt
  std::vector<RatioAccum> pooled;  // merged across ensembles in order
};

struct SamplerOutputs {
  SampleSet annealed;
  SampleSet baseline;  // empty unless requested
  Trace trace_annealed;
  Trace trace_baseline;
  int ula_substeps = 0;
  long annealed_sweeps = 0;  // burn-in + per-level sweeps, per ensemble
  long baseline_sweeps = 0;
};

namespace detail {

inline void init_particles(ParticleEnsemble& ens, const std::string& mode) {
  const int d = ens.dim();
  for (int i = 0; i < ens.size(); ++i) {
    if (mode == "plus") {
      ens.particles.col(i).setConstant(1.0);
    } else if (mode == "minus") {
      ens.particles.col(i).setConstant(-1.0);
    } else if (mode == "zero") {
      ens.particles.col(i).setZero();
    } else {
      for (int k = 0; k < d; ++k)
        ens.particles(k, i) = 2.0 * ens.particle_rng[static_cast<std::size_t>(i)].uniform() - 1.0;
    }
  }
}

// Records pooled well-ratio accumulators on a fixed schedule of sweep counts,
// so every ensemble contributes to identical time stamps.
class TraceRecorder {
 public:
  TraceRecorder(Trace& trace, int stride, double dt) : trace_(trace), stride_(stride), dt_(dt) {}

  void start_ensemble() { slot_ = 0; }

  void after_sweep(long sweep, const ParticleEnsemble& ens, bool force = false) {
    if (!force && sweep % stride_ != 0) return;
    if (slot_ == static_cast<long>(trace_.time.size())) {
      trace_.time.push_back(static_cast<double>(sweep) * dt_);
      trace_.pooled.emplace_back();
    }
    RatioAccum acc;
    for (int i = 0; i < ens.size(); ++i) acc.add(ens.particles.col(i));
    trace_.pooled[static_cast<std::size_t>(slot_)].merge(acc);
    ++slot_;
  }

 private:
  Trace& trace_;
  int stride_;
  double dt_;
  long slot_ = 0;
};

}  // namespace detail

// Runs the annealed interacting-ensemble sampler (and optionally the plain
// MALA baseline at the final temperature with the same total step budget).
// Everything is deterministic in (config, master seed) and independent of the
// worker count.
inline SamplerOutputs run_sampler(const RunConfig& cfg, bool with_baseline) {
  cfg.validate();
  const auto pot = build_potential<double>(cfg.potential_spec());
  const AnnealingSchedule sched = cfg.annealing();
  const double dt_abs = cfg.dt * cfg.scale;
  const long burnin_sweeps = std::lround(cfg.burnin_time / cfg.dt);
  const int levels = sched.levels();
  int substeps = cfg.ula_substeps;
  if (substeps == 0)
    substeps = static_cast<int>(std::max(1L, std::lround(1.0 / (levels * dt_abs))));

  SamplerOutputs out;
  out.ula_substeps = substeps;
  out.annealed_sweeps = burnin_sweeps + static_cast<long>(levels) * (substeps + cfg.mala_steps);
  out.baseline_sweeps = cfg.baseline_time > 0 ? std::lround(cfg.baseline_time / cfg.dt)
                                              : out.annealed_sweeps;
  const int d = cfg.d;
  const int n = cfg.particles;
  const long pool = static_cast<long>(cfg.n_ensembles) * n;
  out.annealed.points.resize(d, pool);
  if (with_baseline) out.baseline.points.resize(d, pool);

  detail::TraceRecorder rec_annealed(out.trace_annealed, cfg.trace_stride, cfg.dt);
  detail::TraceRecorder rec_baseline(out.trace_baseline, cfg.trace_stride, cfg.dt);

  for (int e = 0; e < cfg.n_ensembles; ++e) {
    // annealed run
    {
      ParticleEnsemble ens =
          ParticleEnsemble::create(d, n, derive_seed(cfg.master_seed, kSaltAnnealed,
                                                     static_cast<std::uint64_t>(e)));
      detail::init_particles(ens, cfg.init);
      rec_annealed.start_ensemble();
      const ScaledTarget<Potential<double>> base{&pot, sched.beta_at(0)};
      for (long sweep = 1; sweep <= burnin_sweeps; ++sweep) {
        parallel_for(static_cast<std::size_t>(n), cfg.workers, [&](std::size_t i) {
          KernelParams kp{dt_abs, &ens.particle_rng[i]};
          auto [y, ok] = mala_step(ens.particles.col(static_cast<int>(i)), base, kp);
          ens.particles.col(static_cast<int>(i)) = std::move(y);
        });
        rec_annealed.after_sweep(sweep, ens, sweep == burnin_sweeps);
      }
      AisParams ap;
      ap.dt = dt_abs;
      ap.mala_steps = cfg.mala_steps;
      ap.ula_substeps = substeps;
      ap.stretch_a = cfg.stretch_a;
      ap.workers = cfg.workers;
      ais_run(ens, pot, sched, ap, [&](const ParticleEnsemble& state, int level, int step) {
        const long sweep = burnin_sweeps +
                           static_cast<long>(level - 1) * (substeps + cfg.mala_steps) + substeps +
                           step;
        const bool boundary = step == 0 || (level == levels && step == cfg.mala_steps);
        rec_annealed.after_sweep(sweep, state, boundary);
      });
      out.annealed.points.middleCols(static_cast<long>(e) * n, n) = ens.particles;
    }
    if (!with_baseline) continue;
    // plain MALA at the final temperature, same budget, same init recipe
    {
      ParticleEnsemble ens =
          ParticleEnsemble::create(d, n, derive_seed(cfg.master_seed, kSaltBaseline,
                                                     static_cast<std::uint64_t>(e)));
      detail::init_particles(ens, cfg.init);
      rec_baseline.start_ensemble();
      const ScaledTarget<Potential<double>> target{&pot, sched.beta_at(levels)};
      for (long sweep = 1; sweep <= out.baseline_sweeps; ++sweep) {
        parallel_for(static_cast<std::size_t>(n), cfg.workers, [&](std::size_t i) {
          KernelParams kp{dt_abs, &ens.particle_rng[i]};
          auto [y, ok] = mala_step(ens.particles.col(static_cast<int>(i)), target, kp);
          ens.particles.col(static_cast<int>(i)) = std::move(y);
        });
        rec_baseline.after_sweep(sweep, ens, sweep == out.baseline_sweeps);
      }
      out.baseline.points.middleCols(static_cast<long>(e) * n, n) = ens.particles;
    }
  }
  return out;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ostringstream ss;
  ss.precision(12);
  ss << "time,iota\n";
  for (std::size_t k = 0; k < trace.time.size(); ++k) {
    const RatioResult r = trace.pooled[k].result();
    ss << trace.time[k] << "," << r.iota << "\n";
  }
  write_text(path, ss.str());
}

inline std::string manifest_text(const RunConfig& cfg, const std::string& command) {
  std::ostringstream ss;
  ss << "fhtgibbs " << kVersion << "\n";
  ss << "command = " << command << "\n";
  ss << render_config(cfg);
  return ss.str();
}

inline std::filesystem::path ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + cfg.out_dir + "'");
  return dir;
}

inline DimensionTree tree_for(const RunConfig& cfg, int d) {
  return DimensionTree::build(
      d, cfg.geometry == Geometry::Grid2D ? SiteOrder::Morton2D : SiteOrder::Identity);
}

}  // namespace detail

inline void cmd_sample(const RunConfig& cfg, bool with_baseline) {
  const auto dir = detail::ensure_out_dir(cfg);
  const SamplerOutputs out = run_sampler(cfg, with_baseline);
  detail::write_text((dir / "manifest.txt").string(), detail::manifest_text(cfg, "sample"));
  write_samples((dir / "samples.gls").string(), out.annealed);
  detail::write_trace_csv((dir / "trace_ais.csv").string(), out.trace_annealed);
  if (with_baseline) {
    write_samples((dir / "samples_mala.gls").string(), out.baseline);
    detail::write_trace_csv((dir / "trace_mala.csv").string(), out.trace_baseline);
  }
}

inline FhtModel<double> fit_model(const RunConfig& cfg, const SampleSet& samples,
                                  FitReport* report = nullptr) {
  const int d = static_cast<int>(samples.points.rows());
  if (d != cfg.d)
    throw ValidationError("fit: samples have dimension " + std::to_string(d) +
                          " but config says " + std::to_string(cfg.d));
  const DimensionTree tree = detail::tree_for(cfg, d);
  const FourierBasis<double> basis(cfg.q, cfg.half_width);
  FitOptions opt;
  opt.rank = cfg.rank;
  opt.oversampling = cfg.oversampling;
  opt.svd_tol = cfg.svd_tol;
  opt.sketch_seed = cfg.sketch_seed;
  opt.workers = cfg.workers;
  return sketch_fit(samples.points, samples.weighted() ? &samples.log_weights : nullptr, tree,
                    basis, opt, report);
}

inline void cmd_fit(const RunConfig& cfg, const std::string& samples_path) {
  const auto dir = detail::ensure_out_dir(cfg);
  const SampleSet samples = read_samples(samples_path);
  FitReport report;
  const FhtModel<double> model = fit_model(cfg, samples, &report);
  detail::write_text((dir / "manifest.txt").string(), detail::manifest_text(cfg, "fit"));
  write_model((dir / "model.fht").string(), model);
  std::ostringstream ss;
  ss << "samples = " << report.sample_count << "\n";
  ss << "normalization = " << std::setprecision(12) << report.normalization << "\n";
  for (const auto& [node, rank] : report.edge_ranks)
    ss << "edge_rank node " << node << " = " << rank << "\n";
  for (const auto& w : report.warnings) ss << "warning: " << w << "\n";
  detail::write_text((dir / "fit_report.txt").string(), ss.str());
}

inline std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> pairs;
  if (text.empty()) return pairs;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ValidationError("pairs: expected i:j entries separated by commas");
    try {
      pairs.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ValidationError("pairs: bad entry '" + item + "'");
    }
  }
  return pairs;
}

inline void write_histogram_csv(const std::string& path, const Histogram2D& h, int i, int j) {
  std::ostringstream ss;
  ss.precision(12);
  ss << "# marginal of coordinates (" << i << "," << j << ") on [" << h.lo << "," << h.hi
     << "]^2, " << h.bins << "x" << h.bins << " cells, out_of_box=" << h.out_of_box << "\n";
  for (int a = 0; a < h.bins; ++a) {
    for (int b = 0; b < h.bins; ++b) ss << h.density(a, b) << (b + 1 == h.bins ? '\n' : ',');
  }
  detail::write_text(path, ss.str());
}

inline constexpr int kMarginalBins = 200;

inline void cmd_diagnose(const RunConfig& cfg, const std::string& samples_path,
                         const std::string& model_path,
                         const std::vector<std::pair<int, int>>& pairs) {
  if (samples_path.empty() && model_path.empty())
    throw ValidationError("diagnose: need at least one of samples or model");
  const auto dir = detail::ensure_out_dir(cfg);
  detail::write_text((dir / "manifest.txt").string(), detail::manifest_text(cfg, "diagnose"));

  bool have_samples = !samples_path.empty();
  SampleSet samples;
  if (have_samples) samples = read_samples(samples_path);
  bool have_model = !model_path.empty();
  FhtModel<double> model;
  if (have_model) model = read_model(model_path);
  if (have_samples && have_model && samples.points.rows() != model.tree.dim())
    throw ValidationError("diagnose: samples and model have different dimensions");

  // well ratio (samples only; weighted when weights are present)
  {
    std::ostringstream ss;
    ss.precision(12);
    ss << "source,iota,u_plus,u_minus\n";
    if (have_samples) {
      const RatioResult r =
          plus_minus_ratio(samples.points, samples.weighted() ? &samples.log_weights : nullptr);
      ss << "samples," << r.iota << "," << r.u_plus << "," << r.u_minus << "\n";
    }
    detail::write_text((dir / "ratio.csv").string(), ss.str());
  }

  // first moments for every coordinate, second moments for requested pairs
  {
    MomentTable st, mt;
    if (have_samples)
      st = moment_table(samples.points, pairs, samples.weighted() ? &samples.log_weights : nullptr);
    if (have_model) mt = moment_table(model, pairs);
    const int d = have_samples ? static_cast<int>(samples.points.rows()) : model.tree.dim();
    std::ostringstream ss;
    ss.precision(12);
    ss << "kind,i,j,sample,model\n";
    for (int i = 0; i < d; ++i) {
      ss << "mean," << i << ",,";
      if (have_samples) ss << st.mean[i];
      ss << ",";
      if (have_model) ss << mt.mean[i];
      ss << "\n";
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      ss << "second," << pairs[p].first << "," << pairs[p].second << ",";
      if (have_samples) ss << st.second[static_cast<Eigen::Index>(p)];
      ss << ",";
      if (have_model) ss << mt.second[static_cast<Eigen::Index>(p)];
      ss << "\n";
    }
    detail::write_text((dir / "moments.csv").string(), ss.str());
  }

  const double w = cfg.half_width;
  for (const auto& [i, j] : pairs) {
    if (i == j) continue;
    if (have_samples) {
      const Histogram2D h = empirical_marginal(samples.points, i, j, kMarginalBins, -w, w);
      write_histogram_csv(
          (dir / ("marginal_emp_" + std::to_string(i) + "_" + std::to_string(j) + ".csv")).string(),
          h, i, j);
    }
    if (have_model) {
      const Histogram2D h = model_marginal_histogram(model, i, j, kMarginalBins, -w, w);
      write_histogram_csv(
          (dir / ("marginal_model_" + std::to_string(i) + "_" + std::to_string(j) + ".csv"))
              .string(),
          h, i, j);
    }
  }
}

inline void cmd_pipeline(const RunConfig& cfg, bool with_baseline,
                         const std::vector<std::pair<int, int>>& pairs) {
  const auto dir = detail::ensure_out_dir(cfg);
  cmd_sample(cfg, with_baseline);
  cmd_fit(cfg, (dir / "samples.gls").string());
  cmd_diagnose(cfg, (dir / "samples.gls").string(), (dir / "model.fht").string(), pairs);
  detail::write_text((dir / "manifest.txt").string(), detail::manifest_text(cfg, "pipeline"));
}

}  // namespace fhtgibbs
