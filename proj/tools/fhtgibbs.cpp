#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fhtgibbs/cli/commands.hpp"
#include "fhtgibbs/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int workers = 0;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
  cmd->add_option("--set", args.overrides, "override a single config key, e.g. --set sampler.dt=1e-3");
  cmd->add_option("--seed", args.seed, "master seed (overrides io.master_seed)");
  cmd->add_option("--workers", args.workers, "worker thread count (overrides io.workers)");
  cmd->add_option("--out", args.out_dir, "output directory (overrides io.out_dir)");
}

fhtgibbs::RunConfig resolve_config(const CommonArgs& args) {
  fhtgibbs::RunConfig cfg;
  if (!args.config_path.empty()) cfg = fhtgibbs::load_config(args.config_path);
  for (const auto& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw fhtgibbs::ValidationError("--set expects key=value, got '" + kv + "'");
    fhtgibbs::apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(args.seed);
  if (args.workers > 0) cfg.workers = args.workers;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed ensemble sampler + hierarchical tensor density fitting"};
  app.set_version_flag("--version", std::string(fhtgibbs::kVersion));
  app.require_subcommand(1);

  CommonArgs sample_args, fit_args, diag_args, pipe_args;
  bool sample_baseline = false, pipe_baseline = false;
  std::string fit_samples, diag_samples, diag_model, diag_pairs, pipe_pairs;

  CLI::App* sample = app.add_subcommand("sample", "draw samples from the lattice Gibbs measure");
  add_common(sample, sample_args);
  sample->add_flag("--baseline", sample_baseline,
                   "also run plain MALA at the target temperature with the same step budget");

  CLI::App* fit = app.add_subcommand("fit", "fit a hierarchical tensor density to samples");
  add_common(fit, fit_args);
  fit->add_option("--samples", fit_samples, "input .gls sample file")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "compute diagnostics for samples and/or a model");
  add_common(diag, diag_args);
  diag->add_option("--samples", diag_samples, "input .gls sample file");
  diag->add_option("--model", diag_model, "input .fht model file");
  diag->add_option("--pairs", diag_pairs, "coordinate pairs for 2-d marginals, e.g. 0:1,4:12");

  CLI::App* pipe = app.add_subcommand("pipeline", "sample, fit, and diagnose in one run");
  add_common(pipe, pipe_args);
  pipe->add_flag("--baseline", pipe_baseline, "also run the plain MALA baseline");
  pipe->add_option("--pairs", pipe_pairs, "coordinate pairs for 2-d marginals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sample->parsed()) {
      fhtgibbs::cmd_sample(resolve_config(sample_args), sample_baseline);
    } else if (fit->parsed()) {
      fhtgibbs::cmd_fit(resolve_config(fit_args), fit_samples);
    } else if (diag->parsed()) {
      fhtgibbs::cmd_diagnose(resolve_config(diag_args), diag_samples, diag_model,
                             fhtgibbs::parse_pairs(diag_pairs));
    } else if (pipe->parsed()) {
      fhtgibbs::cmd_pipeline(resolve_config(pipe_args), pipe_baseline,
                             fhtgibbs::parse_pairs(pipe_pairs));
    }
  } catch (const fhtgibbs::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fhtgibbs::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
