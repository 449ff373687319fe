#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fhtgibbs/cli/commands.hpp"

using namespace fhtgibbs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fhtgibbs_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A deliberately tiny run so command tests stay fast.
RunConfig tiny_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.d = 4;
  cfg.beta0 = 1.0;
  cfg.beta = 3.0;
  cfg.levels = 2;
  cfg.mala_steps = 3;
  cfg.dt = 0.05;
  cfg.scale = 1.0;
  cfg.n_ensembles = 2;
  cfg.particles = 8;
  cfg.ula_substeps = 2;
  cfg.burnin_time = 0.25;
  cfg.trace_stride = 2;
  cfg.q = 3;
  cfg.rank = 2;
  cfg.grid_resolution = 64;
  cfg.out_dir = out_dir;
  cfg.master_seed = 99;
  return cfg;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run_sampler output shapes and bookkeeping") {
  TempDir tmp;
  const RunConfig cfg = tiny_config(tmp.file("a"));
  const SamplerOutputs out = run_sampler(cfg, true);

  CHECK(out.annealed.points.rows() == 4);
  CHECK(out.annealed.points.cols() == 2 * 8);
  CHECK(out.baseline.points.cols() == 2 * 8);
  CHECK(out.annealed.points.allFinite());
  CHECK(out.baseline.points.allFinite());
  CHECK(out.ula_substeps == 2);
  // 5 burn-in sweeps + 2 levels * (2 substeps + 3 mala sweeps)
  CHECK(out.annealed_sweeps == 5 + 2 * (2 + 3));
  CHECK(out.baseline_sweeps == out.annealed_sweeps);
  // distinct salts: the two runs cannot coincide
  CHECK((out.annealed.points.array() != out.baseline.points.array()).any());

  // traces cover the full run on the descaled axis
  REQUIRE(!out.trace_annealed.time.empty());
  CHECK(out.trace_annealed.time.front() <= 2 * cfg.dt * cfg.trace_stride);
  CHECK(out.trace_annealed.time.back() ==
        doctest::Approx(static_cast<double>(out.annealed_sweeps) * cfg.dt));
  for (std::size_t k = 1; k < out.trace_annealed.time.size(); ++k)
    CHECK(out.trace_annealed.time[k] > out.trace_annealed.time[k - 1]);
  // every slot pooled both ensembles' particles
  for (const auto& acc : out.trace_annealed.pooled) CHECK(acc.count == 2 * 8);
}

TEST_CASE("run_sampler is deterministic and worker-count independent") {
  TempDir tmp;
  RunConfig cfg = tiny_config(tmp.file("a"));
  const SamplerOutputs a = run_sampler(cfg, false);
  const SamplerOutputs b = run_sampler(cfg, false);
  CHECK((a.annealed.points.array() == b.annealed.points.array()).all());

  cfg.workers = 3;
  const SamplerOutputs c = run_sampler(cfg, false);
  CHECK((a.annealed.points.array() == c.annealed.points.array()).all());

  cfg.workers = 1;
  cfg.master_seed = 100;
  const SamplerOutputs d = run_sampler(cfg, false);
  CHECK((a.annealed.points.array() != d.annealed.points.array()).any());
}

TEST_CASE("init modes") {
  auto ens = ParticleEnsemble::create(4, 6, 7);
  detail::init_particles(ens, "plus");
  CHECK((ens.particles.array() == 1.0).all());
  detail::init_particles(ens, "minus");
  CHECK((ens.particles.array() == -1.0).all());
  detail::init_particles(ens, "zero");
  CHECK((ens.particles.array() == 0.0).all());
  detail::init_particles(ens, "uniform");
  CHECK((ens.particles.array().abs() <= 1.0).all());
  CHECK((ens.particles.array() != 0.0).any());
}

TEST_CASE("cmd_sample writes a complete run directory") {
  TempDir tmp;
  const RunConfig cfg = tiny_config(tmp.file("run"));
  cmd_sample(cfg, true);

  const std::string manifest = slurp(tmp.file("run/manifest.txt"));
  CHECK(manifest.find("command = sample") != std::string::npos);
  CHECK(manifest.find("io.master_seed = 99") != std::string::npos);
  CHECK(manifest.find(std::string("fhtgibbs ") + kVersion) != std::string::npos);

  const SampleSet s = read_samples(tmp.file("run/samples.gls"));
  CHECK(s.points.rows() == 4);
  CHECK(s.points.cols() == 16);
  CHECK(!s.weighted());
  const SampleSet b = read_samples(tmp.file("run/samples_mala.gls"));
  CHECK(b.points.cols() == 16);

  const std::string trace = slurp(tmp.file("run/trace_ais.csv"));
  CHECK(trace.rfind("time,iota\n", 0) == 0);
  CHECK(count_lines(trace) >= 3);
  CHECK(fs::exists(tmp.file("run/trace_mala.csv")));
}

TEST_CASE("cmd_fit writes a model and a report") {
  TempDir tmp;
  RunConfig cfg = tiny_config(tmp.file("run"));
  cmd_sample(cfg, false);
  cmd_fit(cfg, tmp.file("run/samples.gls"));

  const FhtModel<double> model = read_model(tmp.file("run/model.fht"));
  CHECK(model.tree.dim() == 4);
  CHECK(model.basis.size() == 2 * 3 + 1);
  CHECK(fht_integral(model) == doctest::Approx(1.0).epsilon(1e-10));

  const std::string report = slurp(tmp.file("run/fit_report.txt"));
  CHECK(report.find("samples = 16") != std::string::npos);
  CHECK(report.find("normalization = ") != std::string::npos);
  CHECK(report.find("edge_rank node 1 = ") != std::string::npos);
  // 16 samples is far below any sane fitting regime
  CHECK(report.find("warning:") != std::string::npos);

  // dimension mismatch between samples and config is refused
  cfg.d = 8;
  CHECK_THROWS_AS(cmd_fit(cfg, tmp.file("run/samples.gls")), ValidationError);
}

TEST_CASE("parse_pairs") {
  const auto pairs = parse_pairs("0:1,2:3,1:1");
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::pair<int, int>(0, 1));
  CHECK(pairs[1] == std::pair<int, int>(2, 3));
  CHECK(pairs[2] == std::pair<int, int>(1, 1));
  CHECK(parse_pairs("").empty());
  CHECK_THROWS_AS((void)parse_pairs("0-1"), ValidationError);
  CHECK_THROWS_AS((void)parse_pairs("a:b"), ValidationError);
  CHECK_THROWS_AS((void)parse_pairs("0:1,,2:3"), ValidationError);
}

TEST_CASE("cmd_diagnose writes ratio, moment and marginal tables") {
  TempDir tmp;
  const RunConfig cfg = tiny_config(tmp.file("run"));
  cmd_sample(cfg, false);
  cmd_fit(cfg, tmp.file("run/samples.gls"));
  const auto pairs = parse_pairs("0:1,2:2");
  cmd_diagnose(cfg, tmp.file("run/samples.gls"), tmp.file("run/model.fht"), pairs);

  const std::string ratio = slurp(tmp.file("run/ratio.csv"));
  CHECK(ratio.rfind("source,iota,u_plus,u_minus\n", 0) == 0);
  CHECK(ratio.find("samples,") != std::string::npos);

  const std::string moments = slurp(tmp.file("run/moments.csv"));
  CHECK(moments.rfind("kind,i,j,sample,model\n", 0) == 0);
  // 4 mean rows + 2 second rows + header
  CHECK(count_lines(moments) == 1 + 4 + 2);
  CHECK(moments.find("mean,0,,") != std::string::npos);
  CHECK(moments.find("second,2,2,") != std::string::npos);

  // marginals written only for distinct-coordinate pairs
  const std::string emp = slurp(tmp.file("run/marginal_emp_0_1.csv"));
  CHECK(emp.rfind("# marginal of coordinates (0,1)", 0) == 0);
  CHECK(count_lines(emp) == 1 + kMarginalBins);
  CHECK(fs::exists(tmp.file("run/marginal_model_0_1.csv")));
  CHECK(!fs::exists(tmp.file("run/marginal_emp_2_2.csv")));

  // at least one input is required
  CHECK_THROWS_AS(cmd_diagnose(cfg, "", "", pairs), ValidationError);
}

TEST_CASE("cmd_diagnose works from a model alone and checks dimensions") {
  TempDir tmp;
  const RunConfig cfg = tiny_config(tmp.file("run"));
  cmd_sample(cfg, false);
  cmd_fit(cfg, tmp.file("run/samples.gls"));

  RunConfig cfg2 = tiny_config(tmp.file("only_model"));
  cmd_diagnose(cfg2, "", tmp.file("run/model.fht"), parse_pairs("0:1"));
  const std::string moments = slurp(tmp.file("only_model/moments.csv"));
  // sample column stays empty
  CHECK(moments.find("mean,0,,,") != std::string::npos);
  const std::string ratio = slurp(tmp.file("only_model/ratio.csv"));
  CHECK(ratio.find("samples,") == std::string::npos);

  // mismatched sample/model dimensions are refused
  RunConfig big = tiny_config(tmp.file("big"));
  big.d = 8;
  cmd_sample(big, false);
  CHECK_THROWS_AS(
      cmd_diagnose(big, tmp.file("big/samples.gls"), tmp.file("run/model.fht"), {}),
      ValidationError);
}

TEST_CASE("cmd_pipeline chains the three stages") {
  TempDir tmp;
  const RunConfig cfg = tiny_config(tmp.file("pipe"));
  cmd_pipeline(cfg, false, parse_pairs("0:3"));

  for (const char* name : {"samples.gls", "model.fht", "fit_report.txt", "trace_ais.csv",
                           "ratio.csv", "moments.csv", "marginal_emp_0_3.csv",
                           "marginal_model_0_3.csv"})
    CHECK(fs::exists(tmp.path / "pipe" / name));
  const std::string manifest = slurp(tmp.file("pipe/manifest.txt"));
  CHECK(manifest.find("command = pipeline") != std::string::npos);
}
