#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fhtgibbs/io/config.hpp"

using namespace fhtgibbs;

TEST_CASE("defaults validate") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.geometry == Geometry::Chain1D);
  CHECK(cfg.schedule == ScheduleKind::Geometric);
  CHECK(cfg.init == "uniform");
  CHECK(cfg.baseline_time == 0.0);
}

TEST_CASE("render -> parse -> render is a fixpoint") {
  RunConfig cfg;
  cfg.geometry = Geometry::Grid2D;
  cfg.d = 256;
  cfg.lambda_factor = 0.125;
  cfg.cubic_a = 0.01;
  cfg.beta0 = 3.0;
  cfg.beta = 20.0;
  cfg.schedule = ScheduleKind::Linear;
  cfg.levels = 7;
  cfg.mala_steps = 321;
  cfg.dt = 1.25e-4;
  cfg.scale = 7.5;
  cfg.n_ensembles = 3;
  cfg.particles = 17;
  cfg.ula_substeps = 5;
  cfg.stretch_a = 1.9;
  cfg.init = "minus";
  cfg.burnin_time = 12.5;
  cfg.baseline_time = 3.75;
  cfg.trace_stride = 11;
  cfg.q = 9;
  cfg.half_width = 1.75;
  cfg.rank = 6;
  cfg.oversampling = 1.6;
  cfg.svd_tol = 2.5e-7;
  cfg.sketch_seed = 0xdeadbeefdeadbeefULL;
  cfg.grid_resolution = 640;
  cfg.out_dir = "runs/x1";
  cfg.master_seed = 42;
  cfg.workers = 4;

  const std::string text = render_config(cfg);
  const RunConfig back = parse_config_text(text);
  CHECK(render_config(back) == text);
  CHECK(back.geometry == Geometry::Grid2D);
  CHECK(back.dt == cfg.dt);
  CHECK(back.svd_tol == cfg.svd_tol);
  CHECK(back.sketch_seed == cfg.sketch_seed);
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(back.init == "minus");
}

TEST_CASE("parser handles comments, blanks and whitespace") {
  const std::string text =
      "# full-line comment\n"
      "\n"
      "   potential.d =  64   # trailing comment\n"
      "\tsampler.beta =\t9.5\n"
      "sampler.init=plus\n";
  const RunConfig cfg = parse_config_text(text);
  CHECK(cfg.d == 64);
  CHECK(cfg.beta == 9.5);
  CHECK(cfg.init == "plus");
  // untouched keys keep defaults
  CHECK(cfg.levels == RunConfig().levels);
}

TEST_CASE("unknown keys are hard errors") {
  CHECK_THROWS_WITH_AS(parse_config_text("potential.dd = 3\n"),
                       doctest::Contains("unknown key"), ValidationError);
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "sampler.step", "0.1"),
                       doctest::Contains("unknown key 'sampler.step'"), ValidationError);
}

TEST_CASE("malformed lines are rejected with line numbers") {
  CHECK_THROWS_WITH_AS(parse_config_text("potential.d = 32\nnonsense\n"),
                       doctest::Contains("line 2"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text(" = 3\n"), doctest::Contains("line 1"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("potential.d =\n"), doctest::Contains("empty key or value"),
                       ValidationError);
}

TEST_CASE("values are type- and range-checked") {
  CHECK_THROWS_WITH_AS(parse_config_text("potential.d = abc\n"),
                       doctest::Contains("non-numeric"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("potential.d = 3.5\n"),
                       doctest::Contains("expects an integer"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("sampler.dt = 0.1x\n"),
                       doctest::Contains("trailing junk"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("potential.d = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("potential.lambda_factor = 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("sampler.beta0 = 2\nsampler.beta = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("sampler.dt = -0.1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("sampler.stretch_a = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("sampler.init = sideways\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("fht.oversampling = 1.2\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("fht.svd_tol = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("fht.grid_resolution = 32\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("io.workers = 0\n"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("potential.geometry = hex\n"),
                       doctest::Contains("chain1d or grid2d"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("sampler.schedule = cosine\n"),
                       doctest::Contains("linear or geometric"), ValidationError);
}

TEST_CASE("apply_config_line mutates a single field") {
  RunConfig cfg;
  apply_config_line(cfg, "fht.rank", "9");
  CHECK(cfg.rank == 9);
  apply_config_line(cfg, "io.master_seed", "18446744073709551615");
  CHECK(cfg.master_seed == 0xffffffffffffffffULL);
  apply_config_line(cfg, "sampler.schedule", "linear");
  CHECK(cfg.schedule == ScheduleKind::Linear);
  // negative values cannot masquerade as u64 seeds
  CHECK_THROWS_AS(apply_config_line(cfg, "io.master_seed", "-1"), ValidationError);
}

TEST_CASE("load_config reads files and layers onto a base") {
  const std::string path = "/tmp/fhtgibbs_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "sampler.particles = 5\n";
  }
  RunConfig base;
  base.levels = 3;
  const RunConfig cfg = load_config(path, base);
  CHECK(cfg.particles == 5);
  CHECK(cfg.levels == 3);  // base survives
  std::remove(path.c_str());
  CHECK_THROWS_WITH_AS(load_config("/nonexistent/nope.cfg"), doctest::Contains("cannot open"),
                       ValidationError);
}
