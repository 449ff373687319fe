#include <doctest.h>

#include <Eigen/Dense>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fhtgibbs/core/rng.hpp"
#include "fhtgibbs/io/formats.hpp"
#include "support/models.hpp"

using namespace fhtgibbs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fhtgibbs_fmt_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SampleSet make_samples(int d, int count, bool weighted, std::uint64_t seed) {
  RngStream rng(seed);
  SampleSet s;
  s.points.resize(d, count);
  for (int i = 0; i < s.points.size(); ++i) s.points.data()[i] = rng.normal();
  if (weighted) {
    s.log_weights.resize(count);
    for (int i = 0; i < count; ++i) s.log_weights[i] = -rng.uniform();
  }
  return s;
}

}  // namespace

TEST_CASE("sample sets round-trip bitwise") {
  TempDir tmp;
  for (const bool weighted : {false, true}) {
    CAPTURE(weighted);
    const SampleSet s = make_samples(5, 37, weighted, 11);
    const std::string path = tmp.file(weighted ? "w.gls" : "u.gls");
    write_samples(path, s);
    const SampleSet back = read_samples(path);
    REQUIRE(back.points.rows() == 5);
    REQUIRE(back.points.cols() == 37);
    CHECK((back.points.array() == s.points.array()).all());
    CHECK(back.weighted() == weighted);
    if (weighted) CHECK((back.log_weights.array() == s.log_weights.array()).all());
  }
}

TEST_CASE("sample files with special values survive round-trips") {
  TempDir tmp;
  SampleSet s;
  s.points.resize(2, 3);
  s.points << 0.0, -0.0, 1e-308, 1e308, -1.0, 0.1;
  write_samples(tmp.file("s.gls"), s);
  const SampleSet back = read_samples(tmp.file("s.gls"));
  // bit-level equality distinguishes -0.0 from 0.0
  for (int i = 0; i < 6; ++i)
    CHECK(std::bit_cast<std::uint64_t>(back.points.data()[i]) ==
          std::bit_cast<std::uint64_t>(s.points.data()[i]));
}

TEST_CASE("sample reader rejects corrupt and truncated input") {
  TempDir tmp;
  const SampleSet s = make_samples(3, 8, true, 12);
  const std::string good = tmp.file("good.gls");
  write_samples(good, s);
  const std::vector<char> bytes = slurp(good);

  SUBCASE("bad magic") {
    std::vector<char> bad = bytes;
    bad[0] = 'X';
    dump(tmp.file("bad.gls"), bad);
    CHECK_THROWS_AS((void)read_samples(tmp.file("bad.gls")), FormatError);
  }
  SUBCASE("unknown flag bits") {
    std::vector<char> bad = bytes;
    bad[20] = 0x04;  // flags live at bytes 20..27
    dump(tmp.file("bad.gls"), bad);
    CHECK_THROWS_WITH_AS((void)read_samples(tmp.file("bad.gls")),
                         doctest::Contains("unknown flag"), FormatError);
  }
  SUBCASE("truncated mid-row reports a byte offset") {
    // 28-byte header + full row 0 (24 bytes) + 4 stray bytes of row 1
    std::vector<char> bad(bytes.begin(), bytes.begin() + 28 + 3 * 8 + 4);
    dump(tmp.file("bad.gls"), bad);
    try {
      (void)read_samples(tmp.file("bad.gls"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("truncated") != std::string::npos);
      CHECK(msg.find("byte 52") != std::string::npos);  // row 1 begins at byte 52
      CHECK(msg.find("sample row 1") != std::string::npos);
    }
  }
  SUBCASE("missing weight block") {
    std::vector<char> bad(bytes.begin(), bytes.end() - 8);
    dump(tmp.file("bad.gls"), bad);
    CHECK_THROWS_WITH_AS((void)read_samples(tmp.file("bad.gls")),
                         doctest::Contains("log-weight block"), FormatError);
  }
  SUBCASE("trailing bytes") {
    std::vector<char> bad = bytes;
    bad.push_back('\0');
    dump(tmp.file("bad.gls"), bad);
    CHECK_THROWS_WITH_AS((void)read_samples(tmp.file("bad.gls")),
                         doctest::Contains("trailing data"), FormatError);
  }
  SUBCASE("nonexistent file") {
    CHECK_THROWS_AS((void)read_samples(tmp.file("nope.gls")), FormatError);
  }
  SUBCASE("implausible dimension") {
    std::vector<char> bad = bytes;
    bad[4] = 0;  // dimension -> 0 (little-endian low byte; others already 0)
    for (int i = 5; i < 12; ++i) bad[static_cast<std::size_t>(i)] = 0;
    dump(tmp.file("bad.gls"), bad);
    CHECK_THROWS_WITH_AS((void)read_samples(tmp.file("bad.gls")),
                         doctest::Contains("implausible dimension"), FormatError);
  }
}

TEST_CASE("models round-trip bitwise including uneven ranks") {
  TempDir tmp;
  const auto tree = DimensionTree::build(8);
  const FourierBasis<double> basis(4, 1.5);
  const FhtModel<double> m = testsup::random_model(tree, basis, 4, 21);
  const std::string path = tmp.file("m.fht");
  write_model(path, m);
  const FhtModel<double> back = read_model(path);

  CHECK(back.tree.dim() == 8);
  CHECK(back.tree.site_order() == SiteOrder::Identity);
  CHECK(back.basis.size() == m.basis.size());
  CHECK(back.basis.half_width() == m.basis.half_width());
  CHECK((back.root_core.array() == m.root_core.array()).all());
  for (int id = 1; id < tree.node_count(); ++id) {
    CHECK(back.edge_rank(id) == m.edge_rank(id));
    if (tree.is_leaf(id)) {
      const auto& a = back.leaf_cores[static_cast<std::size_t>(tree.leaf_index(id))];
      const auto& b = m.leaf_cores[static_cast<std::size_t>(tree.leaf_index(id))];
      CHECK((a.array() == b.array()).all());
    } else {
      const auto& a = back.cores[static_cast<std::size_t>(id)];
      const auto& b = m.cores[static_cast<std::size_t>(id)];
      CHECK((a.raw().array() == b.raw().array()).all());
    }
  }

  // identical bytes when rewritten
  write_model(tmp.file("m2.fht"), back);
  CHECK(slurp(tmp.file("m2.fht")) == slurp(path));
}

TEST_CASE("models preserve the site order tag") {
  TempDir tmp;
  const auto tree = DimensionTree::build(16, SiteOrder::Morton2D);
  const FourierBasis<double> basis(2, 1.0);
  const FhtModel<double> m = testsup::random_model(tree, basis, 2, 31);
  write_model(tmp.file("m.fht"), m);
  const FhtModel<double> back = read_model(tmp.file("m.fht"));
  CHECK(back.tree.site_order() == SiteOrder::Morton2D);
  CHECK(back.tree.leaf_site(1) == tree.leaf_site(1));
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(16, -0.9, 0.9);
  CHECK(fht_eval(back, x) == fht_eval(m, x));
}

TEST_CASE("model reader rejects corrupt input") {
  TempDir tmp;
  const auto tree = DimensionTree::build(4);
  const FourierBasis<double> basis(2, 1.0);
  const FhtModel<double> m = testsup::random_model(tree, basis, 3, 41);
  const std::string good = tmp.file("good.fht");
  write_model(good, m);
  const std::vector<char> bytes = slurp(good);

  SUBCASE("bad magic") {
    std::vector<char> bad = bytes;
    bad[3] = '9';
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")), doctest::Contains("bad magic"),
                         FormatError);
  }
  SUBCASE("dimension/levels mismatch") {
    std::vector<char> bad = bytes;
    bad[12] = 5;  // levels u64 at bytes 12..19; 2^5 != 4
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")),
                         doctest::Contains("inconsistent dimension"), FormatError);
  }
  SUBCASE("zero rank") {
    std::vector<char> bad = bytes;
    // first edge rank follows the 44-byte header
    for (int i = 44; i < 52; ++i) bad[static_cast<std::size_t>(i)] = 0;
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")), doctest::Contains("bad rank"),
                         FormatError);
  }
  SUBCASE("core shape mismatch") {
    std::vector<char> bad = bytes;
    // root core dims start right after 6 u64 edge ranks
    const std::size_t at = 44 + 6 * 8;
    bad[at] = static_cast<char>(bad[at] + 1);
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")), doctest::Contains("shape"),
                         FormatError);
  }
  SUBCASE("truncated core data") {
    std::vector<char> bad(bytes.begin(), bytes.end() - 8);
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")), doctest::Contains("truncated"),
                         FormatError);
  }
  SUBCASE("trailing bytes") {
    std::vector<char> bad = bytes;
    bad.insert(bad.end(), {'x', 'y'});
    dump(tmp.file("bad.fht"), bad);
    CHECK_THROWS_WITH_AS((void)read_model(tmp.file("bad.fht")), doctest::Contains("trailing data"),
                         FormatError);
  }
}

TEST_CASE("weight count mismatches are refused at write time") {
  TempDir tmp;
  SampleSet s = make_samples(2, 4, true, 51);
  s.log_weights.conservativeResize(3);
  CHECK_THROWS_AS(write_samples(tmp.file("s.gls"), s), ValidationError);
}
