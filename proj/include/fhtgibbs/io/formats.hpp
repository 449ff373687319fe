#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/fht/model.hpp"
#include "fhtgibbs/io/bytes.hpp"

namespace fhtgibbs {

// Sample container: "GLS1", u64 dimension, u64 count, u64 flags, then count
// rows of d doubles (one sample per row), then count log-weights if flagged.
inline constexpr std::uint64_t kSamplesHaveLogWeights = 1;

struct SampleSet {
  Eigen::MatrixXd points;       // d x count
  Eigen::VectorXd log_weights;  // empty if unweighted
  bool weighted() const { return log_weights.size() > 0; }
};

inline void write_samples(const std::string& path, const SampleSet& s) {
  if (s.weighted() && s.log_weights.size() != s.points.cols())
    throw ValidationError("samples: weight count mismatch");
  ByteWriter w(path);
  w.magic("GLS1");
  w.u64(static_cast<std::uint64_t>(s.points.rows()));
  w.u64(static_cast<std::uint64_t>(s.points.cols()));
  w.u64(s.weighted() ? kSamplesHaveLogWeights : 0);
  // row-major sample rows; points are stored column-per-sample in memory
  std::vector<double> row(static_cast<std::size_t>(s.points.rows()));
  for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
    for (Eigen::Index r = 0; r < s.points.rows(); ++r)
      row[static_cast<std::size_t>(r)] = s.points(r, c);
    w.f64_array(row.data(), row.size());
  }
  if (s.weighted()) w.f64_array(s.log_weights.data(), static_cast<std::size_t>(s.log_weights.size()));
  w.close();
}

inline SampleSet read_samples(const std::string& path) {
  ByteReader r(path);
  r.magic("GLS1", "sample file header");
  const std::uint64_t d = r.u64("dimension");
  const std::uint64_t count = r.u64("sample count");
  const std::uint64_t flags = r.u64("flags");
  if (d == 0 || d > (1ull << 24))
    throw FormatError(path + ": implausible dimension " + std::to_string(d) + " at byte 4");
  if (flags & ~kSamplesHaveLogWeights)
    throw FormatError(path + ": unknown flag bits at byte 20");
  SampleSet s;
  s.points.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  std::vector<double> row(static_cast<std::size_t>(d));
  for (std::uint64_t c = 0; c < count; ++c) {
    r.f64_array(row.data(), row.size(), "sample row " + std::to_string(c));
    for (std::uint64_t k = 0; k < d; ++k)
      s.points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
          row[static_cast<std::size_t>(k)];
  }
  if (flags & kSamplesHaveLogWeights) {
    s.log_weights.resize(static_cast<Eigen::Index>(count));
    r.f64_array(s.log_weights.data(), static_cast<std::size_t>(count), "log-weight block");
  }
  r.expect_eof("sample data");
  return s;
}

// Model container: "FHT1", header (d, levels, basis size, half-width, site
// order), edge ranks for nodes 1..2d-2 in id (level) order, then cores in id
// order: root matrix, internal tensors, leaf matrices. Every core is stored
// as three u64 dims plus column-major doubles (first index fastest).
inline void write_model(const std::string& path, const FhtModel<double>& m) {
  m.validate();
  ByteWriter w(path);
  w.magic("FHT1");
  w.u64(static_cast<std::uint64_t>(m.tree.dim()));
  w.u64(static_cast<std::uint64_t>(m.tree.levels()));
  w.u64(static_cast<std::uint64_t>(m.basis.size()));
  w.f64(m.basis.half_width());
  w.u64(m.tree.site_order() == SiteOrder::Identity ? 0 : 1);
  for (int id = 1; id < m.tree.node_count(); ++id)
    w.u64(static_cast<std::uint64_t>(m.edge_rank(id)));
  auto put_matrix = [&](const Eigen::MatrixXd& a) {
    w.u64(static_cast<std::uint64_t>(a.rows()));
    w.u64(static_cast<std::uint64_t>(a.cols()));
    w.u64(1);
    w.f64_array(a.data(), static_cast<std::size_t>(a.size()));
  };
  put_matrix(m.root_core);
  for (int id = 1; id < m.tree.node_count(); ++id) {
    if (m.tree.is_leaf(id)) {
      put_matrix(m.leaf_cores[static_cast<std::size_t>(m.tree.leaf_index(id))]);
    } else {
      const auto& t = m.cores[static_cast<std::size_t>(id)];
      w.u64(static_cast<std::uint64_t>(t.n1()));
      w.u64(static_cast<std::uint64_t>(t.n2()));
      w.u64(static_cast<std::uint64_t>(t.n3()));
      w.f64_array(t.raw().data(), static_cast<std::size_t>(t.size()));
    }
  }
  w.close();
}

inline FhtModel<double> read_model(const std::string& path) {
  ByteReader r(path);
  r.magic("FHT1", "model file header");
  const std::uint64_t d = r.u64("dimension");
  const std::uint64_t levels = r.u64("tree levels");
  const std::uint64_t n = r.u64("basis size");
  const double half_width = r.f64("half-width");
  const std::uint64_t order_tag = r.u64("site order");
  if (d < 2 || d > (1ull << 24) || (1ull << levels) != d)
    throw FormatError(path + ": inconsistent dimension/levels in header");
  if (n < 3 || n % 2 == 0) throw FormatError(path + ": basis size must be odd and >= 3");
  if (!(half_width > 0)) throw FormatError(path + ": half-width must be positive");
  if (order_tag > 1) throw FormatError(path + ": unknown site order tag");
  FhtModel<double> m;
  m.tree = DimensionTree::build(static_cast<int>(d),
                                order_tag == 0 ? SiteOrder::Identity : SiteOrder::Morton2D);
  m.basis = FourierBasis<double>(static_cast<int>((n - 1) / 2), half_width);
  const int nodes = m.tree.node_count();
  std::vector<std::uint64_t> rank(static_cast<std::size_t>(nodes), 0);
  for (int id = 1; id < nodes; ++id) {
    rank[static_cast<std::size_t>(id)] = r.u64("edge rank");
    if (rank[static_cast<std::size_t>(id)] == 0 || rank[static_cast<std::size_t>(id)] > (1ull << 20))
      throw FormatError(path + ": bad rank for node " + std::to_string(id) + " near byte " +
                        std::to_string(r.offset()));
  }
  auto get_shape = [&](std::uint64_t want1, std::uint64_t want2, std::uint64_t want3,
                       const std::string& what) {
    const std::uint64_t n1 = r.u64(what + " dim 1");
    const std::uint64_t n2 = r.u64(what + " dim 2");
    const std::uint64_t n3 = r.u64(what + " dim 3");
    if (n1 != want1 || n2 != want2 || n3 != want3)
      throw FormatError(path + ": " + what + " has shape " + std::to_string(n1) + "x" +
                        std::to_string(n2) + "x" + std::to_string(n3) + ", expected " +
                        std::to_string(want1) + "x" + std::to_string(want2) + "x" +
                        std::to_string(want3) + " near byte " + std::to_string(r.offset()));
  };
  m.leaf_cores.resize(static_cast<std::size_t>(d));
  m.cores.resize(static_cast<std::size_t>(nodes));
  get_shape(rank[1], rank[2], 1, "root core");
  m.root_core.resize(static_cast<Eigen::Index>(rank[1]), static_cast<Eigen::Index>(rank[2]));
  r.f64_array(m.root_core.data(), static_cast<std::size_t>(m.root_core.size()), "root core data");
  for (int id = 1; id < nodes; ++id) {
    if (m.tree.is_leaf(id)) {
      const std::string what = "leaf core " + std::to_string(m.tree.leaf_index(id));
      get_shape(n, rank[static_cast<std::size_t>(id)], 1, what);
      auto& c = m.leaf_cores[static_cast<std::size_t>(m.tree.leaf_index(id))];
      c.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rank[static_cast<std::size_t>(id)]));
      r.f64_array(c.data(), static_cast<std::size_t>(c.size()), what + " data");
    } else {
      const std::string what = "core at node " + std::to_string(id);
      get_shape(rank[static_cast<std::size_t>(DimensionTree::left(id))],
                rank[static_cast<std::size_t>(DimensionTree::right(id))],
                rank[static_cast<std::size_t>(id)], what);
      Tensor3<double> t(static_cast<Eigen::Index>(rank[static_cast<std::size_t>(DimensionTree::left(id))]),
                        static_cast<Eigen::Index>(rank[static_cast<std::size_t>(DimensionTree::right(id))]),
                        static_cast<Eigen::Index>(rank[static_cast<std::size_t>(id)]));
      r.f64_array(t.raw().data(), static_cast<std::size_t>(t.size()), what + " data");
      m.cores[static_cast<std::size_t>(id)] = std::move(t);
    }
  }
  r.expect_eof("model data");
  m.validate();
  return m;
}

}  // namespace fhtgibbs
