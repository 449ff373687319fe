#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

enum class SiteOrder { Identity, Morton2D };

inline std::string to_string(SiteOrder o) {
  return o == SiteOrder::Identity ? "identity" : "morton2d";
}

// Balanced binary dimension tree over d = 2^levels variables, stored
// implicitly in heap order: node 0 is the root, children of x are 2x+1 and
// 2x+2. The node at level l, position k covers leaves [k 2^(L-l), (k+1)
// 2^(L-l)). leaf_site maps leaf position to state-vector index; Morton2D
// interleaves grid row/column bits so spatially close sites share subtrees.
class DimensionTree {
 public:
  static DimensionTree build(int d, SiteOrder order = SiteOrder::Identity) {
    if (d < 2) throw ValidationError("tree: need at least 2 variables");
    int levels = 0;
    while ((1 << levels) < d) ++levels;
    if ((1 << levels) != d)
      throw ValidationError("tree: dimension " + std::to_string(d) + " is not a power of two");
    DimensionTree t;
    t.d_ = d;
    t.levels_ = levels;
    t.order_ = order;
    t.leaf_site_.resize(static_cast<std::size_t>(d));
    if (order == SiteOrder::Identity) {
      for (int i = 0; i < d; ++i) t.leaf_site_[static_cast<std::size_t>(i)] = i;
    } else {
      if (levels % 2 != 0)
        throw ValidationError("tree: Morton order needs d to be a power of four");
      const int half = levels / 2;
      const int m = 1 << half;
      for (int code = 0; code < d; ++code) {
        int row = 0, col = 0;
        for (int b = 0; b < half; ++b) {
          col |= ((code >> (2 * b)) & 1) << b;
          row |= ((code >> (2 * b + 1)) & 1) << b;
        }
        t.leaf_site_[static_cast<std::size_t>(code)] = row * m + col;
      }
    }
    t.site_leaf_.resize(static_cast<std::size_t>(d));
    for (int leaf = 0; leaf < d; ++leaf)
      t.site_leaf_[static_cast<std::size_t>(t.leaf_site_[static_cast<std::size_t>(leaf)])] = leaf;
    return t;
  }

  int dim() const { return d_; }
  int levels() const { return levels_; }
  SiteOrder site_order() const { return order_; }
  int node_count() const { return 2 * d_ - 1; }
  int internal_count() const { return d_ - 1; }

  static int parent(int id) { return (id - 1) / 2; }
  static int left(int id) { return 2 * id + 1; }
  static int right(int id) { return 2 * id + 2; }

  bool is_root(int id) const { return id == 0; }
  bool is_leaf(int id) const { return id >= d_ - 1; }

  int level_of(int id) const {
    int level = 0;
    while ((2 << level) - 1 <= id) ++level;
    return level;
  }

  int leaf_id(int leaf) const { return d_ - 1 + leaf; }
  int leaf_index(int id) const { return id - (d_ - 1); }

  int leaf_site(int leaf) const { return leaf_site_[static_cast<std::size_t>(leaf)]; }
  int site_leaf(int site) const { return site_leaf_[static_cast<std::size_t>(site)]; }
  const std::vector<int>& leaf_sites() const { return leaf_site_; }

  // Leaf range covered by a node, as [lo, hi) leaf positions.
  std::pair<int, int> leaf_range(int id) const {
    int lo = id, width = 1;
    while (lo < d_ - 1) {
      lo = left(lo);
      width *= 2;
    }
    const int first = leaf_index(lo);
    return {first, first + width};
  }

  void check_node(int id) const {
    if (id < 0 || id >= node_count())
      throw ValidationError("tree: node " + std::to_string(id) + " out of range");
  }

 private:
  int d_ = 0;
  int levels_ = 0;
  SiteOrder order_ = SiteOrder::Identity;
  std::vector<int> leaf_site_;
  std::vector<int> site_leaf_;
};

}  // namespace fhtgibbs
