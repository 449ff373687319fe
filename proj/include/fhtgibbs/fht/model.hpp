#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/log.hpp"
#include "fhtgibbs/fht/basis.hpp"
#include "fhtgibbs/fht/tensor3.hpp"
#include "fhtgibbs/fht/tree.hpp"

namespace fhtgibbs {

// Functional hierarchical tensor density over [-w, w]^d:
//   p(x) = sum over tree indices of root(a,b) * products of internal cores
//          G_q(child_a, child_b, parent) and leaf cores C_j(i, a) psi_i(x_j).
// Cores for internal nodes are indexed by heap node id; leaf cores by leaf
// position. Edge ranks live on (node, parent) edges.
template <typename Scalar = double>
struct FhtModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  DimensionTree tree;
  FourierBasis<Scalar> basis;
  std::vector<Matrix> leaf_cores;       // by leaf position: n x rank(leaf edge)
  std::vector<Tensor3<Scalar>> cores;   // by node id, internal non-root only
  Matrix root_core;                     // rank(left edge) x rank(right edge)

  int edge_rank(int id) const {
    tree.check_node(id);
    if (tree.is_root(id)) throw ValidationError("model: root has no parent edge");
    if (tree.is_leaf(id))
      return static_cast<int>(leaf_cores[static_cast<std::size_t>(tree.leaf_index(id))].cols());
    return static_cast<int>(cores[static_cast<std::size_t>(id)].n3());
  }

  void validate() const {
    const int d = tree.dim();
    if (static_cast<int>(leaf_cores.size()) != d)
      throw ValidationError("model: expected " + std::to_string(d) + " leaf cores");
    if (static_cast<int>(cores.size()) != tree.node_count())
      throw ValidationError("model: core table size mismatch");
    const int n = basis.size();
    for (int j = 0; j < d; ++j)
      if (leaf_cores[static_cast<std::size_t>(j)].rows() != n)
        throw ValidationError("model: leaf " + std::to_string(j) + " has " +
                              std::to_string(leaf_cores[static_cast<std::size_t>(j)].rows()) +
                              " basis rows, expected " + std::to_string(n));
    for (int id = 1; id < tree.node_count(); ++id) {
      if (tree.is_leaf(id)) continue;
      const auto& g = cores[static_cast<std::size_t>(id)];
      if (g.n1() != edge_rank(DimensionTree::left(id)) ||
          g.n2() != edge_rank(DimensionTree::right(id)))
        throw ValidationError("model: core shape mismatch at node " + std::to_string(id));
    }
    if (root_core.rows() != edge_rank(DimensionTree::left(0)) ||
        root_core.cols() != edge_rank(DimensionTree::right(0)))
      throw ValidationError("model: root core shape mismatch");
  }
};

// Upward contraction with per-leaf input vectors (basis values, integrals,
// or any custom weighting). leaf_vec(j) must return an n-vector.
template <typename Scalar, typename LeafFn>
Scalar contract_leafwise(const FhtModel<Scalar>& m, LeafFn&& leaf_vec) {
  using Vector = typename FhtModel<Scalar>::Vector;
  const int nodes = m.tree.node_count();
  std::vector<Vector> msg(static_cast<std::size_t>(nodes));
  for (int id = nodes - 1; id >= 1; --id) {
    if (m.tree.is_leaf(id)) {
      const int j = m.tree.leaf_index(id);
      msg[static_cast<std::size_t>(id)] =
          m.leaf_cores[static_cast<std::size_t>(j)].transpose() * leaf_vec(j);
    } else {
      msg[static_cast<std::size_t>(id)] = m.cores[static_cast<std::size_t>(id)].contract12(
          msg[static_cast<std::size_t>(DimensionTree::left(id))],
          msg[static_cast<std::size_t>(DimensionTree::right(id))]);
    }
  }
  return msg[static_cast<std::size_t>(DimensionTree::left(0))]
      .dot(m.root_core * msg[static_cast<std::size_t>(DimensionTree::right(0))]);
}

// Point evaluation; x is in state (site) coordinates.
template <typename Scalar>
Scalar fht_eval(const FhtModel<Scalar>& m,
                const Eigen::Ref<const typename FhtModel<Scalar>::Vector>& x) {
  if (x.size() != m.tree.dim()) throw ValidationError("fht_eval: dimension mismatch");
  typename FhtModel<Scalar>::Vector psi(m.basis.size());
  return contract_leafwise(m, [&](int leaf) {
    m.basis.eval_into(x[m.tree.leaf_site(leaf)], psi);
    return psi;
  });
}

template <typename Scalar>
Scalar fht_integral(const FhtModel<Scalar>& m) {
  const typename FhtModel<Scalar>::Vector iv = m.basis.integral();
  return contract_leafwise(m, [&](int) { return iv; });
}

// Rescales the root core so the model integrates to exactly 1; returns the
// prior integral. A negative integral flips the sign of the whole model.
template <typename Scalar>
Scalar normalize(FhtModel<Scalar>& m) {
  const Scalar z = fht_integral(m);
  if (!std::isfinite(static_cast<double>(z)) || z == Scalar(0))
    throw NumericalError("normalize: model integral is zero or non-finite");
  if (z < Scalar(0)) warn("normalize: model integral is negative, flipping sign");
  m.root_core /= z;
  return z;
}

namespace detail {

// Message carrying up to two grid axes; size-1 axes broadcast.
template <typename Scalar>
Tensor3<Scalar> combine_grid(const Tensor3<Scalar>& core_or_root_left,
                             const Tensor3<Scalar>& lhs, const Tensor3<Scalar>& rhs) {
  // core shape (rl, rr, rp); lhs (g1l, g2l, rl); rhs (g1r, g2r, rr)
  const auto& g = core_or_root_left;
  const Eigen::Index g1 = std::max(lhs.n1(), rhs.n1());
  const Eigen::Index g2 = std::max(lhs.n2(), rhs.n2());
  Tensor3<Scalar> out(g1, g2, g.n3());
  typename FhtModel<Scalar>::Vector vl(g.n1()), vr(g.n2()), vo(g.n3());
  for (Eigen::Index a = 0; a < g1; ++a) {
    const Eigen::Index la = std::min(a, lhs.n1() - 1), ra = std::min(a, rhs.n1() - 1);
    for (Eigen::Index b = 0; b < g2; ++b) {
      const Eigen::Index lb = std::min(b, lhs.n2() - 1), rb = std::min(b, rhs.n2() - 1);
      for (Eigen::Index i = 0; i < g.n1(); ++i) vl[i] = lhs(la, lb, i);
      for (Eigen::Index i = 0; i < g.n2(); ++i) vr[i] = rhs(ra, rb, i);
      vo = g.contract12(vl, vr);
      for (Eigen::Index k = 0; k < g.n3(); ++k) out(a, b, k) = vo[k];
    }
  }
  return out;
}

}  // namespace detail

// Exact marginal of the model over one or two state coordinates, evaluated on
// the tensor grid pts_i x pts_j (pass site_j = -1 for a single-site marginal;
// then the result has one column).
template <typename Scalar>
typename FhtModel<Scalar>::Matrix marginal_grid(
    const FhtModel<Scalar>& m, int site_i,
    const Eigen::Ref<const typename FhtModel<Scalar>::Vector>& pts_i, int site_j = -1,
    const Eigen::Ref<const typename FhtModel<Scalar>::Vector>& pts_j =
        typename FhtModel<Scalar>::Vector()) {
  using Matrix = typename FhtModel<Scalar>::Matrix;
  using T3 = Tensor3<Scalar>;
  const int d = m.tree.dim();
  if (site_i < 0 || site_i >= d || (site_j >= 0 && site_j >= d))
    throw ValidationError("marginal: site index out of range");
  if (site_j == site_i) throw ValidationError("marginal: sites must be distinct");
  if (pts_i.size() < 1 || (site_j >= 0 && pts_j.size() < 1))
    throw ValidationError("marginal: empty grid");
  const int leaf_i = m.tree.site_leaf(site_i);
  const int leaf_j = site_j >= 0 ? m.tree.site_leaf(site_j) : -1;

  const int nodes = m.tree.node_count();
  std::vector<T3> msg(static_cast<std::size_t>(nodes));
  const typename FhtModel<Scalar>::Vector iv = m.basis.integral();
  for (int id = nodes - 1; id >= 1; --id) {
    if (m.tree.is_leaf(id)) {
      const int leaf = m.tree.leaf_index(id);
      const auto& core = m.leaf_cores[static_cast<std::size_t>(leaf)];
      if (leaf == leaf_i || leaf == leaf_j) {
        const auto& pts = leaf == leaf_i ? pts_i : pts_j;
        Matrix vals = m.basis.eval_grid(pts) * core;  // g x r
        T3 t(leaf == leaf_i ? vals.rows() : 1, leaf == leaf_i ? 1 : vals.rows(), vals.cols());
        for (Eigen::Index p = 0; p < vals.rows(); ++p)
          for (Eigen::Index k = 0; k < vals.cols(); ++k)
            (leaf == leaf_i ? t(p, 0, k) : t(0, p, k)) = vals(p, k);
        msg[static_cast<std::size_t>(id)] = std::move(t);
      } else {
        T3 t(1, 1, core.cols());
        typename FhtModel<Scalar>::Vector v = core.transpose() * iv;
        for (Eigen::Index k = 0; k < v.size(); ++k) t(0, 0, k) = v[k];
        msg[static_cast<std::size_t>(id)] = std::move(t);
      }
    } else {
      msg[static_cast<std::size_t>(id)] = detail::combine_grid(
          m.cores[static_cast<std::size_t>(id)],
          msg[static_cast<std::size_t>(DimensionTree::left(id))],
          msg[static_cast<std::size_t>(DimensionTree::right(id))]);
    }
  }
  // root: treat the root matrix as a (rl, rr, 1) core
  T3 root(m.root_core.rows(), m.root_core.cols(), 1);
  for (Eigen::Index a = 0; a < m.root_core.rows(); ++a)
    for (Eigen::Index b = 0; b < m.root_core.cols(); ++b) root(a, b, 0) = m.root_core(a, b);
  const T3 all = detail::combine_grid(root, msg[1], msg[2]);
  Matrix out(all.n1(), all.n2());
  for (Eigen::Index a = 0; a < all.n1(); ++a)
    for (Eigen::Index b = 0; b < all.n2(); ++b) out(a, b) = all(a, b, 0);
  return out;
}

}  // namespace fhtgibbs
