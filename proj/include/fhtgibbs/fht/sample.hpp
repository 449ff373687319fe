#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/parallel.hpp"
#include "fhtgibbs/core/rng.hpp"
#include "fhtgibbs/fht/model.hpp"

namespace fhtgibbs {

// Draws exact samples from a normalized model by sweeping leaves in tree
// order: each site's conditional density (given fixed earlier sites,
// integrated later sites) is tabulated on a midpoint grid, clipped at zero,
// and inverted with a uniform jitter inside the selected cell. Messages for
// already-fixed subtrees are cached and only the changed path is recomputed.
template <typename Scalar = double>
class FhtSampler {
 public:
  using Matrix = typename FhtModel<Scalar>::Matrix;
  using Vector = typename FhtModel<Scalar>::Vector;

  FhtSampler(const FhtModel<Scalar>& model, int grid_resolution)
      : m_(model), grid_(grid_resolution) {
    if (grid_resolution < 64)
      throw ValidationError("sampler: grid resolution must be >= 64");
    m_.validate();
    const Scalar w = m_.basis.half_width();
    cell_ = Scalar(2) * w / Scalar(grid_);
    Vector centers(grid_);
    for (int c = 0; c < grid_; ++c) centers[c] = -w + (Scalar(c) + Scalar(0.5)) * cell_;
    const Matrix psi_grid = m_.basis.eval_grid(centers);
    const int d = m_.tree.dim();
    leaf_grid_.reserve(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      leaf_grid_.push_back(psi_grid * m_.leaf_cores[static_cast<std::size_t>(j)]);
    const Vector iv = m_.basis.integral();
    int_msg_.resize(static_cast<std::size_t>(m_.tree.node_count()));
    for (int id = m_.tree.node_count() - 1; id >= 1; --id) {
      if (m_.tree.is_leaf(id)) {
        const int j = m_.tree.leaf_index(id);
        int_msg_[static_cast<std::size_t>(id)] =
            m_.leaf_cores[static_cast<std::size_t>(j)].transpose() * iv;
      } else {
        int_msg_[static_cast<std::size_t>(id)] =
            m_.cores[static_cast<std::size_t>(id)].contract12(
                int_msg_[static_cast<std::size_t>(DimensionTree::left(id))],
                int_msg_[static_cast<std::size_t>(DimensionTree::right(id))]);
      }
    }
  }

  const FhtModel<Scalar>& model() const { return m_; }
  int grid_resolution() const { return grid_; }

  Eigen::VectorXd draw(RngStream& rng) const {
    const int d = m_.tree.dim();
    const Scalar w = m_.basis.half_width();
    std::vector<Vector> cur;
    Eigen::VectorXd out(d);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      cur = int_msg_;
      bool ok = true;
      for (int j = 0; j < d && ok; ++j) {
        // conditional on the grid: carry this leaf's grid block to the root
        Matrix carry = leaf_grid_[static_cast<std::size_t>(j)];
        int id = m_.tree.leaf_id(j);
        Vector density;
        while (true) {
          const int p = DimensionTree::parent(id);
          const bool is_left = DimensionTree::left(p) == id;
          const int sib = is_left ? DimensionTree::right(p) : DimensionTree::left(p);
          if (p == 0) {
            const Vector& s = cur[static_cast<std::size_t>(sib)];
            density = is_left ? Vector(carry * (m_.root_core * s))
                              : Vector(carry * (m_.root_core.transpose() * s));
            break;
          }
          const auto& core = m_.cores[static_cast<std::size_t>(p)];
          const Vector& s = cur[static_cast<std::size_t>(sib)];
          carry = is_left ? Matrix(carry * core.contract2(s))
                          : Matrix(carry * core.contract1(s));
          id = p;
        }
        Scalar total = 0;
        for (int c = 0; c < grid_; ++c) {
          if (!(density[c] > 0) || !std::isfinite(static_cast<double>(density[c])))
            density[c] = 0;
          total += density[c];
        }
        const double u1 = rng.uniform();
        const double u2 = rng.uniform();  // jitter inside the selected cell
        if (!(total > 0)) {
          ok = false;
          break;
        }
        const Scalar threshold = static_cast<Scalar>(u1) * total;
        Scalar cum = 0;
        int chosen = grid_ - 1;
        for (int c = 0; c < grid_; ++c) {
          cum += density[c];
          if (cum > threshold) {
            chosen = c;
            break;
          }
        }
        const Scalar x = -w + (Scalar(chosen) + static_cast<Scalar>(u2)) * cell_;
        out[m_.tree.leaf_site(j)] = static_cast<double>(x);
        // fix this leaf and refresh its ancestors below the root
        int node = m_.tree.leaf_id(j);
        cur[static_cast<std::size_t>(node)] =
            m_.leaf_cores[static_cast<std::size_t>(j)].transpose() * m_.basis.eval(x);
        while (node > 2) {
          node = DimensionTree::parent(node);
          cur[static_cast<std::size_t>(node)] =
              m_.cores[static_cast<std::size_t>(node)].contract12(
                  cur[static_cast<std::size_t>(DimensionTree::left(node))],
                  cur[static_cast<std::size_t>(DimensionTree::right(node))]);
        }
      }
      if (ok) return out;
    }
    throw NumericalError("sampler: conditional mass vanished repeatedly; model is not a usable density");
  }

 private:
  static constexpr int kMaxAttempts = 32;
  FhtModel<Scalar> m_;
  int grid_;
  Scalar cell_ = 0;
  std::vector<Matrix> leaf_grid_;  // per leaf: grid x rank
  std::vector<Vector> int_msg_;    // per node: integrated subtree message
};

// count samples as columns, in state (site) coordinates. Each sample uses its
// own derived stream, so the output is independent of the worker count.
template <typename Scalar>
Eigen::MatrixXd fht_sample(const FhtModel<Scalar>& model, long count, int grid_resolution,
                           std::uint64_t seed, int workers = 1) {
  if (count < 0) throw ValidationError("fht_sample: count must be >= 0");
  const FhtSampler<Scalar> sampler(model, grid_resolution);
  Eigen::MatrixXd out(model.tree.dim(), count);
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t s) {
    RngStream rng(derive_seed(seed, 0x64726177ULL, static_cast<std::uint64_t>(s)));
    out.col(static_cast<Eigen::Index>(s)) = sampler.draw(rng);
  });
  return out;
}

}  // namespace fhtgibbs
