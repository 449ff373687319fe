#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/log.hpp"
#include "fhtgibbs/core/parallel.hpp"
#include "fhtgibbs/core/rng.hpp"
#include "fhtgibbs/fht/basis.hpp"
#include "fhtgibbs/fht/model.hpp"
#include "fhtgibbs/fht/tensor3.hpp"
#include "fhtgibbs/fht/tree.hpp"

namespace fhtgibbs {

// One multiplicative term of a sketch function: coeff * prod_v psi_idx[v](x_site[v]).
// nvars = 0 is the constant term.
struct SketchTerm {
  double coeff = 0;
  int nvars = 0;
  std::array<int, 3> site{{0, 0, 0}};
  std::array<int, 3> basis_idx{{0, 0, 0}};
};

struct SketchFn {
  std::vector<SketchTerm> terms;
};

struct NodeSketch {
  std::vector<SketchFn> fns;
  int size() const { return static_cast<int>(fns.size()); }
};

// Random sparse Fourier-feature sketches for every non-root tree node: one
// family on the node's own variables (block) and one on the complement. All
// draws come from streams derived from (seed, node, side, function), so the
// family is reproducible and independent of evaluation order.
struct SketchSpec {
  DimensionTree tree;
  FourierBasis<double> basis;
  std::uint64_t seed = 0;
  double oversampling = 2.0;
  std::vector<int> target_rank;      // per node id; 0 at root
  std::vector<NodeSketch> block;     // per node id
  std::vector<NodeSketch> comp;      // per node id
  int block_size(int id) const { return block[static_cast<std::size_t>(id)].size(); }
  int comp_size(int id) const { return comp[static_cast<std::size_t>(id)].size(); }
};

namespace detail {

// Fourier degree allowed in sketch terms. Single-variable sides get their
// degree raised until the basis span can hold the requested sketch count;
// degree-2 features alone span only five functions on one variable.
inline int side_degree(int nleaves, int want, int q) {
  if (nleaves > 1) return std::min(2, q);
  return std::min(q, std::max(2, (want - 1 + 1) / 2));
}

inline SketchFn make_sketch_fn(RngStream& rng, const std::vector<int>& sites, int degree,
                               int nterms) {
  SketchFn fn;
  SketchTerm constant;
  constant.coeff = rng.normal();
  constant.nvars = 0;
  fn.terms.push_back(constant);
  const int max_support = std::min<int>(3, static_cast<int>(sites.size()));
  for (int t = 0; t < nterms; ++t) {
    SketchTerm term;
    term.nvars = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_support)));
    std::array<int, 3> chosen{{-1, -1, -1}};
    for (int v = 0; v < term.nvars; ++v) {
      // index among leaves not yet used by this term
      const int remaining = static_cast<int>(sites.size()) - v;
      int pick = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(remaining)));
      for (int u = 0; u < static_cast<int>(sites.size()); ++u) {
        const bool used = u == chosen[0] || u == chosen[1] || u == chosen[2];
        if (used) continue;
        if (pick == 0) {
          chosen[v] = u;
          break;
        }
        --pick;
      }
      term.site[static_cast<std::size_t>(v)] = sites[static_cast<std::size_t>(chosen[v])];
      term.basis_idx[static_cast<std::size_t>(v)] =
          1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(2 * degree)));
    }
    term.coeff = rng.normal();
    fn.terms.push_back(term);
  }
  return fn;
}

// basis_cache: n x d, one column of basis values per state coordinate.
inline double eval_sketch(const SketchFn& fn, const Eigen::Ref<const Eigen::MatrixXd>& basis_cache) {
  double acc = 0;
  for (const auto& term : fn.terms) {
    double v = term.coeff;
    for (int k = 0; k < term.nvars; ++k)
      v *= basis_cache(term.basis_idx[static_cast<std::size_t>(k)],
                       term.site[static_cast<std::size_t>(k)]);
    acc += v;
  }
  return acc;
}

}  // namespace detail

inline constexpr int kSketchTerms = 8;

inline SketchSpec make_sketches(const DimensionTree& tree, const FourierBasis<double>& basis,
                                int rank, double oversampling, std::uint64_t seed) {
  if (rank < 1) throw ValidationError("sketch: rank must be >= 1");
  if (!(oversampling >= 1.5)) throw ValidationError("sketch: oversampling must be >= 1.5");
  SketchSpec spec;
  spec.tree = tree;
  spec.basis = basis;
  spec.seed = seed;
  spec.oversampling = oversampling;
  const int nodes = tree.node_count();
  const int n = basis.size();
  spec.target_rank.assign(static_cast<std::size_t>(nodes), 0);
  spec.block.resize(static_cast<std::size_t>(nodes));
  spec.comp.resize(static_cast<std::size_t>(nodes));
  const int d = tree.dim();
  for (int id = 1; id < nodes; ++id) {
    const auto [lo, hi] = tree.leaf_range(id);
    std::vector<int> block_sites, comp_sites;
    block_sites.reserve(static_cast<std::size_t>(hi - lo));
    comp_sites.reserve(static_cast<std::size_t>(d - (hi - lo)));
    for (int leaf = 0; leaf < d; ++leaf)
      (leaf >= lo && leaf < hi ? block_sites : comp_sites).push_back(tree.leaf_site(leaf));
    const int min_side = static_cast<int>(std::min(block_sites.size(), comp_sites.size()));
    const int target = min_side == 1 ? std::min(rank, n) : rank;
    spec.target_rank[static_cast<std::size_t>(id)] = target;
    const int want = static_cast<int>(std::ceil(oversampling * target));
    for (int side = 0; side < 2; ++side) {
      const auto& sites = side == 0 ? block_sites : comp_sites;
      const int degree = detail::side_degree(static_cast<int>(sites.size()), want, basis.q());
      const int count =
          sites.size() == 1 ? std::min(want, 2 * degree + 1) : want;
      auto& family = (side == 0 ? spec.block : spec.comp)[static_cast<std::size_t>(id)];
      family.fns.reserve(static_cast<std::size_t>(count));
      for (int g = 0; g < count; ++g) {
        RngStream rng(derive_seed(seed,
                                  (static_cast<std::uint64_t>(side + 1) << 32) |
                                      static_cast<std::uint64_t>(id),
                                  static_cast<std::uint64_t>(g)));
        family.fns.push_back(detail::make_sketch_fn(rng, sites, degree, kSketchTerms));
      }
    }
  }
  return spec;
}

// Sample (or exact) moments of the density against the sketch families:
//   z[q]      = E[ s_block(q)  outer s_comp(q) ]
//   b3[q]     = E[ s_block(left) x s_block(right) x s_comp(q) ]  (internal q)
//   b_root    = E[ s_block(left child) outer s_block(right child) ]
//   b_leaf[j] = E[ psi(x_j) outer s_comp(leaf j) ]
struct SketchMoments {
  std::vector<Eigen::MatrixXd> z;
  std::vector<Tensor3<double>> b3;
  Eigen::MatrixXd b_root;
  std::vector<Eigen::MatrixXd> b_leaf;
  double weight = 0;
  long count = 0;

  void init(const SketchSpec& spec) {
    const int nodes = spec.tree.node_count();
    const int n = spec.basis.size();
    z.assign(static_cast<std::size_t>(nodes), Eigen::MatrixXd());
    b3.assign(static_cast<std::size_t>(nodes), Tensor3<double>());
    b_leaf.assign(static_cast<std::size_t>(spec.tree.dim()), Eigen::MatrixXd());
    for (int id = 1; id < nodes; ++id) {
      z[static_cast<std::size_t>(id)] =
          Eigen::MatrixXd::Zero(spec.block_size(id), spec.comp_size(id));
      if (spec.tree.is_leaf(id)) {
        b_leaf[static_cast<std::size_t>(spec.tree.leaf_index(id))] =
            Eigen::MatrixXd::Zero(n, spec.comp_size(id));
      } else {
        b3[static_cast<std::size_t>(id)] =
            Tensor3<double>(spec.block_size(DimensionTree::left(id)),
                            spec.block_size(DimensionTree::right(id)), spec.comp_size(id));
      }
    }
    b_root = Eigen::MatrixXd::Zero(spec.block_size(1), spec.block_size(2));
    weight = 0;
    count = 0;
  }

  void merge(const SketchMoments& other) {
    for (std::size_t i = 1; i < z.size(); ++i) z[i] += other.z[i];
    for (std::size_t i = 1; i < b3.size(); ++i)
      if (!b3[i].empty()) b3[i] += other.b3[i];
    for (std::size_t i = 0; i < b_leaf.size(); ++i) b_leaf[i] += other.b_leaf[i];
    b_root += other.b_root;
    weight += other.weight;
    count += other.count;
  }

  void scale(double s) {
    for (std::size_t i = 1; i < z.size(); ++i) z[i] *= s;
    for (std::size_t i = 1; i < b3.size(); ++i)
      if (!b3[i].empty()) b3[i] *= s;
    for (std::size_t i = 0; i < b_leaf.size(); ++i) b_leaf[i] *= s;
    b_root *= s;
  }
};

namespace detail {

struct MomentScratch {
  Eigen::MatrixXd cache;                 // n x d basis values
  std::vector<Eigen::VectorXd> bval;     // per node: block sketch values
  std::vector<Eigen::VectorXd> cval;     // per node: comp sketch values

  void init(const SketchSpec& spec) {
    cache.resize(spec.basis.size(), spec.tree.dim());
    const int nodes = spec.tree.node_count();
    bval.resize(static_cast<std::size_t>(nodes));
    cval.resize(static_cast<std::size_t>(nodes));
    for (int id = 1; id < nodes; ++id) {
      bval[static_cast<std::size_t>(id)].resize(spec.block_size(id));
      cval[static_cast<std::size_t>(id)].resize(spec.comp_size(id));
    }
  }
};

inline void accumulate_sample(SketchMoments& acc, const SketchSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& x, double w,
                              MomentScratch& s) {
  const int d = spec.tree.dim();
  const int nodes = spec.tree.node_count();
  for (int site = 0; site < d; ++site)
    spec.basis.eval_into(x[site], s.cache.col(site));
  for (int id = 1; id < nodes; ++id) {
    auto& bv = s.bval[static_cast<std::size_t>(id)];
    auto& cv = s.cval[static_cast<std::size_t>(id)];
    const auto& bf = spec.block[static_cast<std::size_t>(id)].fns;
    const auto& cf = spec.comp[static_cast<std::size_t>(id)].fns;
    for (std::size_t g = 0; g < bf.size(); ++g)
      bv[static_cast<Eigen::Index>(g)] = eval_sketch(bf[g], s.cache);
    for (std::size_t g = 0; g < cf.size(); ++g)
      cv[static_cast<Eigen::Index>(g)] = eval_sketch(cf[g], s.cache);
  }
  for (int id = 1; id < nodes; ++id) {
    const auto& bv = s.bval[static_cast<std::size_t>(id)];
    const auto& cv = s.cval[static_cast<std::size_t>(id)];
    acc.z[static_cast<std::size_t>(id)].noalias() += w * bv * cv.transpose();
    if (spec.tree.is_leaf(id)) {
      const int leaf = spec.tree.leaf_index(id);
      acc.b_leaf[static_cast<std::size_t>(leaf)].noalias() +=
          w * s.cache.col(spec.tree.leaf_site(leaf)) * cv.transpose();
    } else {
      acc.b3[static_cast<std::size_t>(id)].add_outer(
          w, s.bval[static_cast<std::size_t>(DimensionTree::left(id))],
          s.bval[static_cast<std::size_t>(DimensionTree::right(id))], cv);
    }
  }
  acc.b_root.noalias() += w * s.bval[1] * s.bval[2].transpose();
  acc.weight += w;
  acc.count += 1;
}

inline std::size_t moment_bytes(const SketchSpec& spec) {
  std::size_t doubles = 0;
  const int nodes = spec.tree.node_count();
  for (int id = 1; id < nodes; ++id) {
    const std::size_t b = static_cast<std::size_t>(spec.block_size(id));
    const std::size_t c = static_cast<std::size_t>(spec.comp_size(id));
    doubles += b * c;
    if (spec.tree.is_leaf(id))
      doubles += static_cast<std::size_t>(spec.basis.size()) * c;
    else
      doubles += static_cast<std::size_t>(spec.block_size(DimensionTree::left(id))) *
                 static_cast<std::size_t>(spec.block_size(DimensionTree::right(id))) * c;
  }
  doubles += static_cast<std::size_t>(spec.block_size(1)) *
             static_cast<std::size_t>(spec.block_size(2));
  return doubles * sizeof(double);
}

}  // namespace detail

// Monte-Carlo moments. Samples are reduced in fixed-size shards merged in
// index order, so the result is bitwise independent of the worker count.
// log_weights, when present, are max-shifted before exponentiation.
inline SketchMoments estimate_moments(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                      const Eigen::VectorXd* log_weights,
                                      const SketchSpec& spec, int workers = 1) {
  if (samples.rows() != spec.tree.dim())
    throw ValidationError("moments: sample dimension does not match the tree");
  const long count = static_cast<long>(samples.cols());
  if (count < 1) throw ValidationError("moments: need at least one sample");
  if (log_weights && log_weights->size() != count)
    throw ValidationError("moments: weight count does not match sample count");
  double max_logw = 0;
  if (log_weights) {
    max_logw = log_weights->maxCoeff();
    if (!std::isfinite(max_logw))
      throw NumericalError("moments: log-weights contain non-finite values");
  }

  constexpr long kShard = 8192;
  const long nshards = (count + kShard - 1) / kShard;
  const std::size_t bytes = detail::moment_bytes(spec);
  const long round_size = std::clamp<long>(
      static_cast<long>((128ull << 20) / std::max<std::size_t>(bytes, 1)), 2, 16);

  SketchMoments total;
  total.init(spec);
  std::vector<SketchMoments> block(static_cast<std::size_t>(round_size));
  for (long first = 0; first < nshards; first += round_size) {
    const long in_round = std::min(round_size, nshards - first);
    parallel_for(static_cast<std::size_t>(in_round), workers, [&](std::size_t r) {
      SketchMoments& local = block[r];
      local.init(spec);
      detail::MomentScratch scratch;
      scratch.init(spec);
      const long shard = first + static_cast<long>(r);
      const long lo = shard * kShard;
      const long hi = std::min(count, lo + kShard);
      for (long i = lo; i < hi; ++i) {
        const double w =
            log_weights ? std::exp((*log_weights)[static_cast<Eigen::Index>(i)] - max_logw) : 1.0;
        detail::accumulate_sample(local, spec, samples.col(static_cast<Eigen::Index>(i)), w,
                                  scratch);
      }
    });
    for (long r = 0; r < in_round; ++r) total.merge(block[static_cast<std::size_t>(r)]);
  }
  if (!(total.weight > 0)) throw NumericalError("moments: total weight is zero");
  total.scale(1.0 / total.weight);
  return total;
}

namespace detail {

// Expectations under an explicit model, using basis orthonormality: a product
// of basis factors on distinct sites integrates leaf-by-leaf, so only the
// support leaves and their ancestors deviate from the cached integral message.
class ExactExpectation {
 public:
  explicit ExactExpectation(const FhtModel<double>& m) : m_(m) {
    const Eigen::VectorXd iv = m.basis.integral();
    int_msg_.resize(static_cast<std::size_t>(m.tree.node_count()));
    for (int id = m.tree.node_count() - 1; id >= 1; --id) {
      if (m.tree.is_leaf(id))
        int_msg_[static_cast<std::size_t>(id)] =
            m.leaf_cores[static_cast<std::size_t>(m.tree.leaf_index(id))].transpose() * iv;
      else
        int_msg_[static_cast<std::size_t>(id)] = m.cores[static_cast<std::size_t>(id)].contract12(
            int_msg_[static_cast<std::size_t>(DimensionTree::left(id))],
            int_msg_[static_cast<std::size_t>(DimensionTree::right(id))]);
    }
  }

  // factors: (site, basis index) pairs on distinct sites
  double expect(const std::vector<std::pair<int, int>>& factors) {
    override_.clear();
    touched_.clear();
    for (const auto& [site, idx] : factors) {
      const int leaf = m_.tree.site_leaf(site);
      const int id = m_.tree.leaf_id(leaf);
      override_[id] = m_.leaf_cores[static_cast<std::size_t>(leaf)].row(idx).transpose();
      for (int a = DimensionTree::parent(id); a >= 1; a = DimensionTree::parent(a)) {
        touched_.push_back(a);
        if (a == 1 || a == 2) break;
      }
    }
    std::sort(touched_.begin(), touched_.end(), std::greater<int>());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    for (int id : touched_)
      override_[id] = m_.cores[static_cast<std::size_t>(id)].contract12(get(DimensionTree::left(id)),
                                                                        get(DimensionTree::right(id)));
    return get(1).dot(m_.root_core * get(2));
  }

 private:
  const Eigen::VectorXd& get(int id) const {
    auto it = override_.find(id);
    return it == override_.end() ? int_msg_[static_cast<std::size_t>(id)] : it->second;
  }

  const FhtModel<double>& m_;
  std::vector<Eigen::VectorXd> int_msg_;
  std::unordered_map<int, Eigen::VectorXd> override_;
  std::vector<int> touched_;
};

// E[ prod of sketch terms ] by expanding each function into its terms.
inline double exact_product(ExactExpectation& ee, const std::vector<const SketchTerm*>& terms) {
  double coeff = 1;
  std::vector<std::pair<int, int>> factors;
  for (const SketchTerm* t : terms) {
    coeff *= t->coeff;
    for (int v = 0; v < t->nvars; ++v)
      factors.emplace_back(t->site[static_cast<std::size_t>(v)],
                           t->basis_idx[static_cast<std::size_t>(v)]);
  }
  return coeff * ee.expect(factors);
}

}  // namespace detail

// Exact sketch moments of an explicit model; used to validate recovery.
inline SketchMoments exact_moments(const FhtModel<double>& model, const SketchSpec& spec) {
  if (model.tree.dim() != spec.tree.dim())
    throw ValidationError("exact_moments: model/sketch dimension mismatch");
  detail::ExactExpectation ee(model);
  SketchMoments mo;
  mo.init(spec);
  mo.weight = 1;
  mo.count = 0;
  const int nodes = spec.tree.node_count();
  std::vector<const SketchTerm*> terms;
  for (int id = 1; id < nodes; ++id) {
    const auto& bf = spec.block[static_cast<std::size_t>(id)].fns;
    const auto& cf = spec.comp[static_cast<std::size_t>(id)].fns;
    auto& zm = mo.z[static_cast<std::size_t>(id)];
    for (int a = 0; a < static_cast<int>(bf.size()); ++a)
      for (int b = 0; b < static_cast<int>(cf.size()); ++b) {
        double acc = 0;
        for (const auto& ta : bf[static_cast<std::size_t>(a)].terms)
          for (const auto& tb : cf[static_cast<std::size_t>(b)].terms) {
            terms = {&ta, &tb};
            acc += detail::exact_product(ee, terms);
          }
        zm(a, b) = acc;
      }
    if (spec.tree.is_leaf(id)) {
      const int leaf = spec.tree.leaf_index(id);
      const int site = spec.tree.leaf_site(leaf);
      auto& bl = mo.b_leaf[static_cast<std::size_t>(leaf)];
      for (int i = 0; i < spec.basis.size(); ++i)
        for (int b = 0; b < static_cast<int>(cf.size()); ++b) {
          SketchTerm unit;
          unit.coeff = 1;
          unit.nvars = 1;
          unit.site[0] = site;
          unit.basis_idx[0] = i;
          double acc = 0;
          for (const auto& tb : cf[static_cast<std::size_t>(b)].terms) {
            terms = {&unit, &tb};
            acc += detail::exact_product(ee, terms);
          }
          bl(i, b) = acc;
        }
    } else {
      const auto& lf = spec.block[static_cast<std::size_t>(DimensionTree::left(id))].fns;
      const auto& rf = spec.block[static_cast<std::size_t>(DimensionTree::right(id))].fns;
      auto& b3 = mo.b3[static_cast<std::size_t>(id)];
      for (int a = 0; a < static_cast<int>(lf.size()); ++a)
        for (int b = 0; b < static_cast<int>(rf.size()); ++b)
          for (int c = 0; c < static_cast<int>(cf.size()); ++c) {
            double acc = 0;
            for (const auto& ta : lf[static_cast<std::size_t>(a)].terms)
              for (const auto& tb : rf[static_cast<std::size_t>(b)].terms)
                for (const auto& tc : cf[static_cast<std::size_t>(c)].terms) {
                  terms = {&ta, &tb, &tc};
                  acc += detail::exact_product(ee, terms);
                }
            b3(a, b, c) = acc;
          }
    }
  }
  const auto& lf = spec.block[1].fns;
  const auto& rf = spec.block[2].fns;
  for (int a = 0; a < static_cast<int>(lf.size()); ++a)
    for (int b = 0; b < static_cast<int>(rf.size()); ++b) {
      double acc = 0;
      for (const auto& ta : lf[static_cast<std::size_t>(a)].terms)
        for (const auto& tb : rf[static_cast<std::size_t>(b)].terms) {
          terms = {&ta, &tb};
          acc += detail::exact_product(ee, terms);
        }
      mo.b_root(a, b) = acc;
    }
  return mo;
}

// Joint gauge from one cross-moment SVD: a_sub = U_r S_r spans the block-side
// frame, a_env = V_r the complement frame. Columns are sign-fixed (largest
// |entry| of each left vector made positive) so refits are reproducible.
struct EdgeGauge {
  Eigen::MatrixXd a_sub;
  Eigen::MatrixXd a_env;
  Eigen::VectorXd singular_values;
  int rank = 0;
};

inline EdgeGauge edge_gauge(const Eigen::Ref<const Eigen::MatrixXd>& z, int max_rank,
                            double tol) {
  if (max_rank < 1) throw ValidationError("gauge: rank must be >= 1");
  if (!(tol >= 0) || tol >= 1) throw ValidationError("gauge: tol must be in [0, 1)");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0) || !std::isfinite(s[0]))
    throw NumericalError("gauge: cross-moment matrix has no usable spectrum");
  int r = 0;
  while (r < s.size() && r < max_rank && s[r] >= tol * s[0] && s[r] > 0) ++r;
  if (r == 0) throw NumericalError("gauge: all singular values below tolerance");
  EdgeGauge g;
  g.rank = r;
  g.singular_values = s.head(r);
  g.a_sub.resize(z.rows(), r);
  g.a_env.resize(z.cols(), r);
  for (int c = 0; c < r; ++c) {
    Eigen::Index piv = 0;
    svd.matrixU().col(c).cwiseAbs().maxCoeff(&piv);
    const double flip = svd.matrixU()(piv, c) < 0 ? -1.0 : 1.0;
    g.a_sub.col(c) = flip * s[c] * svd.matrixU().col(c);
    g.a_env.col(c) = flip * svd.matrixV().col(c);
  }
  return g;
}

inline Eigen::MatrixXd gauge_from_svd(const Eigen::Ref<const Eigen::MatrixXd>& z, int max_rank,
                                      double tol) {
  return edge_gauge(z, max_rank, tol).a_sub;
}

namespace detail {

// Pseudo-inverse that refuses ill-conditioned gauges instead of truncating.
inline Eigen::MatrixXd pinv_checked(const Eigen::Ref<const Eigen::MatrixXd>& a, double tol,
                                    const std::string& context) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::Index r = std::min(a.rows(), a.cols());
  if (r == 0 || !(s[0] > 0) || !std::isfinite(s[0]))
    throw NumericalError(context + ": gauge matrix is zero");
  const double smin = s[r - 1];
  if (!(smin > 0) || smin < tol * s[0])
    throw NumericalError(context + ": gauge condition number exceeds 1/tol");
  return svd.matrixV() * s.head(r).cwiseInverse().asDiagonal() * svd.matrixU().transpose().topRows(r);
}

}  // namespace detail

// Core solves: invert the gauge frames around each moment tensor.
inline Tensor3<double> solve_core(const Tensor3<double>& b, const Eigen::MatrixXd& a_left,
                                  const Eigen::MatrixXd& a_right, const Eigen::MatrixXd& a_env,
                                  double tol, const std::string& context = "solve_core") {
  return b.mode1(detail::pinv_checked(a_left, tol, context))
      .mode2(detail::pinv_checked(a_right, tol, context))
      .mode3(detail::pinv_checked(a_env, tol, context));
}

inline Eigen::MatrixXd solve_root(const Eigen::Ref<const Eigen::MatrixXd>& b,
                                  const Eigen::MatrixXd& a_left, const Eigen::MatrixXd& a_right,
                                  double tol, const std::string& context = "solve_root") {
  return detail::pinv_checked(a_left, tol, context) * b *
         detail::pinv_checked(a_right, tol, context).transpose();
}

inline Eigen::MatrixXd solve_leaf(const Eigen::Ref<const Eigen::MatrixXd>& b,
                                  const Eigen::MatrixXd& a_env, double tol,
                                  const std::string& context = "solve_leaf") {
  return b * detail::pinv_checked(a_env, tol, context).transpose();
}

struct FitOptions {
  int rank = 1;
  double oversampling = 2.0;
  double svd_tol = 1e-8;
  std::uint64_t sketch_seed = 0;
  int workers = 1;
};

struct FitReport {
  std::vector<std::pair<int, int>> edge_ranks;  // (node id, retained rank)
  long sample_count = 0;
  double normalization = 0;
  std::vector<std::string> warnings;
};

inline FhtModel<double> fit_from_moments(const SketchMoments& mo, const SketchSpec& spec,
                                         double svd_tol, FitReport* report = nullptr) {
  const int nodes = spec.tree.node_count();
  std::vector<EdgeGauge> gauge(static_cast<std::size_t>(nodes));
  FitReport local;
  FitReport& rep = report ? *report : local;
  rep.edge_ranks.clear();
  for (int id = 1; id < nodes; ++id) {
    gauge[static_cast<std::size_t>(id)] =
        edge_gauge(mo.z[static_cast<std::size_t>(id)], spec.target_rank[static_cast<std::size_t>(id)],
                   svd_tol);
    const int got = gauge[static_cast<std::size_t>(id)].rank;
    rep.edge_ranks.emplace_back(id, got);
    if (got < spec.target_rank[static_cast<std::size_t>(id)])
      rep.warnings.push_back("edge at node " + std::to_string(id) + " collapsed to rank " +
                             std::to_string(got));
  }
  FhtModel<double> model;
  model.tree = spec.tree;
  model.basis = spec.basis;
  model.leaf_cores.resize(static_cast<std::size_t>(spec.tree.dim()));
  model.cores.resize(static_cast<std::size_t>(nodes));
  for (int id = 1; id < nodes; ++id) {
    const std::string ctx = "node " + std::to_string(id);
    if (spec.tree.is_leaf(id)) {
      const int leaf = spec.tree.leaf_index(id);
      model.leaf_cores[static_cast<std::size_t>(leaf)] =
          solve_leaf(mo.b_leaf[static_cast<std::size_t>(leaf)],
                     gauge[static_cast<std::size_t>(id)].a_env, svd_tol, ctx);
    } else {
      model.cores[static_cast<std::size_t>(id)] = solve_core(
          mo.b3[static_cast<std::size_t>(id)],
          gauge[static_cast<std::size_t>(DimensionTree::left(id))].a_sub,
          gauge[static_cast<std::size_t>(DimensionTree::right(id))].a_sub,
          gauge[static_cast<std::size_t>(id)].a_env, svd_tol, ctx);
    }
  }
  model.root_core = solve_root(mo.b_root, gauge[1].a_sub, gauge[2].a_sub, svd_tol, "root");
  model.validate();
  rep.normalization = normalize(model);
  rep.sample_count = mo.count;
  for (const auto& w : rep.warnings) warn("fit: " + w);
  return model;
}

// End-to-end density fit from samples (columns, state coordinates).
inline FhtModel<double> sketch_fit(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                   const Eigen::VectorXd* log_weights, const DimensionTree& tree,
                                   const FourierBasis<double>& basis, const FitOptions& opt,
                                   FitReport* report = nullptr) {
  SketchSpec spec = make_sketches(tree, basis, opt.rank, opt.oversampling, opt.sketch_seed);
  long max_core = 0;
  for (int id = 1; id < tree.node_count(); ++id) {
    const long r = spec.target_rank[static_cast<std::size_t>(id)];
    max_core = std::max(max_core, tree.is_leaf(id) ? basis.size() * r : r * r * r);
  }
  FitReport local;
  FitReport& rep = report ? *report : local;
  rep.warnings.clear();
  if (samples.cols() < 10 * max_core)
    rep.warnings.push_back("only " + std::to_string(samples.cols()) +
                           " samples for cores with up to " + std::to_string(max_core) +
                           " parameters");
  const SketchMoments mo = estimate_moments(samples, log_weights, spec, opt.workers);
  return fit_from_moments(mo, spec, opt.svd_tol, &rep);
}

}  // namespace fhtgibbs
