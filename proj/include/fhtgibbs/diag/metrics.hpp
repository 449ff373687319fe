#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/fht/model.hpp"

namespace fhtgibbs {

// Soft indicators of the two wells:
//   g_pm(y) = exp(-(2/d) sum_j (y_j -+ 1)^2),
// iota = u_plus / (u_plus + u_minus) with u_pm the (weighted) sample means.
// Everything is pooled through max-shifted exponentials, so deep wells with
// astronomically small indicator values stay well defined; u_pm themselves may
// underflow to zero, which is acceptable.
struct RatioResult {
  double iota = 0;
  double u_plus = 0;
  double u_minus = 0;
};

// Streaming accumulator; partial sums from separate pools merge exactly
// (max-exponent refactoring), independent of merge grouping.
struct RatioAccum {
  double max_exp = -std::numeric_limits<double>::infinity();
  double sum_plus = 0;   // sum of exp(e_plus - max_exp)
  double sum_minus = 0;  // sum of exp(e_minus - max_exp)
  double max_logw = -std::numeric_limits<double>::infinity();
  double sum_w = 0;      // sum of exp(logw - max_logw)
  long count = 0;

  void add(const Eigen::Ref<const Eigen::VectorXd>& y, double logw = 0) {
    const double d = static_cast<double>(y.size());
    const double e_plus =
        logw - (2.0 / d) * (y.array() - 1.0).square().sum();
    const double e_minus =
        logw - (2.0 / d) * (y.array() + 1.0).square().sum();
    const double m = std::max(e_plus, e_minus);
    if (m > max_exp) {
      const double shift = std::exp(max_exp - m);
      sum_plus *= shift;
      sum_minus *= shift;
      max_exp = m;
    }
    sum_plus += std::exp(e_plus - max_exp);
    sum_minus += std::exp(e_minus - max_exp);
    if (logw > max_logw) {
      sum_w *= std::exp(max_logw - logw);
      max_logw = logw;
    }
    sum_w += std::exp(logw - max_logw);
    ++count;
  }

  void merge(const RatioAccum& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    if (o.max_exp > max_exp) {
      const double shift = std::exp(max_exp - o.max_exp);
      sum_plus = sum_plus * shift + o.sum_plus;
      sum_minus = sum_minus * shift + o.sum_minus;
      max_exp = o.max_exp;
    } else {
      const double shift = std::exp(o.max_exp - max_exp);
      sum_plus += o.sum_plus * shift;
      sum_minus += o.sum_minus * shift;
    }
    if (o.max_logw > max_logw) {
      sum_w = sum_w * std::exp(max_logw - o.max_logw) + o.sum_w;
      max_logw = o.max_logw;
    } else {
      sum_w += o.sum_w * std::exp(o.max_logw - max_logw);
    }
    count += o.count;
  }

  RatioResult result() const {
    if (count == 0) throw ValidationError("ratio: no samples");
    RatioResult r;
    if (sum_plus == 0 && sum_minus == 0) {
      r.iota = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    r.iota = sum_plus / (sum_plus + sum_minus);
    // un-shift against the weight normalizer; may underflow to zero
    const double log_w_total = max_logw + std::log(sum_w);
    r.u_plus = std::exp(max_exp + std::log(sum_plus > 0 ? sum_plus : 0) - log_w_total);
    r.u_minus = std::exp(max_exp + std::log(sum_minus > 0 ? sum_minus : 0) - log_w_total);
    if (sum_plus == 0) r.u_plus = 0;
    if (sum_minus == 0) r.u_minus = 0;
    return r;
  }
};

inline RatioResult plus_minus_ratio(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                    const Eigen::VectorXd* log_weights = nullptr) {
  if (samples.cols() < 1) throw ValidationError("ratio: no samples");
  if (log_weights && log_weights->size() != samples.cols())
    throw ValidationError("ratio: weight count mismatch");
  RatioAccum acc;
  for (Eigen::Index i = 0; i < samples.cols(); ++i)
    acc.add(samples.col(i), log_weights ? (*log_weights)[i] : 0.0);
  return acc.result();
}

// Normalized 2D histogram over a square box; density integrates to 1 over the
// in-box samples. Samples exactly on the upper edge fall into the last bin.
struct Histogram2D {
  int bins = 0;
  double lo = 0, hi = 0;
  Eigen::MatrixXd density;  // bins x bins, [i][j] over (x_i-axis, x_j-axis)
  long in_box = 0;
  long out_of_box = 0;

  double bin_width() const { return (hi - lo) / bins; }
};

inline Histogram2D empirical_marginal(const Eigen::Ref<const Eigen::MatrixXd>& samples, int i,
                                      int j, int bins, double lo, double hi) {
  const int d = static_cast<int>(samples.rows());
  if (i < 0 || i >= d || j < 0 || j >= d || i == j)
    throw ValidationError("marginal: bad coordinate pair");
  if (bins < 1) throw ValidationError("marginal: bins must be >= 1");
  if (!(hi > lo)) throw ValidationError("marginal: empty box");
  Histogram2D h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  h.density = Eigen::MatrixXd::Zero(bins, bins);
  const double width = (hi - lo) / bins;
  for (Eigen::Index s = 0; s < samples.cols(); ++s) {
    const double x = samples(i, s), y = samples(j, s);
    if (x < lo || x > hi || y < lo || y > hi) {
      ++h.out_of_box;
      continue;
    }
    const int bx = std::min(bins - 1, static_cast<int>((x - lo) / width));
    const int by = std::min(bins - 1, static_cast<int>((y - lo) / width));
    h.density(bx, by) += 1.0;
    ++h.in_box;
  }
  if (h.in_box > 0) h.density /= static_cast<double>(h.in_box) * width * width;
  return h;
}

inline double tv_distance(const Histogram2D& a, const Histogram2D& b) {
  if (a.bins != b.bins || a.lo != b.lo || a.hi != b.hi)
    throw ValidationError("tv_distance: histograms have different binnings");
  const double area = a.bin_width() * a.bin_width();
  return 0.5 * (a.density - b.density).cwiseAbs().sum() * area;
}

// Trapezoid quadrature nodes/weights on [lo, hi].
inline void trapezoid_rule(int n, double lo, double hi, Eigen::VectorXd& pts,
                           Eigen::VectorXd& wts) {
  pts.resize(n);
  wts.resize(n);
  const double h = (hi - lo) / (n - 1);
  for (int k = 0; k < n; ++k) {
    pts[k] = lo + k * h;
    wts[k] = (k == 0 || k == n - 1) ? h / 2 : h;
  }
}

struct MomentTable {
  Eigen::VectorXd mean;                           // per coordinate
  std::vector<std::pair<int, int>> pairs;
  Eigen::VectorXd second;                         // E[x_i x_j] per pair
};

inline void check_pairs(int d, const std::vector<std::pair<int, int>>& pairs) {
  for (const auto& [i, j] : pairs)
    if (i < 0 || i >= d || j < 0 || j >= d)
      throw ValidationError("moments: pair index out of range");
}

inline MomentTable moment_table(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                const std::vector<std::pair<int, int>>& pairs,
                                const Eigen::VectorXd* log_weights = nullptr) {
  if (samples.cols() < 1) throw ValidationError("moments: no samples");
  const int d = static_cast<int>(samples.rows());
  check_pairs(d, pairs);
  MomentTable t;
  t.pairs = pairs;
  Eigen::VectorXd w;
  if (log_weights) {
    if (log_weights->size() != samples.cols())
      throw ValidationError("moments: weight count mismatch");
    w = (log_weights->array() - log_weights->maxCoeff()).exp();
  } else {
    w = Eigen::VectorXd::Ones(samples.cols());
  }
  const double total = w.sum();
  t.mean = samples * w / total;
  t.second.resize(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    t.second[static_cast<Eigen::Index>(p)] =
        (samples.row(i).array() * samples.row(j).array() * w.transpose().array()).sum() / total;
  }
  return t;
}

inline constexpr int kMomentQuadPoints = 512;

// Model moments by quadrature of its exact one- and two-site marginals. 512
// trapezoid points resolve the band-limited marginals far below the
// statistical noise these tables are compared against.
inline MomentTable moment_table(const FhtModel<double>& m,
                                const std::vector<std::pair<int, int>>& pairs) {
  const int d = m.tree.dim();
  check_pairs(d, pairs);
  const double w = m.basis.half_width();
  Eigen::VectorXd pts, wts;
  trapezoid_rule(kMomentQuadPoints, -w, w, pts, wts);
  MomentTable t;
  t.pairs = pairs;
  t.mean.resize(d);
  for (int i = 0; i < d; ++i) {
    const Eigen::MatrixXd marg = marginal_grid(m, i, pts);
    t.mean[i] = (marg.col(0).array() * pts.array() * wts.array()).sum();
  }
  t.second.resize(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i == j) {
      const Eigen::MatrixXd marg = marginal_grid(m, i, pts);
      t.second[static_cast<Eigen::Index>(p)] =
          (marg.col(0).array() * pts.array().square() * wts.array()).sum();
    } else {
      const Eigen::MatrixXd marg = marginal_grid(m, i, pts, j, pts);
      const Eigen::VectorXd pw = (pts.array() * wts.array()).matrix();
      t.second[static_cast<Eigen::Index>(p)] = pw.dot(marg * pw);
    }
  }
  return t;
}

// Exact model marginal tabulated like an empirical histogram (cell centers),
// for TV comparisons against sample histograms.
inline Histogram2D model_marginal_histogram(const FhtModel<double>& m, int i, int j, int bins,
                                            double lo, double hi) {
  if (bins < 1) throw ValidationError("marginal: bins must be >= 1");
  if (!(hi > lo)) throw ValidationError("marginal: empty box");
  Histogram2D h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  const double width = (hi - lo) / bins;
  Eigen::VectorXd centers(bins);
  for (int c = 0; c < bins; ++c) centers[c] = lo + (c + 0.5) * width;
  h.density = marginal_grid(m, i, centers, j, centers);
  h.in_box = 0;
  h.out_of_box = 0;
  return h;
}

}  // namespace fhtgibbs
