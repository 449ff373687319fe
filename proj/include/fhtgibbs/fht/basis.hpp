#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

// Orthonormal real Fourier basis on [-w, w], n = 2q + 1 functions:
//   psi_0      = 1 / sqrt(2 w)
//   psi_{2k-1} = sqrt(1/w) cos(pi k (t + w) / w)
//   psi_{2k}   = sqrt(1/w) sin(pi k (t + w) / w),  k = 1..q.
template <typename Scalar = double>
class FourierBasis {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  FourierBasis() = default;
  FourierBasis(int q, Scalar half_width) : q_(q), w_(half_width) {
    if (q < 1) throw ValidationError("basis: q must be >= 1");
    if (!(half_width > 0)) throw ValidationError("basis: half_width must be positive");
  }

  int q() const { return q_; }
  int size() const { return 2 * q_ + 1; }
  Scalar half_width() const { return w_; }

  // Chebyshev-style recurrence over harmonics; no trig calls past the first.
  void eval_into(Scalar t, Eigen::Ref<Vector> out) const {
    const Scalar angle = Scalar(M_PI) * (t + w_) / w_;
    const Scalar c1 = std::cos(angle), s1 = std::sin(angle);
    const Scalar amp = Scalar(1) / std::sqrt(w_);
    out[0] = Scalar(1) / std::sqrt(Scalar(2) * w_);
    Scalar ck = c1, sk = s1;
    out[1] = amp * ck;
    out[2] = amp * sk;
    for (int k = 2; k <= q_; ++k) {
      const Scalar cn = c1 * ck - s1 * sk;
      const Scalar sn = s1 * ck + c1 * sk;
      ck = cn;
      sk = sn;
      out[2 * k - 1] = amp * ck;
      out[2 * k] = amp * sk;
    }
  }

  Vector eval(Scalar t) const {
    Vector v(size());
    eval_into(t, v);
    return v;
  }

  // Row p holds the basis evaluated at pts[p].
  Matrix eval_grid(const Eigen::Ref<const Vector>& pts) const {
    Matrix m(pts.size(), size());
    Vector row(size());
    for (Eigen::Index p = 0; p < pts.size(); ++p) {
      eval_into(pts[p], row);
      m.row(p) = row.transpose();
    }
    return m;
  }

  // <psi_k, 1> over [-w, w]; only the constant survives.
  Vector integral() const {
    Vector v = Vector::Zero(size());
    v[0] = std::sqrt(Scalar(2) * w_);
    return v;
  }

 private:
  int q_ = 1;
  Scalar w_ = 1;
};

}  // namespace fhtgibbs
