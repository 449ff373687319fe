#pragma once

#include <Eigen/Dense>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

// Dense order-3 tensor with the first index fastest, so mode-1 and mode-3
// unfoldings are plain Eigen maps over the same storage.
template <typename Scalar = double>
class Tensor3 {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Map = Eigen::Map<Matrix>;
  using ConstMap = Eigen::Map<const Matrix>;

  Tensor3() = default;
  Tensor3(Eigen::Index n1, Eigen::Index n2, Eigen::Index n3)
      : n1_(n1), n2_(n2), n3_(n3), data_(Vector::Zero(n1 * n2 * n3)) {
    if (n1 < 1 || n2 < 1 || n3 < 1) throw ValidationError("tensor3: dimensions must be >= 1");
  }

  Eigen::Index n1() const { return n1_; }
  Eigen::Index n2() const { return n2_; }
  Eigen::Index n3() const { return n3_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[(k * n2_ + j) * n1_ + i];
  }
  Scalar operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[(k * n2_ + j) * n1_ + i];
  }

  Vector& raw() { return data_; }
  const Vector& raw() const { return data_; }

  ConstMap unfold1() const { return ConstMap(data_.data(), n1_, n2_ * n3_); }
  Map unfold1() { return Map(data_.data(), n1_, n2_ * n3_); }
  ConstMap unfold3() const { return ConstMap(data_.data(), n1_ * n2_, n3_); }
  Map unfold3() { return Map(data_.data(), n1_ * n2_, n3_); }
  // frontal slice k as an n1 x n2 matrix
  ConstMap slice(Eigen::Index k) const {
    return ConstMap(data_.data() + k * n1_ * n2_, n1_, n2_);
  }
  Map slice(Eigen::Index k) { return Map(data_.data() + k * n1_ * n2_, n1_, n2_); }

  // out(i',j,k) = sum_i A(i',i) T(i,j,k)
  Tensor3 mode1(const Eigen::Ref<const Matrix>& a) const {
    if (a.cols() != n1_) throw ValidationError("tensor3: mode-1 shape mismatch");
    Tensor3 out(a.rows(), n2_, n3_);
    out.unfold1() = a * unfold1();
    return out;
  }

  // out(i,j',k) = sum_j A(j',j) T(i,j,k)
  Tensor3 mode2(const Eigen::Ref<const Matrix>& a) const {
    if (a.cols() != n2_) throw ValidationError("tensor3: mode-2 shape mismatch");
    Tensor3 out(n1_, a.rows(), n3_);
    for (Eigen::Index k = 0; k < n3_; ++k) out.slice(k) = slice(k) * a.transpose();
    return out;
  }

  // out(i,j,k') = sum_k A(k',k) T(i,j,k)
  Tensor3 mode3(const Eigen::Ref<const Matrix>& a) const {
    if (a.cols() != n3_) throw ValidationError("tensor3: mode-3 shape mismatch");
    Tensor3 out(n1_, n2_, a.rows());
    out.unfold3() = unfold3() * a.transpose();
    return out;
  }

  // v(k) = sum_{i,j} T(i,j,k) x(i) y(j)
  Vector contract12(const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y) const {
    if (x.size() != n1_ || y.size() != n2_)
      throw ValidationError("tensor3: contraction shape mismatch");
    Vector v(n3_);
    for (Eigen::Index k = 0; k < n3_; ++k) v[k] = x.dot(slice(k) * y);
    return v;
  }

  // M(i,k) = sum_j T(i,j,k) y(j)
  Matrix contract2(const Eigen::Ref<const Vector>& y) const {
    if (y.size() != n2_) throw ValidationError("tensor3: contraction shape mismatch");
    Matrix m(n1_, n3_);
    for (Eigen::Index k = 0; k < n3_; ++k) m.col(k) = slice(k) * y;
    return m;
  }

  // M(j,k) = sum_i T(i,j,k) x(i)
  Matrix contract1(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != n1_) throw ValidationError("tensor3: contraction shape mismatch");
    Matrix m(n2_, n3_);
    for (Eigen::Index k = 0; k < n3_; ++k) m.col(k) = slice(k).transpose() * x;
    return m;
  }

  // rank-1 accumulation: T(i,j,k) += w x(i) y(j) z(k)
  void add_outer(Scalar w, const Eigen::Ref<const Vector>& x,
                 const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& z) {
    for (Eigen::Index k = 0; k < n3_; ++k) slice(k).noalias() += (w * z[k]) * x * y.transpose();
  }

  Tensor3& operator+=(const Tensor3& other) {
    if (n1_ != other.n1_ || n2_ != other.n2_ || n3_ != other.n3_)
      throw ValidationError("tensor3: sum shape mismatch");
    data_ += other.data_;
    return *this;
  }

  Tensor3& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

 private:
  Eigen::Index n1_ = 0, n2_ = 0, n3_ = 0;
  Vector data_;
};

}  // namespace fhtgibbs
