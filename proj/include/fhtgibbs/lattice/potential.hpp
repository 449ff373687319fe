#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

enum class Geometry { Chain1D, Grid2D };

inline std::string to_string(Geometry g) {
  return g == Geometry::Chain1D ? "chain1d" : "grid2d";
}

struct PotentialSpec {
  Geometry geometry = Geometry::Chain1D;
  int d = 0;                  // number of sites (perfect square for Grid2D)
  double lambda_factor = 0;   // lambda = lambda_factor * h
  double cubic_a = 0;         // tilt coefficient a
};

// Periodic Ginzburg-Landau lattice energy
//   V(x) = h^p ( lambda/2 sum_bonds ((x_v - x_w)/h)^2
//              + 1/(4 lambda) sum_v ((1 - x_v^2)^2 + a x_v^3) ),
// with p = 1 on a ring of d sites (h = 1/d) and p = 2 on a periodic m x m
// grid (d = m^2, h = 1/m). Bonds are generated once per lattice edge; on a
// ring of two sites the pair appears twice, matching the wrap-around.
template <typename Scalar = double>
class Potential {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static Potential build(const PotentialSpec& spec) {
    if (spec.d < 2) throw ValidationError("potential: d must be at least 2");
    if (!(spec.lambda_factor > 0))
      throw ValidationError("potential: lambda_factor must be positive");
    Potential p;
    p.geometry_ = spec.geometry;
    p.d_ = spec.d;
    p.a_ = static_cast<Scalar>(spec.cubic_a);
    if (spec.geometry == Geometry::Chain1D) {
      p.side_ = spec.d;
      p.h_ = Scalar(1) / Scalar(spec.d);
      p.cell_ = p.h_;
      p.nbr_.resize(2, spec.d);
      for (int i = 0; i < spec.d; ++i) {
        p.nbr_(0, i) = (i + 1) % spec.d;
        p.nbr_(1, i) = (i + spec.d - 1) % spec.d;
        p.bonds_.push_back({i, (i + 1) % spec.d});
      }
    } else {
      const int m = static_cast<int>(std::lround(std::sqrt(double(spec.d))));
      if (m < 2 || m * m != spec.d)
        throw ValidationError("potential: Grid2D requires d to be a perfect square, d >= 4");
      p.side_ = m;
      p.h_ = Scalar(1) / Scalar(m);
      p.cell_ = p.h_ * p.h_;
      p.nbr_.resize(4, spec.d);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
          const int i = r * m + c;
          const int right = r * m + (c + 1) % m;
          const int left = r * m + (c + m - 1) % m;
          const int down = ((r + 1) % m) * m + c;
          const int up = ((r + m - 1) % m) * m + c;
          p.nbr_(0, i) = right;
          p.nbr_(1, i) = down;
          p.nbr_(2, i) = left;
          p.nbr_(3, i) = up;
          p.bonds_.push_back({i, right});
          p.bonds_.push_back({i, down});
        }
    }
    p.lambda_ = static_cast<Scalar>(spec.lambda_factor) * p.h_;
    return p;
  }

  int dim() const { return d_; }
  int side() const { return side_; }
  Geometry geometry() const { return geometry_; }
  Scalar mesh_width() const { return h_; }
  Scalar lambda() const { return lambda_; }
  Scalar cubic_a() const { return a_; }

  Scalar energy(const Eigen::Ref<const Vector>& x) const {
    check_dim(x.size());
    Scalar bond_sum = 0;
    for (const auto& b : bonds_) {
      const Scalar diff = (x[b[0]] - x[b[1]]) / h_;
      bond_sum += diff * diff;
    }
    Scalar local_sum = 0;
    for (int i = 0; i < d_; ++i) {
      const Scalar s = Scalar(1) - x[i] * x[i];
      local_sum += s * s + a_ * x[i] * x[i] * x[i];
    }
    return cell_ * (lambda_ / Scalar(2) * bond_sum +
                    local_sum / (Scalar(4) * lambda_));
  }

  Vector grad(const Eigen::Ref<const Vector>& x) const {
    check_dim(x.size());
    Vector g(d_);
    const Scalar bond_coef = lambda_ / (h_ * h_);
    const Scalar local_coef = Scalar(1) / (Scalar(4) * lambda_);
    const int degree = static_cast<int>(nbr_.rows());
    for (int i = 0; i < d_; ++i) {
      Scalar acc = 0;
      for (int k = 0; k < degree; ++k) acc += x[i] - x[nbr_(k, i)];
      const Scalar xi = x[i];
      g[i] = cell_ * (bond_coef * acc +
                      local_coef * (Scalar(-4) * xi * (Scalar(1) - xi * xi) +
                                    Scalar(3) * a_ * xi * xi));
    }
    return g;
  }

 private:
  void check_dim(Eigen::Index n) const {
    if (n != d_)
      throw ValidationError("potential: state has dimension " + std::to_string(n) +
                            ", expected " + std::to_string(d_));
  }

  Geometry geometry_ = Geometry::Chain1D;
  int d_ = 0;
  int side_ = 0;
  Scalar h_ = 0, lambda_ = 0, a_ = 0, cell_ = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> nbr_;  // degree x d
  std::vector<std::array<int, 2>> bonds_;
};

template <typename Scalar = double>
Potential<Scalar> build_potential(const PotentialSpec& spec) {
  return Potential<Scalar>::build(spec);
}

template <typename Scalar>
Scalar energy(const Potential<Scalar>& pot,
              const Eigen::Ref<const typename Potential<Scalar>::Vector>& x) {
  return pot.energy(x);
}

template <typename Scalar>
typename Potential<Scalar>::Vector grad(
    const Potential<Scalar>& pot,
    const Eigen::Ref<const typename Potential<Scalar>::Vector>& x) {
  return pot.grad(x);
}

}  // namespace fhtgibbs
