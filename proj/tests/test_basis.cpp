#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "fhtgibbs/fht/basis.hpp"
#include "support/quadrature.hpp"

using fhtgibbs::FourierBasis;
using fhtgibbs::ValidationError;

TEST_CASE("basis is orthonormal on [-w, w]") {
  const int q = 7;
  const double w = 2.5;
  const FourierBasis<double> basis(q, w);
  const int n = basis.size();
  REQUIRE(n == 15);
  Eigen::VectorXd pts, wts;
  testsup::gauss_legendre(400, -w, w, pts, wts);
  const Eigen::MatrixXd vals = basis.eval_grid(pts);  // npts x n
  const Eigen::MatrixXd gram = vals.transpose() * wts.asDiagonal() * vals;
  CHECK((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("recurrence matches direct trigonometric evaluation") {
  const int q = 9;
  const double w = 1.7;
  const FourierBasis<double> basis(q, w);
  for (const double t : {-1.7, -0.93, 0.0, 0.311, 1.2, 1.7}) {
    const Eigen::VectorXd v = basis.eval(t);
    CHECK(v[0] == doctest::Approx(1.0 / std::sqrt(2.0 * w)).epsilon(1e-14));
    for (int k = 1; k <= q; ++k) {
      const double angle = M_PI * k * (t + w) / w;
      CHECK(v[2 * k - 1] == doctest::Approx(std::cos(angle) / std::sqrt(w)).epsilon(1e-11));
      CHECK(v[2 * k] == doctest::Approx(std::sin(angle) / std::sqrt(w)).epsilon(1e-11));
    }
  }
}

TEST_CASE("integral vector matches quadrature") {
  const FourierBasis<double> basis(5, 3.0);
  const Eigen::VectorXd iv = basis.integral();
  for (int k = 0; k < basis.size(); ++k) {
    const double ref =
        testsup::integrate([&](double t) { return basis.eval(t)[k]; }, -3.0, 3.0, 300);
    CHECK(iv[k] == doctest::Approx(ref).epsilon(1).scale(1e-12));
  }
  CHECK(iv[0] == doctest::Approx(std::sqrt(6.0)).epsilon(1e-15));
}

TEST_CASE("eval_grid rows agree with eval") {
  const FourierBasis<double> basis(3, 2.0);
  Eigen::VectorXd pts(4);
  pts << -2.0, -0.5, 0.25, 1.9;
  const Eigen::MatrixXd grid = basis.eval_grid(pts);
  REQUIRE(grid.rows() == 4);
  REQUIRE(grid.cols() == basis.size());
  // not bitwise: the compiler may fuse cos/sin into sincos at one call site
  for (int p = 0; p < 4; ++p)
    CHECK((grid.row(p).transpose() - basis.eval(pts[p])).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("basis endpoints wrap periodically") {
  const FourierBasis<double> basis(4, 2.0);
  CHECK((basis.eval(-2.0) - basis.eval(2.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("basis validation") {
  CHECK_THROWS_AS(FourierBasis<double>(0, 1.0), ValidationError);
  CHECK_THROWS_AS(FourierBasis<double>(3, 0.0), ValidationError);
  CHECK_THROWS_AS(FourierBasis<double>(3, -1.0), ValidationError);
}
