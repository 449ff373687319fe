#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "fhtgibbs/fht/sample.hpp"
#include "support/models.hpp"
#include "support/quadrature.hpp"

using namespace fhtgibbs;

TEST_CASE("sampler reproduces mixture moments and marginals") {
  const auto tree = DimensionTree::build(4);
  const FourierBasis<double> basis(6, 2.0);
  const auto mix = testsup::product_mixture(tree, basis, 2, 42);
  const long count = 60000;
  const Eigen::MatrixXd samples = fht_sample(mix.model, count, 512, 1234u, 1);
  REQUIRE(samples.rows() == 4);
  REQUIRE(samples.cols() == count);
  REQUIRE(samples.allFinite());
  CHECK(samples.cwiseAbs().maxCoeff() <= 2.0);

  for (int site = 0; site < 4; ++site) {
    CAPTURE(site);
    const double exact_mean = testsup::integrate(
        [&](double t) { return t * mix.marginal1(site, t); }, -2.0, 2.0, 300);
    const double got = samples.row(site).mean();
    CHECK(got == doctest::Approx(exact_mean).epsilon(1).scale(0.025));
  }

  // one-dimensional histogram against the exact marginal
  const int bins = 40;
  const double width = 4.0 / bins;
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(bins);
  for (long s = 0; s < count; ++s) {
    const int b = std::min(bins - 1, static_cast<int>((samples(1, s) + 2.0) / width));
    hist[b] += 1.0;
  }
  hist /= static_cast<double>(count);
  double tv = 0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -2.0 + b * width, hi = lo + width;
    const double exact =
        testsup::integrate([&](double t) { return mix.marginal1(1, t); }, lo, hi, 40);
    tv += 0.5 * std::abs(hist[b] - exact);
  }
  CHECK(tv < 0.03);
}

TEST_CASE("sampling is deterministic and worker-independent") {
  const auto tree = DimensionTree::build(8);
  const FourierBasis<double> basis(4, 2.0);
  const auto mix = testsup::product_mixture(tree, basis, 2, 7);
  const Eigen::MatrixXd a = fht_sample(mix.model, 500, 128, 99u, 1);
  const Eigen::MatrixXd b = fht_sample(mix.model, 500, 128, 99u, 3);
  CHECK((a.array() == b.array()).all());
  const Eigen::MatrixXd c = fht_sample(mix.model, 500, 128, 100u, 1);
  CHECK(!(a.array() == c.array()).all());
}

TEST_CASE("each draw consumes exactly two uniforms per site") {
  const auto tree = DimensionTree::build(4);
  const FourierBasis<double> basis(5, 2.0);
  const auto mix = testsup::product_mixture(tree, basis, 2, 15);
  const FhtSampler<double> sampler(mix.model, 256);
  RngStream used(321), twin(321);
  (void)sampler.draw(used);
  for (int k = 0; k < 2 * 4; ++k) (void)twin.uniform();
  CHECK(used.uniform() == twin.uniform());
}

TEST_CASE("sampler validates inputs") {
  const auto tree = DimensionTree::build(4);
  const FourierBasis<double> basis(3, 1.0);
  const auto mix = testsup::product_mixture(tree, basis, 2, 3);
  CHECK_THROWS_AS(FhtSampler<double>(mix.model, 32), ValidationError);
  CHECK_THROWS_AS((void)fht_sample(mix.model, -1, 128, 1u, 1), ValidationError);
  CHECK_NOTHROW((void)fht_sample(mix.model, 0, 128, 1u, 1));
}

TEST_CASE("grid resolution controls the discretization error") {
  const auto tree = DimensionTree::build(4);
  const FourierBasis<double> basis(5, 2.0);
  const auto mix = testsup::product_mixture(tree, basis, 2, 28);
  // coarse and fine grids should give close but not identical second moments
  const Eigen::MatrixXd coarse = fht_sample(mix.model, 20000, 64, 5u, 1);
  const Eigen::MatrixXd fine = fht_sample(mix.model, 20000, 1024, 5u, 1);
  const double mc = coarse.row(2).array().square().mean();
  const double mf = fine.row(2).array().square().mean();
  CHECK(mc == doctest::Approx(mf).epsilon(0.05));
}
