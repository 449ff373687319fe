#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/rng.hpp"

namespace fhtgibbs {

// A population of interacting particles, one column each. Every particle owns
// a private stream (safe to advance in parallel); all interaction draws come
// from the single shared stream, consumed in particle order, so results do
// not depend on how particles are partitioned across workers.
struct ParticleEnsemble {
  Eigen::MatrixXd particles;  // d x n
  std::vector<RngStream> particle_rng;
  RngStream shared_rng;

  int dim() const { return static_cast<int>(particles.rows()); }
  int size() const { return static_cast<int>(particles.cols()); }

  static ParticleEnsemble create(int d, int n, std::uint64_t seed) {
    if (d < 1) throw ValidationError("ensemble: dimension must be >= 1");
    if (n < 1) throw ValidationError("ensemble: particle count must be >= 1");
    ParticleEnsemble e;
    e.particles = Eigen::MatrixXd::Zero(d, n);
    e.particle_rng.reserve(n);
    for (int i = 0; i < n; ++i)
      e.particle_rng.emplace_back(derive_seed(seed, 0x706172746963ULL, static_cast<std::uint64_t>(i)));
    e.shared_rng = RngStream(derive_seed(seed, 0x736861726564ULL));
    return e;
  }
};

}  // namespace fhtgibbs
