#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/log.hpp"
#include "fhtgibbs/core/parallel.hpp"
#include "fhtgibbs/core/rng.hpp"
#include "fhtgibbs/mcmc/ensemble.hpp"
#include "fhtgibbs/mcmc/kernels.hpp"
#include "fhtgibbs/mcmc/schedule.hpp"

namespace fhtgibbs {

// Stretch factor with density proportional to 1/sqrt(z) on [1/a, a], via
// inverse CDF; satisfies g(1/z) = z g(z), which the snooker acceptance needs.
inline double sample_stretch(double stretch_a, double u) {
  const double s = std::sqrt(stretch_a);
  const double base = (s - 1.0 / s) * u + 1.0 / s;
  return base * base;
}

// Snooker update of particle k along a line through a random partner:
//   y = (1 - r) x_j + r x_k,  accept with min{1, |r|^{d-1} p(y)/p(x_k)}.
// Consumes exactly three shared draws (partner, stretch, accept).
template <LangevinTarget T>
bool snooker_move(ParticleEnsemble& ens, int k, const T& target, double stretch_a) {
  const int n = ens.size();
  if (n < 2) throw ValidationError("snooker: needs at least two particles");
  if (k < 0 || k >= n) throw ValidationError("snooker: particle index out of range");
  if (!(stretch_a > 1)) throw ValidationError("snooker: stretch parameter must exceed 1");
  int j = static_cast<int>(ens.shared_rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
  if (j >= k) ++j;
  const double r = sample_stretch(stretch_a, ens.shared_rng.uniform());
  const Eigen::VectorXd y =
      ens.particles.col(j) + r * (ens.particles.col(k) - ens.particles.col(j));
  const int d = ens.dim();
  const double u_y = target.value(y);
  double log_alpha;
  if (!std::isfinite(u_y)) {
    log_alpha = -std::numeric_limits<double>::infinity();
  } else {
    log_alpha = std::min(
        0.0, (d - 1) * std::log(std::abs(r)) - u_y + target.value(ens.particles.col(k)));
    if (std::isnan(log_alpha)) log_alpha = -std::numeric_limits<double>::infinity();
  }
  const double u = ens.shared_rng.uniform();
  const bool accept = std::log(u) < log_alpha;
  if (accept) ens.particles.col(k) = y;
  return accept;
}

// Birth-death reweighting of particle k. Rates gamma_j = dbeta(l) V(x_j) over
// the current population; above-average particles are killed (replaced by a
// uniformly chosen other), below-average ones are duplicated onto a uniformly
// chosen other. The population size never changes.
template <EnergyModel M>
void birth_death_move(ParticleEnsemble& ens, int k, const M& model,
                      const AnnealingSchedule& sched, int level) {
  const int n = ens.size();
  if (n < 2) throw ValidationError("birth-death: needs at least two particles");
  if (k < 0 || k >= n) throw ValidationError("birth-death: particle index out of range");
  const double db = sched.dbeta_at(level);
  double mean_rate = 0;
  double rate_k = 0;
  for (int j = 0; j < n; ++j) {
    const double g = db * model.energy(ens.particles.col(j));
    mean_rate += g;
    if (j == k) rate_k = g;
  }
  mean_rate /= n;
  const double levels = static_cast<double>(sched.levels());
  if (rate_k > mean_rate) {
    const double p_kill = 1.0 - std::exp(-(rate_k - mean_rate) / levels);
    if (ens.shared_rng.uniform() < p_kill) {
      int j = static_cast<int>(ens.shared_rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
      if (j >= k) ++j;
      ens.particles.col(k) = ens.particles.col(j);
    }
  } else if (rate_k < mean_rate) {
    const double p_dup = 1.0 - std::exp((rate_k - mean_rate) / levels);
    if (ens.shared_rng.uniform() < p_dup) {
      int j = static_cast<int>(ens.shared_rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
      if (j >= k) ++j;
      ens.particles.col(j) = ens.particles.col(k);
    }
  }
}

struct AisParams {
  double dt = 0;          // absolute Langevin step
  int mala_steps = 0;     // adjusted steps per level
  int ula_substeps = 0;   // unadjusted substeps per particle per level; 0 = auto
  double stretch_a = 2.0;
  int workers = 1;
};

// Called after the interaction phase of each level (step 0) and after each
// full adjusted sweep (steps 1..mala_steps).
using LevelHook = std::function<void(const ParticleEnsemble&, int level, int step)>;

struct AisReport {
  int ula_substeps = 0;
  long mala_steps = 0;
  long mala_accepted = 0;
};

// One annealing pass over the ensemble: at each level, every particle runs
// the unadjusted substeps followed by its snooker and birth-death updates
// (sequential, shared stream), then the whole population takes mala_steps
// adjusted sweeps (parallel, private streams).
template <EnergyModel M>
AisReport ais_run(ParticleEnsemble& ens, const M& model, const AnnealingSchedule& sched,
                  const AisParams& params, const LevelHook& hook = {}) {
  if (!(params.dt > 0)) throw ValidationError("ais: dt must be positive");
  if (params.mala_steps < 0) throw ValidationError("ais: mala_steps must be >= 0");
  if (params.ula_substeps < 0) throw ValidationError("ais: ula_substeps must be >= 0");
  if (ens.dim() != model.dim()) throw ValidationError("ais: ensemble/model dimension mismatch");
  const int levels = sched.levels();
  int substeps = params.ula_substeps;
  if (substeps == 0)
    substeps = static_cast<int>(std::max(1L, std::lround(1.0 / (levels * params.dt))));
  const int n = ens.size();
  const bool interact = n >= 2;
  if (!interact)
    warn("ais: single-particle ensemble, snooker and birth-death updates disabled");

  AisReport report;
  report.ula_substeps = substeps;
  std::vector<long> accepted(static_cast<std::size_t>(n), 0);
  for (int l = 1; l <= levels; ++l) {
    const ScaledTarget<M> target{&model, sched.beta_at(l)};
    for (int i = 0; i < n; ++i) {
      KernelParams kp{params.dt, &ens.particle_rng[static_cast<std::size_t>(i)]};
      for (int s = 0; s < substeps; ++s)
        ens.particles.col(i) = ula_step(ens.particles.col(i), target, kp);
      if (interact) {
        snooker_move(ens, i, target, params.stretch_a);
        birth_death_move(ens, i, model, sched, l);
      }
    }
    if (!ens.particles.allFinite())
      throw NumericalError("ais: ensemble diverged at level " + std::to_string(l));
    if (hook) hook(ens, l, 0);
    for (int step = 1; step <= params.mala_steps; ++step) {
      parallel_for(static_cast<std::size_t>(n), params.workers, [&](std::size_t i) {
        KernelParams kp{params.dt, &ens.particle_rng[i]};
        auto [y, ok] = mala_step(ens.particles.col(static_cast<int>(i)), target, kp);
        ens.particles.col(static_cast<int>(i)) = std::move(y);
        if (ok) ++accepted[i];
      });
      if (hook) hook(ens, l, step);
    }
  }
  for (long a : accepted) report.mala_accepted += a;
  report.mala_steps = static_cast<long>(levels) * params.mala_steps * n;
  return report;
}

struct WeightedAisParams {
  double dt = 0;
  int mala_steps = 0;   // adjusted steps per annealing transition
  int burnin_steps = 0; // adjusted steps at beta0 before weighting starts
  int workers = 1;
};

struct WeightedRun {
  Eigen::MatrixXd samples;      // d x count, final states
  Eigen::VectorXd log_weights;  // count
};

// Independent weighted annealing chains. Each chain accumulates
//   log w += (beta_{l-1} - beta_l) V(x)
// at its current state before the level-l transition; with V >= 0 and a
// non-decreasing schedule every weight stays <= 1. mean(exp(log w)) estimates
// Z_final / Z_0.
template <EnergyModel M, typename InitFn>
WeightedRun ais_weighted(const M& model, const AnnealingSchedule& sched,
                         const WeightedAisParams& params, int count, std::uint64_t seed,
                         InitFn&& init) {
  if (count < 1) throw ValidationError("ais_weighted: count must be >= 1");
  if (!(params.dt > 0)) throw ValidationError("ais_weighted: dt must be positive");
  if (params.mala_steps < 0 || params.burnin_steps < 0)
    throw ValidationError("ais_weighted: step counts must be >= 0");
  const int d = model.dim();
  WeightedRun out;
  out.samples.resize(d, count);
  out.log_weights.resize(count);
  const int levels = sched.levels();
  parallel_for(static_cast<std::size_t>(count), params.workers, [&](std::size_t c) {
    RngStream rng(derive_seed(seed, 0x636861696eULL, static_cast<std::uint64_t>(c)));
    KernelParams kp{params.dt, &rng};
    Eigen::VectorXd x = init(rng);
    if (x.size() != d) throw ValidationError("ais_weighted: init state has wrong dimension");
    if (params.burnin_steps > 0) {
      const ScaledTarget<M> base{&model, sched.beta_at(0)};
      x = run_mala(x, base, kp, params.burnin_steps).x;
    }
    double logw = 0;
    for (int l = 1; l <= levels; ++l) {
      logw += (sched.beta_at(l - 1) - sched.beta_at(l)) * model.energy(x);
      if (l < levels) {
        const ScaledTarget<M> target{&model, sched.beta_at(l)};
        x = run_mala(x, target, kp, params.mala_steps).x;
      }
    }
    if (!x.allFinite() || !std::isfinite(logw))
      throw NumericalError("ais_weighted: chain " + std::to_string(c) + " diverged");
    out.samples.col(static_cast<Eigen::Index>(c)) = x;
    out.log_weights[static_cast<Eigen::Index>(c)] = logw;
  });
  return out;
}

}  // namespace fhtgibbs
