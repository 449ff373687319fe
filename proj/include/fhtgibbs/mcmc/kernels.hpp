#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <limits>
#include <utility>

#include "fhtgibbs/core/errors.hpp"
#include "fhtgibbs/core/rng.hpp"

namespace fhtgibbs {

// Anything with an energy and a gradient; the lattice potential is the main
// model, tests supply small analytic ones.
template <typename M>
concept EnergyModel = requires(const M& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  { m.dim() } -> std::convertible_to<int>;
  { m.energy(x) } -> std::convertible_to<double>;
  { m.grad(x) } -> std::convertible_to<Eigen::VectorXd>;
};

// Target U(x) = beta_eff * V(x) for Langevin kernels.
template <EnergyModel M>
struct ScaledTarget {
  const M* model;
  double beta_eff;

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return beta_eff * model->energy(x);
  }
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return beta_eff * model->grad(x);
  }
};

template <typename T>
concept LangevinTarget = requires(const T& t, const Eigen::Ref<const Eigen::VectorXd>& x) {
  { t.value(x) } -> std::convertible_to<double>;
  { t.gradient(x) } -> std::convertible_to<Eigen::VectorXd>;
};

struct KernelParams {
  double dt = 0;          // absolute step size
  RngStream* rng = nullptr;
};

inline void check_kernel_params(const KernelParams& p) {
  if (!(p.dt > 0)) throw ValidationError("kernel: dt must be positive");
  if (p.rng == nullptr) throw ValidationError("kernel: rng stream required");
}

// Deterministic part of the unadjusted Langevin update, x - dt grad U(x).
template <LangevinTarget T>
Eigen::VectorXd ula_drift(const Eigen::Ref<const Eigen::VectorXd>& x, const T& target,
                          double dt) {
  Eigen::VectorXd g = target.gradient(x);
  if (!g.allFinite()) throw NumericalError("ULA: non-finite gradient");
  return x - dt * g;
}

template <LangevinTarget T>
Eigen::VectorXd ula_step(const Eigen::Ref<const Eigen::VectorXd>& x, const T& target,
                         const KernelParams& p) {
  check_kernel_params(p);
  Eigen::VectorXd y = ula_drift(x, target, p.dt);
  const double noise = std::sqrt(2.0 * p.dt);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise * p.rng->normal();
  return y;
}

// log of the Metropolis ratio for the Langevin proposal
// xhat ~ N(x - dt grad U(x), 2 dt I), capped at 0. A proposal with
// non-finite energy is auto-rejected (-inf).
template <LangevinTarget T>
double mala_log_accept(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& xhat, const T& target,
                       double dt) {
  const double u_new = target.value(xhat);
  if (!std::isfinite(u_new)) return -std::numeric_limits<double>::infinity();
  const double u_old = target.value(x);
  const double fwd = (xhat - x + dt * target.gradient(x)).squaredNorm() / (4.0 * dt);
  const double rev = (x - xhat + dt * target.gradient(xhat)).squaredNorm() / (4.0 * dt);
  const double log_ratio = -u_new - rev + u_old + fwd;
  if (std::isnan(log_ratio)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, log_ratio);
}

// One Metropolis-adjusted Langevin step. Always consumes d normals plus one
// uniform so the stream layout does not depend on the accept decision.
template <LangevinTarget T>
std::pair<Eigen::VectorXd, bool> mala_step(const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const T& target, const KernelParams& p) {
  check_kernel_params(p);
  Eigen::VectorXd xhat = ula_step(x, target, p);
  const double log_alpha = mala_log_accept(x, xhat, target, p.dt);
  const double u = p.rng->uniform();
  const bool accept = std::log(u) < log_alpha;
  if (accept) return {std::move(xhat), true};
  return {x, false};
}

struct MalaRun {
  Eigen::VectorXd x;
  long steps = 0;
  long accepted = 0;
};

template <LangevinTarget T>
MalaRun run_mala(const Eigen::Ref<const Eigen::VectorXd>& x0, const T& target,
                 const KernelParams& p, long steps) {
  if (steps < 0) throw ValidationError("run_mala: steps must be >= 0");
  MalaRun out;
  out.x = x0;
  out.steps = steps;
  for (long s = 0; s < steps; ++s) {
    auto [y, accepted] = mala_step(out.x, target, p);
    out.x = std::move(y);
    if (accepted) ++out.accepted;
  }
  return out;
}

}  // namespace fhtgibbs
