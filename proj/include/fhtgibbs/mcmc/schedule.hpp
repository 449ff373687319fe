#pragma once

#include <cmath>
#include <string>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

enum class ScheduleKind { Linear, Geometric };

inline std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::Linear ? "linear" : "geometric";
}

// Inverse-temperature path beta(t), t = l/L, from beta0 to beta.
//   linear:    beta(t) = beta0 + t (beta - beta0)
//   geometric: beta(t) = beta0 (beta/beta0)^t
// dbeta_at is the exact derivative of the path at t = l/L; birth-death rates
// use it so the reweighting matches the annealing actually performed.
class AnnealingSchedule {
 public:
  static AnnealingSchedule make(double beta0, double beta, int levels, ScheduleKind kind) {
    if (!(beta0 > 0)) throw ValidationError("schedule: beta0 must be positive");
    if (!(beta >= beta0)) throw ValidationError("schedule: beta must be >= beta0");
    if (levels < 1) throw ValidationError("schedule: levels must be >= 1");
    AnnealingSchedule s;
    s.beta0_ = beta0;
    s.beta_ = beta;
    s.levels_ = levels;
    s.kind_ = kind;
    return s;
  }

  double beta0() const { return beta0_; }
  double beta_final() const { return beta_; }
  int levels() const { return levels_; }
  ScheduleKind kind() const { return kind_; }

  // l in [0, levels]; endpoints are exact.
  double beta_at(int l) const {
    check_level(l);
    if (l == 0) return beta0_;
    if (l == levels_) return beta_;
    const double t = static_cast<double>(l) / levels_;
    if (kind_ == ScheduleKind::Linear) return beta0_ + t * (beta_ - beta0_);
    return beta0_ * std::pow(beta_ / beta0_, t);
  }

  double dbeta_at(int l) const {
    check_level(l);
    if (kind_ == ScheduleKind::Linear) return beta_ - beta0_;
    return beta_at(l) * std::log(beta_ / beta0_);
  }

 private:
  void check_level(int l) const {
    if (l < 0 || l > levels_)
      throw ValidationError("schedule: level " + std::to_string(l) + " outside [0, " +
                            std::to_string(levels_) + "]");
  }

  double beta0_ = 1, beta_ = 1;
  int levels_ = 1;
  ScheduleKind kind_ = ScheduleKind::Linear;
};

}  // namespace fhtgibbs
