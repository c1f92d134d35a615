#pragma once

#include <cstddef>

#include "teprompt/tensor.hpp"

namespace teprompt {

/// Probability floor applied before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// -log(probs[gold]) with the probability clamped at kProbabilityFloor
/// (logged once per call when clamping happens). Throws std::out_of_range
/// when `gold` is not an index of `probs`. A NaN probability yields NaN.
double task_loss(const Vector& probs, std::size_t gold);

/// Per-head loss weights of one training objective.
struct LossWeights {
  double drr = 1.0;
  double ssc = 0.0;
  double acp = 0.0;
};

/// L = L_d + beta * L_s + gamma * L_c.
inline double joint_loss(double l_drr, double l_ssc, double l_acp, double beta, double gamma) {
  return l_drr + beta * l_ssc + gamma * l_acp;
}

}  // namespace teprompt
