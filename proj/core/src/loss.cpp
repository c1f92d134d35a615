#include "teprompt/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace teprompt {

double task_loss(const Vector& probs, std::size_t gold) {
  if (gold >= static_cast<std::size_t>(probs.size())) {
    throw std::out_of_range("gold index " + std::to_string(gold) + " outside a " + std::to_string(probs.size()) +
                            "-way answer space");
  }
  double p = probs(static_cast<Eigen::Index>(gold));
  // NaN passes through so the caller can report the diverged batch.
  if (std::isnan(p)) return p;
  if (p < kProbabilityFloor) {
    spdlog::warn("gold probability {} clamped to {}", p, kProbabilityFloor);
    p = kProbabilityFloor;
  }
  return -std::log(p);
}

}  // namespace teprompt
