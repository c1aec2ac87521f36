#pragma once

#include "scotrl/trajectory.hpp"

#include <vector>

namespace scotrl {

enum class DiversityMetric { Entropy, Kl };

// Per-member, per-position diversity base weights omega_d in [1, 1+lambda'].
// think_base[g][i] / answer_base[g][i] index the i-th think / answer content
// position of member g; unparsed members have empty rows. The dynamic weight
// is omega_d * (1 - accuracy).
struct DiversityWeights {
  std::vector<std::vector<double>> think_base;
  std::vector<std::vector<double>> answer_base;
  double accuracy = 0.0;
  double h_min = 0.0;
  double h_max = 0.0;
  bool degenerate = true;  // no score spread: every base weight is 1

  double dynamic(double base) const { return base * (1.0 - accuracy); }
};

// Normalization bounds come from think-segment positions only (the answer
// segment reuses them, clamped), matching the segment the diversity signal is
// defined on. metric Entropy scores each position by the sampling entropy;
// metric Kl scores think positions by KL against the all-member aligned think
// mean and leaves answer positions at base 1.
DiversityWeights diversity_weights(const SampleGroup& group, double accuracy,
                                   double lambda_prime, DiversityMetric metric);

}  // namespace scotrl
