#pragma once

#include "scotrl/trajectory.hpp"

#include <cstdint>
#include <vector>

namespace scotrl {

// Per-position consistency anchor over summary content: dist[t] is the
// arithmetic mean of the contributing members' sampling distributions at
// summary position t. Contributors are the correct members; if none are
// correct, all members with a parsed summary contribute. Length is the
// minimum contributing summary length (0 when nobody has a summary).
struct ConsistencyAnchor {
  std::vector<Vec> dist;

  int length() const { return static_cast<int>(dist.size()); }
};

ConsistencyAnchor compute_anchor(const SampleGroup& group,
                                 const std::vector<std::uint8_t>& correct_flags);

// D[t] = (1/G) * sum_g KL(p_{g,t} || anchor[t]) for t < anchor length.
// Members lacking summary position t are skipped; the divisor stays G.
std::vector<double> kl_dispersion(const SampleGroup& group, const ConsistencyAnchor& anchor);

// omega_s[t] = 1 - lambda * (D[t] - D_min) / (D_max - D_min), in
// [1 - lambda, 1]. Degenerate dispersion (D_max == D_min) gives all ones.
std::vector<double> summary_weights(const std::vector<double>& dispersion, double lambda);

}  // namespace scotrl
