#pragma once

#include "scotrl/cvk.hpp"
#include "scotrl/dvr.hpp"
#include "scotrl/trajectory.hpp"

#include <vector>

namespace scotrl {

// Group-normalized advantages: (R - mean) / (std_pop + eps_std).
std::vector<double> advantages(const std::vector<double>& rewards, double eps_std = 1e-4);

// Per-member, per-generated-position objective weights. Layout mirrors the
// member token sequences.
using TokenWeights = std::vector<std::vector<double>>;

// Piecewise weight map: summary content positions get the shared
// summary weight for their position (cvk enabled), think and answer content
// positions get the member's dynamic diversity weight (dvr enabled), and
// every other position (tags, unparsed members, positions past the anchor
// length) gets 1.
TokenWeights assemble_weights(const SampleGroup& group, const std::vector<double>& omega_s,
                              const DiversityWeights* dvr, bool cvk_on, bool dvr_on);

struct SurrogateResult {
  double value = 0.0;
  double clip_frac = 0.0;  // fraction of positions where the clipped branch was strictly lower
  int token_count = 0;
};

// (1/G) sum_g sum_t W * min(r * A, clip(r, 1-eps, 1+eps) * A) with
// r = new_prob / old_prob. Throws on nonpositive old probabilities.
SurrogateResult surrogate(const TokenWeights& w, const std::vector<double>& adv,
                          const std::vector<std::vector<double>>& new_probs,
                          const std::vector<std::vector<double>>& old_probs, double clip_eps);

// kl_coeff * mean over (g, t) of (ref/new - ln(ref/new) - 1); nonnegative,
// zero when the policies agree on every realized token.
double kl_regularizer(const std::vector<std::vector<double>>& ref_probs,
                      const std::vector<std::vector<double>>& new_probs, double kl_coeff);

}  // namespace scotrl
