#pragma once

#include "scotrl/text_metrics.hpp"
#include "scotrl/trajectory.hpp"

#include <cstdint>
#include <vector>

namespace scotrl {

enum class RewardMode { GtSupervised, SelfSupervised };

struct RewardConfig {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double format_weight = 0.5;
  RewardMode mode = RewardMode::GtSupervised;
  SimilarityWeights sim_weights;
  int bleu_max_n = 4;

  void validate() const {
    if (gamma1 < 0.0 || gamma2 < 0.0 || gamma1 + gamma2 <= 0.0)
      throw InvariantError("RewardConfig: gamma1, gamma2 must be nonnegative with positive sum");
    if (format_weight < 0.0) throw InvariantError("RewardConfig: format_weight must be nonnegative");
    sim_weights.validate();
  }
};

// Strict correctness: requires a parsed trajectory whose answer span yields
// the ground-truth choice token.
bool correctness(const StructuredTrajectory& t, TokenId gt_answer, const VocabSpec& vocab);

double group_accuracy(const std::vector<std::uint8_t>& correct_flags);

// R = correct + format_weight * format_ok.
double base_reward(bool correct, bool format_ok, double format_weight);

// gt-supervised: gamma1 * R + gamma2 * sim. self-supervised drops the
// similarity term entirely (supervision enters through the summary weights).
double augmented_reward(double base, double sim, const RewardConfig& cfg);

struct GroupRewards {
  std::vector<std::uint8_t> correct;
  std::vector<std::uint8_t> format_ok;
  std::vector<double> sim;    // composite similarity, 0 where no parsed summary
  std::vector<double> r_aug;
  double accuracy = 0.0;
};

// Scores every member of a group against the ground-truth answer token and
// (gt-supervised mode only) the ground-truth summary.
GroupRewards score_group(const SampleGroup& group, TokenId gt_answer, const TokenSeq& gt_summary,
                         const VocabSpec& vocab, const RewardConfig& cfg,
                         const EmbeddingProvider& provider);

}  // namespace scotrl
