#include "scotrl/rewards.hpp"

namespace scotrl {

bool correctness(const StructuredTrajectory& t, TokenId gt_answer, const VocabSpec& vocab) {
  const auto ans = extract_answer(t.tokens, t.seg, vocab);
  return ans.has_value() && *ans == gt_answer;
}

double group_accuracy(const std::vector<std::uint8_t>& correct_flags) {
  if (correct_flags.empty()) throw InvariantError("group_accuracy: empty group");
  double sum = 0.0;
  for (std::uint8_t f : correct_flags) sum += f ? 1.0 : 0.0;
  return sum / static_cast<double>(correct_flags.size());
}

double base_reward(bool correct, bool format_ok, double format_weight) {
  return (correct ? 1.0 : 0.0) + format_weight * (format_ok ? 1.0 : 0.0);
}

double augmented_reward(double base, double sim, const RewardConfig& cfg) {
  if (cfg.mode == RewardMode::SelfSupervised) return cfg.gamma1 * base;
  return cfg.gamma1 * base + cfg.gamma2 * sim;
}

GroupRewards score_group(const SampleGroup& group, TokenId gt_answer, const TokenSeq& gt_summary,
                         const VocabSpec& vocab, const RewardConfig& cfg,
                         const EmbeddingProvider& provider) {
  cfg.validate();
  if (group.size() < 1) throw InvariantError("score_group: empty group");

  GroupRewards out;
  const size_t g = group.members.size();
  out.correct.resize(g);
  out.format_ok.resize(g);
  out.sim.assign(g, 0.0);
  out.r_aug.resize(g);

  const bool need_sim = cfg.mode == RewardMode::GtSupervised && cfg.gamma2 != 0.0;
  for (size_t i = 0; i < g; ++i) {
    const StructuredTrajectory& t = group.members[i];
    out.format_ok[i] = t.seg.parse_ok ? 1 : 0;
    out.correct[i] = correctness(t, gt_answer, vocab) ? 1 : 0;
    if (need_sim && t.seg.parse_ok) {
      TokenSeq summary(t.tokens.begin() + t.seg.summary.begin,
                       t.tokens.begin() + t.seg.summary.end);
      out.sim[i] = composite_sim(summary, gt_summary, cfg.sim_weights, provider, cfg.bleu_max_n);
    }
    const double base = base_reward(out.correct[i], out.format_ok[i], cfg.format_weight);
    out.r_aug[i] = augmented_reward(base, out.sim[i], cfg);
  }
  out.accuracy = group_accuracy(out.correct);
  return out;
}

}  // namespace scotrl
