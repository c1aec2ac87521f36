#include "scotrl/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace scotrl {

std::vector<double> advantages(const std::vector<double>& rewards, double eps_std) {
  if (rewards.size() < 2) throw InvariantError("advantages: group size must be >= 2");
  if (eps_std < 0.0) throw InvariantError("advantages: eps_std must be >= 0");
  const double g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= g;
  const double denom = std::sqrt(var) + eps_std;
  std::vector<double> a(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) a[i] = (rewards[i] - mean) / denom;
  return a;
}

TokenWeights assemble_weights(const SampleGroup& group, const std::vector<double>& omega_s,
                              const DiversityWeights* dvr, bool cvk_on, bool dvr_on) {
  TokenWeights w(group.members.size());
  for (size_t g = 0; g < group.members.size(); ++g) {
    const StructuredTrajectory& m = group.members[g];
    w[g].assign(m.tokens.size(), 1.0);
    if (!m.seg.parse_ok) continue;

    if (cvk_on) {
      const int n = std::min(m.seg.summary.len(), static_cast<int>(omega_s.size()));
      for (int t = 0; t < n; ++t)
        w[g][static_cast<size_t>(m.seg.summary.begin + t)] = omega_s[static_cast<size_t>(t)];
    }
    if (dvr_on && dvr != nullptr) {
      if (dvr->think_base.size() != group.members.size() ||
          dvr->answer_base.size() != group.members.size())
        throw InvariantError("assemble_weights: diversity weights do not match group");
      for (int i = 0; i < m.seg.think.len(); ++i)
        w[g][static_cast<size_t>(m.seg.think.begin + i)] =
            dvr->dynamic(dvr->think_base[g][static_cast<size_t>(i)]);
      for (int i = 0; i < m.seg.answer.len(); ++i)
        w[g][static_cast<size_t>(m.seg.answer.begin + i)] =
            dvr->dynamic(dvr->answer_base[g][static_cast<size_t>(i)]);
    }
  }
  return w;
}

SurrogateResult surrogate(const TokenWeights& w, const std::vector<double>& adv,
                          const std::vector<std::vector<double>>& new_probs,
                          const std::vector<std::vector<double>>& old_probs, double clip_eps) {
  if (clip_eps <= 0.0 || clip_eps >= 1.0) throw InvariantError("surrogate: clip_eps must be in (0, 1)");
  const size_t g_count = w.size();
  if (adv.size() != g_count || new_probs.size() != g_count || old_probs.size() != g_count)
    throw InvariantError("surrogate: group dimensions disagree");

  SurrogateResult out;
  int clipped = 0;
  for (size_t g = 0; g < g_count; ++g) {
    if (new_probs[g].size() != w[g].size() || old_probs[g].size() != w[g].size())
      throw InvariantError("surrogate: token dimensions disagree");
    for (size_t t = 0; t < w[g].size(); ++t) {
      const double old_p = old_probs[g][t];
      if (old_p <= 0.0) throw InvariantError("surrogate: nonpositive old probability");
      const double r = new_probs[g][t] / old_p;
      const double plain = r * adv[g];
      const double clip = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps) * adv[g];
      out.value += w[g][t] * std::min(plain, clip);
      ++out.token_count;
      if (clip < plain) ++clipped;
    }
  }
  if (g_count > 0) out.value /= static_cast<double>(g_count);
  out.clip_frac = out.token_count > 0 ? static_cast<double>(clipped) / out.token_count : 0.0;
  return out;
}

double kl_regularizer(const std::vector<std::vector<double>>& ref_probs,
                      const std::vector<std::vector<double>>& new_probs, double kl_coeff) {
  if (kl_coeff < 0.0) throw InvariantError("kl_regularizer: kl_coeff must be >= 0");
  if (ref_probs.size() != new_probs.size())
    throw InvariantError("kl_regularizer: group dimensions disagree");
  double sum = 0.0;
  int count = 0;
  for (size_t g = 0; g < ref_probs.size(); ++g) {
    if (ref_probs[g].size() != new_probs[g].size())
      throw InvariantError("kl_regularizer: token dimensions disagree");
    for (size_t t = 0; t < ref_probs[g].size(); ++t) {
      const double ref = ref_probs[g][t];
      const double neu = new_probs[g][t];
      if (ref <= 0.0 || neu <= 0.0) throw InvariantError("kl_regularizer: nonpositive probability");
      const double ratio = ref / neu;
      sum += ratio - std::log(ratio) - 1.0;
      ++count;
    }
  }
  return count > 0 ? kl_coeff * sum / count : 0.0;
}

}  // namespace scotrl
