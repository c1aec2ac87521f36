#include "scotrl/dvr.hpp"

#include "scotrl/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace scotrl {

namespace {

// Score for one generated position, or nullopt where the metric is undefined
// (kl mode beyond the aligned think length or in the answer segment).
struct PositionScores {
  std::vector<std::vector<std::optional<double>>> think;
  std::vector<std::vector<std::optional<double>>> answer;
};

PositionScores entropy_scores(const SampleGroup& group) {
  PositionScores s;
  s.think.resize(group.members.size());
  s.answer.resize(group.members.size());
  for (size_t g = 0; g < group.members.size(); ++g) {
    const StructuredTrajectory& m = group.members[g];
    if (!m.seg.parse_ok) continue;
    for (int i = m.seg.think.begin; i < m.seg.think.end; ++i)
      s.think[g].push_back(entropy(m.dists[static_cast<size_t>(i)]));
    for (int i = m.seg.answer.begin; i < m.seg.answer.end; ++i)
      s.answer[g].push_back(entropy(m.dists[static_cast<size_t>(i)]));
  }
  return s;
}

PositionScores kl_scores(const SampleGroup& group) {
  PositionScores s;
  s.think.resize(group.members.size());
  s.answer.resize(group.members.size());

  int min_len = std::numeric_limits<int>::max();
  int with_think = 0;
  for (const StructuredTrajectory& m : group.members) {
    if (!m.seg.parse_ok || m.seg.think.empty()) continue;
    ++with_think;
    min_len = std::min(min_len, m.seg.think.len());
  }

  std::vector<Vec> mean;
  if (with_think > 0) {
    for (int t = 0; t < min_len; ++t) {
      Vec acc;
      for (const StructuredTrajectory& m : group.members) {
        if (!m.seg.parse_ok || m.seg.think.empty()) continue;
        const Vec& p = m.dists[static_cast<size_t>(m.seg.think.begin + t)];
        if (acc.size() == 0)
          acc = p;
        else
          acc += p;
      }
      acc /= static_cast<double>(with_think);
      mean.push_back(std::move(acc));
    }
  }

  for (size_t g = 0; g < group.members.size(); ++g) {
    const StructuredTrajectory& m = group.members[g];
    if (!m.seg.parse_ok) continue;
    for (int i = 0; i < m.seg.think.len(); ++i) {
      if (i < static_cast<int>(mean.size()))
        s.think[g].push_back(kl_divergence(
            m.dists[static_cast<size_t>(m.seg.think.begin + i)], mean[static_cast<size_t>(i)]));
      else
        s.think[g].push_back(std::nullopt);
    }
    s.answer[g].assign(static_cast<size_t>(m.seg.answer.len()), std::nullopt);
  }
  return s;
}

}  // namespace

DiversityWeights diversity_weights(const SampleGroup& group, double accuracy,
                                   double lambda_prime, DiversityMetric metric) {
  if (group.members.empty()) throw InvariantError("diversity_weights: empty group");
  if (accuracy < 0.0 || accuracy > 1.0)
    throw InvariantError("diversity_weights: accuracy must be in [0, 1]");
  if (lambda_prime < 0.0) throw InvariantError("diversity_weights: lambda_prime must be >= 0");

  const PositionScores scores =
      metric == DiversityMetric::Entropy ? entropy_scores(group) : kl_scores(group);

  // Bounds over the defined think-position scores only.
  double h_min = std::numeric_limits<double>::infinity();
  double h_max = -std::numeric_limits<double>::infinity();
  for (const auto& row : scores.think) {
    for (const auto& v : row) {
      if (!v) continue;
      h_min = std::min(h_min, *v);
      h_max = std::max(h_max, *v);
    }
  }

  DiversityWeights out;
  out.accuracy = accuracy;
  out.degenerate = !(h_max > h_min);
  out.h_min = out.degenerate ? 0.0 : h_min;
  out.h_max = out.degenerate ? 0.0 : h_max;

  auto to_base = [&](const std::optional<double>& v) {
    if (out.degenerate || !v) return 1.0;
    const double frac = std::clamp((*v - h_min) / (h_max - h_min), 0.0, 1.0);
    return 1.0 + lambda_prime * frac;
  };

  out.think_base.resize(scores.think.size());
  out.answer_base.resize(scores.answer.size());
  for (size_t g = 0; g < scores.think.size(); ++g) {
    out.think_base[g].reserve(scores.think[g].size());
    for (const auto& v : scores.think[g]) out.think_base[g].push_back(to_base(v));
    out.answer_base[g].reserve(scores.answer[g].size());
    for (const auto& v : scores.answer[g]) out.answer_base[g].push_back(to_base(v));
  }
  return out;
}

}  // namespace scotrl
