#include "scotrl/cvk.hpp"

#include "scotrl/math.hpp"

#include <algorithm>
#include <limits>

namespace scotrl {

ConsistencyAnchor compute_anchor(const SampleGroup& group,
                                 const std::vector<std::uint8_t>& correct_flags) {
  if (group.members.empty()) throw InvariantError("compute_anchor: empty group");
  if (correct_flags.size() != group.members.size())
    throw InvariantError("compute_anchor: one flag per member required");

  auto has_summary = [&](size_t g) {
    return group.members[g].seg.parse_ok && !group.members[g].seg.summary.empty();
  };

  std::vector<size_t> contributors;
  for (size_t g = 0; g < group.members.size(); ++g) {
    if (correct_flags[g] && has_summary(g)) contributors.push_back(g);
  }
  if (contributors.empty()) {
    for (size_t g = 0; g < group.members.size(); ++g) {
      if (has_summary(g)) contributors.push_back(g);
    }
  }

  ConsistencyAnchor anchor;
  if (contributors.empty()) return anchor;

  int min_len = std::numeric_limits<int>::max();
  for (size_t g : contributors) min_len = std::min(min_len, group.members[g].seg.summary.len());

  const Eigen::Index v = group.members[contributors[0]].dists.front().size();
  anchor.dist.reserve(static_cast<size_t>(min_len));
  for (int t = 0; t < min_len; ++t) {
    Vec mean = Vec::Zero(v);
    for (size_t g : contributors) {
      const StructuredTrajectory& m = group.members[g];
      mean += m.dists[static_cast<size_t>(m.seg.summary.begin + t)];
    }
    mean /= static_cast<double>(contributors.size());
    anchor.dist.push_back(std::move(mean));
  }
  return anchor;
}

std::vector<double> kl_dispersion(const SampleGroup& group, const ConsistencyAnchor& anchor) {
  std::vector<double> d(static_cast<size_t>(anchor.length()), 0.0);
  if (group.members.empty()) throw InvariantError("kl_dispersion: empty group");
  const double g_count = static_cast<double>(group.members.size());
  for (int t = 0; t < anchor.length(); ++t) {
    double sum = 0.0;
    for (const StructuredTrajectory& m : group.members) {
      if (!m.seg.parse_ok || m.seg.summary.len() <= t) continue;
      sum += kl_divergence(m.dists[static_cast<size_t>(m.seg.summary.begin + t)],
                           anchor.dist[static_cast<size_t>(t)]);
    }
    d[static_cast<size_t>(t)] = sum / g_count;
  }
  return d;
}

std::vector<double> summary_weights(const std::vector<double>& dispersion, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw InvariantError("summary_weights: lambda must be in [0, 1]");
  std::vector<double> w(dispersion.size(), 1.0);
  if (dispersion.empty()) return w;
  const auto [lo, hi] = std::minmax_element(dispersion.begin(), dispersion.end());
  const double d_min = *lo;
  const double d_max = *hi;
  if (d_max <= d_min) return w;  // degenerate: uniform dispersion carries no signal
  for (size_t t = 0; t < dispersion.size(); ++t)
    w[t] = 1.0 - lambda * (dispersion[t] - d_min) / (d_max - d_min);
  return w;
}

}  // namespace scotrl
