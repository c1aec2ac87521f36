#pragma once

#include "scotrl/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scotrl {

// Half-open index range [begin, end) over generated tokens. Content ranges
// exclude the tag tokens themselves.
struct Span {
  int begin = 0;
  int end = 0;
  int len() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(int i) const { return i >= begin && i < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SegmentResult {
  Span summary;
  Span think;
  Span answer;
  bool parse_ok = false;
};

// Prompt tokens plus the regions the policy pools into feature slots (video
// actions, question, one per choice block). Regions index into tokens; tokens
// outside every region reach the policy only through the sliding context
// window.
struct EncodedPrompt {
  TokenSeq tokens;
  std::vector<Span> regions;
};

// One sampled completion: generated tokens, the per-token sampling
// distributions (each a V-vector), and the parsed segment structure.
struct StructuredTrajectory {
  std::string prompt_id;
  TokenSeq tokens;
  std::vector<Vec> dists;
  SegmentResult seg;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct SampleGroup {
  std::string prompt_id;
  std::vector<StructuredTrajectory> members;

  int size() const { return static_cast<int>(members.size()); }
};

// Locates the six structural tags. parse_ok is false if any tag is missing,
// appears more than once, or the tags are not in
// <summary> </summary> <think> </think> <answer> </answer> order, or any of
// the three content spans is empty. On failure all spans are empty.
SegmentResult segment(const TokenSeq& tokens, const VocabSpec& vocab);

// First choice token inside the answer content span; nullopt if the
// trajectory did not parse or the span holds no choice token.
std::optional<TokenId> extract_answer(const TokenSeq& tokens, const SegmentResult& seg,
                                      const VocabSpec& vocab);

// One-line JSON record of a trajectory (tokens, spans, parse flag); dists are
// not serialized. parse_log_line inverts it exactly.
std::string to_log_line(const StructuredTrajectory& t);
StructuredTrajectory parse_log_line(const std::string& line);

// Debug-grade validation used by tests: every dist is a proper distribution
// and spans are well ordered.
void validate_trajectory(const StructuredTrajectory& t, const VocabSpec& vocab);

}  // namespace scotrl
