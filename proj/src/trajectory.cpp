#include "scotrl/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace scotrl {

using json = nlohmann::json;

SegmentResult segment(const TokenSeq& tokens, const VocabSpec& vocab) {
  const std::array<TokenId, 6> tags = vocab.tag_ids();
  std::array<int, 6> pos{};
  std::array<int, 6> count{};
  pos.fill(-1);
  count.fill(0);

  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    for (size_t k = 0; k < tags.size(); ++k) {
      if (tokens[static_cast<size_t>(i)] == tags[k]) {
        ++count[k];
        if (pos[k] < 0) pos[k] = i;
      }
    }
  }

  SegmentResult r;
  for (size_t k = 0; k < tags.size(); ++k) {
    if (count[k] != 1) return r;
  }
  for (size_t k = 1; k < tags.size(); ++k) {
    if (pos[k - 1] >= pos[k]) return r;
  }

  Span summary{pos[0] + 1, pos[1]};
  Span think{pos[2] + 1, pos[3]};
  Span answer{pos[4] + 1, pos[5]};
  if (summary.empty() || think.empty() || answer.empty()) return r;

  r.summary = summary;
  r.think = think;
  r.answer = answer;
  r.parse_ok = true;
  return r;
}

std::optional<TokenId> extract_answer(const TokenSeq& tokens, const SegmentResult& seg,
                                      const VocabSpec& vocab) {
  if (!seg.parse_ok) return std::nullopt;
  for (int i = seg.answer.begin; i < seg.answer.end; ++i) {
    const TokenId t = tokens[static_cast<size_t>(i)];
    if (vocab.is_choice(t)) return t;
  }
  return std::nullopt;
}

static json span_to_json(const Span& s) { return json::array({s.begin, s.end}); }

static Span span_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw BadInput("trajectory log: span must be [begin, end]");
  return Span{j[0].get<int>(), j[1].get<int>()};
}

std::string to_log_line(const StructuredTrajectory& t) {
  json j;
  j["prompt_id"] = t.prompt_id;
  j["tokens"] = t.tokens;
  j["spans"] = {{"summary", span_to_json(t.seg.summary)},
                {"think", span_to_json(t.seg.think)},
                {"answer", span_to_json(t.seg.answer)}};
  j["parse_ok"] = t.seg.parse_ok;
  return j.dump();
}

StructuredTrajectory parse_log_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("trajectory log: ") + e.what());
  }
  StructuredTrajectory t;
  try {
    t.prompt_id = j.at("prompt_id").get<std::string>();
    t.tokens = j.at("tokens").get<TokenSeq>();
    const json& spans = j.at("spans");
    t.seg.summary = span_from_json(spans.at("summary"));
    t.seg.think = span_from_json(spans.at("think"));
    t.seg.answer = span_from_json(spans.at("answer"));
    t.seg.parse_ok = j.at("parse_ok").get<bool>();
  } catch (const json::exception& e) {
    throw BadInput(std::string("trajectory log: ") + e.what());
  }
  return t;
}

void validate_trajectory(const StructuredTrajectory& t, const VocabSpec& vocab) {
  vocab.validate();
  if (t.dists.size() != t.tokens.size())
    throw InvariantError("trajectory: one dist per generated token required");
  for (size_t i = 0; i < t.tokens.size(); ++i) {
    if (t.tokens[i] < 0 || t.tokens[i] >= vocab.v)
      throw InvariantError("trajectory: token id out of vocabulary");
    const Vec& p = t.dists[i];
    if (p.size() != vocab.v) throw InvariantError("trajectory: dist has wrong dimension");
    if (p.minCoeff() < 0.0) throw InvariantError("trajectory: negative probability");
    if (std::abs(p.sum() - 1.0) > 1e-9) throw InvariantError("trajectory: dist does not sum to 1");
  }
  const SegmentResult check = segment(t.tokens, vocab);
  if (check.parse_ok != t.seg.parse_ok || check.summary != t.seg.summary ||
      check.think != t.seg.think || check.answer != t.seg.answer)
    throw InvariantError("trajectory: stored spans disagree with segment()");
}

}  // namespace scotrl
