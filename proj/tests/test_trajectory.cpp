#include "doctest.h"

#include "scotrl/rng.hpp"
#include "scotrl/trajectory.hpp"

#include <algorithm>
#include <string>
#include <vector>

using namespace scotrl;

namespace {

VocabSpec toy_vocab() {
  VocabSpec s;
  s.v = 16;
  s.sum_open = 1;
  s.sum_close = 2;
  s.think_open = 3;
  s.think_close = 4;
  s.ans_open = 5;
  s.ans_close = 6;
  s.choice_ids = {7, 8, 9, 10};
  s.validate();
  return s;
}

// Independent re-implementation of the parse rule: each tag exactly once, in
// template order, with nonempty content between each pair.
bool oracle_parse_ok(const TokenSeq& t, const VocabSpec& v) {
  const auto tags = v.tag_ids();
  std::vector<int> pos;
  for (TokenId tag : tags) {
    int count = 0, at = -1;
    for (int i = 0; i < static_cast<int>(t.size()); ++i) {
      if (t[static_cast<size_t>(i)] == tag) {
        ++count;
        at = i;
      }
    }
    if (count != 1) return false;
    pos.push_back(at);
  }
  for (size_t i = 1; i < pos.size(); ++i) {
    if (pos[i] <= pos[i - 1]) return false;
  }
  // content spans are between tag pairs (0,1), (2,3), (4,5)
  for (int k = 0; k < 3; ++k) {
    if (pos[static_cast<size_t>(2 * k + 1)] - pos[static_cast<size_t>(2 * k)] < 2) return false;
  }
  return true;
}

TokenSeq well_formed(const VocabSpec& v) {
  return {v.sum_open,   11, 12, v.sum_close, v.think_open,     13,
          v.think_close, v.ans_open, v.choice_ids[2], v.ans_close};
}

}  // namespace

TEST_CASE("segment parses a well-formed trajectory") {
  const VocabSpec v = toy_vocab();
  const TokenSeq t = well_formed(v);
  const SegmentResult seg = segment(t, v);
  REQUIRE(seg.parse_ok);
  CHECK(seg.summary == Span{1, 3});
  CHECK(seg.think == Span{5, 6});
  CHECK(seg.answer == Span{8, 9});
}

TEST_CASE("segment rejects structural violations") {
  const VocabSpec v = toy_vocab();
  const TokenSeq base = well_formed(v);

  SUBCASE("missing tag") {
    TokenSeq t = base;
    t.erase(t.begin() + 4);  // drop <think>
    CHECK_FALSE(segment(t, v).parse_ok);
  }
  SUBCASE("duplicated tag") {
    TokenSeq t = base;
    t.push_back(v.ans_close);
    CHECK_FALSE(segment(t, v).parse_ok);
  }
  SUBCASE("tags out of order") {
    TokenSeq t = {v.think_open, 13, v.think_close, v.sum_open,      11,
                  v.sum_close,  v.ans_open, v.choice_ids[0], v.ans_close};
    CHECK_FALSE(segment(t, v).parse_ok);
  }
  SUBCASE("empty content span") {
    TokenSeq t = {v.sum_open, v.sum_close, v.think_open,    13,
                  v.think_close, v.ans_open, v.choice_ids[0], v.ans_close};
    CHECK_FALSE(segment(t, v).parse_ok);
  }
  SUBCASE("failure leaves spans empty") {
    TokenSeq t = base;
    t.pop_back();
    const SegmentResult seg = segment(t, v);
    CHECK_FALSE(seg.parse_ok);
    CHECK(seg.summary.empty());
    CHECK(seg.think.empty());
    CHECK(seg.answer.empty());
  }
}

TEST_CASE("segment agrees with the oracle on random token soups") {
  const VocabSpec v = toy_vocab();
  Rng rng(123);
  int parsed = 0;
  for (int rep = 0; rep < 3000; ++rep) {
    TokenSeq t;
    const int len = rng.between(0, 14);
    for (int i = 0; i < len; ++i) t.push_back(static_cast<TokenId>(rng.below(v.v)));
    // bias some reps toward near-valid structures so the true branch is hit
    if (rep % 4 == 0) {
      t = well_formed(v);
      const int k = rng.below(static_cast<int>(t.size()));
      t[static_cast<size_t>(k)] = static_cast<TokenId>(rng.below(v.v));
    }
    const SegmentResult seg = segment(t, v);
    CHECK(seg.parse_ok == oracle_parse_ok(t, v));
    if (seg.parse_ok) {
      ++parsed;
      // spans are the content between the tag pairs
      CHECK(t[static_cast<size_t>(seg.summary.begin - 1)] == v.sum_open);
      CHECK(t[static_cast<size_t>(seg.summary.end)] == v.sum_close);
      CHECK(t[static_cast<size_t>(seg.think.begin - 1)] == v.think_open);
      CHECK(t[static_cast<size_t>(seg.think.end)] == v.think_close);
      CHECK(t[static_cast<size_t>(seg.answer.begin - 1)] == v.ans_open);
      CHECK(t[static_cast<size_t>(seg.answer.end)] == v.ans_close);
      CHECK(!seg.summary.empty());
      CHECK(!seg.think.empty());
      CHECK(!seg.answer.empty());
    }
  }
  CHECK(parsed > 50);  // the biased reps must exercise the success path
}

TEST_CASE("extract_answer finds the first choice token in the answer span") {
  const VocabSpec v = toy_vocab();
  TokenSeq t = {v.sum_open,   11, v.sum_close, v.think_open, v.choice_ids[0], v.think_close,
                v.ans_open, 12, v.choice_ids[3], v.choice_ids[1], v.ans_close};
  const SegmentResult seg = segment(t, v);
  REQUIRE(seg.parse_ok);
  const auto ans = extract_answer(t, seg, v);
  REQUIRE(ans.has_value());
  CHECK(*ans == v.choice_ids[3]);  // choice in think span does not count
}

TEST_CASE("extract_answer is empty without parse or choice token") {
  const VocabSpec v = toy_vocab();
  SUBCASE("unparsed") {
    TokenSeq t = {v.ans_open, v.choice_ids[0], v.ans_close};
    CHECK_FALSE(extract_answer(t, segment(t, v), v).has_value());
  }
  SUBCASE("no choice token in answer") {
    TokenSeq t = well_formed(v);
    t[8] = 14;  // replace the letter with a plain token
    const SegmentResult seg = segment(t, v);
    REQUIRE(seg.parse_ok);
    CHECK_FALSE(extract_answer(t, seg, v).has_value());
  }
}

TEST_CASE("log line round trip is exact") {
  const VocabSpec v = toy_vocab();
  StructuredTrajectory tr;
  tr.prompt_id = "v03#0017";
  tr.tokens = well_formed(v);
  tr.seg = segment(tr.tokens, v);
  const std::string line = to_log_line(tr);
  const StructuredTrajectory back = parse_log_line(line);
  CHECK(back.prompt_id == tr.prompt_id);
  CHECK(back.tokens == tr.tokens);
  CHECK(back.seg.parse_ok == tr.seg.parse_ok);
  CHECK(back.seg.summary == tr.seg.summary);
  CHECK(back.seg.think == tr.seg.think);
  CHECK(back.seg.answer == tr.seg.answer);
  CHECK(to_log_line(back) == line);
}

TEST_CASE("validate_trajectory accepts sampled members and rejects bad dists") {
  const VocabSpec v = toy_vocab();
  StructuredTrajectory tr;
  tr.prompt_id = "p";
  tr.tokens = {11, 12};
  Vec u = Vec::Constant(v.v, 1.0 / v.v);
  tr.dists = {u, u};
  tr.seg = segment(tr.tokens, v);
  CHECK_NOTHROW(validate_trajectory(tr, v));

  tr.dists[1](0) += 0.5;  // no longer sums to 1
  CHECK_THROWS_AS(validate_trajectory(tr, v), InvariantError);
}
