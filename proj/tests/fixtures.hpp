#pragma once

#include "scotrl/trajectory.hpp"

#include <vector>

namespace fixtures {

// 16-token vocabulary: ids 1..6 are the structural tags, 7..10 the four
// choice letters, the rest free content.
inline scotrl::VocabSpec toy_vocab() {
  scotrl::VocabSpec v;
  v.v = 16;
  v.sum_open = 1;
  v.sum_close = 2;
  v.think_open = 3;
  v.think_close = 4;
  v.ans_open = 5;
  v.ans_close = 6;
  v.choice_ids = {7, 8, 9, 10};
  return v;
}

inline scotrl::Vec uniform_dist(int v) {
  return scotrl::Vec::Constant(v, 1.0 / static_cast<double>(v));
}

// Well-formed trajectory wrapping the given nonempty content runs; dists
// default to uniform and can be overwritten per position afterwards.
inline scotrl::StructuredTrajectory make_traj(const scotrl::TokenSeq& summary,
                                              const scotrl::TokenSeq& think,
                                              const scotrl::TokenSeq& answer,
                                              const scotrl::VocabSpec& vocab) {
  scotrl::StructuredTrajectory t;
  t.tokens.push_back(vocab.sum_open);
  t.tokens.insert(t.tokens.end(), summary.begin(), summary.end());
  t.tokens.push_back(vocab.sum_close);
  t.tokens.push_back(vocab.think_open);
  t.tokens.insert(t.tokens.end(), think.begin(), think.end());
  t.tokens.push_back(vocab.think_close);
  t.tokens.push_back(vocab.ans_open);
  t.tokens.insert(t.tokens.end(), answer.begin(), answer.end());
  t.tokens.push_back(vocab.ans_close);
  t.seg = scotrl::segment(t.tokens, vocab);
  t.dists.assign(t.tokens.size(), uniform_dist(vocab.v));
  return t;
}

// Truncated output that never closes the summary: parse_ok is false.
inline scotrl::StructuredTrajectory make_unparsed(const scotrl::VocabSpec& vocab) {
  scotrl::StructuredTrajectory t;
  t.tokens = {vocab.sum_open, 11, 12};
  t.seg = scotrl::segment(t.tokens, vocab);
  t.dists.assign(t.tokens.size(), uniform_dist(vocab.v));
  return t;
}

}  // namespace fixtures
