#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace scotrl {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised for malformed external input (files, configs, CLI args). The CLI
// maps it to exit code 2; internal invariant violations map to exit code 1.
struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Token vocabulary as seen by the trajectory parser: total size, the six
// reserved structural tags, and the choice-letter tokens.
struct VocabSpec {
  int v = 0;
  TokenId sum_open = 0;
  TokenId sum_close = 0;
  TokenId think_open = 0;
  TokenId think_close = 0;
  TokenId ans_open = 0;
  TokenId ans_close = 0;
  std::vector<TokenId> choice_ids;  // letter tokens in A, B, C, ... order

  std::array<TokenId, 6> tag_ids() const {
    return {sum_open, sum_close, think_open, think_close, ans_open, ans_close};
  }

  bool is_tag(TokenId t) const {
    for (TokenId tag : tag_ids()) {
      if (t == tag) return true;
    }
    return false;
  }

  bool is_choice(TokenId t) const {
    for (TokenId c : choice_ids) {
      if (t == c) return true;
    }
    return false;
  }

  void validate() const {
    if (v <= 0) throw InvariantError("VocabSpec: vocabulary size must be positive");
    auto tags = tag_ids();
    for (size_t i = 0; i < tags.size(); ++i) {
      if (tags[i] < 0 || tags[i] >= v) throw InvariantError("VocabSpec: tag id out of range");
      for (size_t j = i + 1; j < tags.size(); ++j) {
        if (tags[i] == tags[j]) throw InvariantError("VocabSpec: tag ids must be distinct");
      }
    }
    for (TokenId c : choice_ids) {
      if (c < 0 || c >= v) throw InvariantError("VocabSpec: choice id out of range");
      if (is_tag(c)) throw InvariantError("VocabSpec: choice id collides with a tag");
    }
  }
};

}  // namespace scotrl
