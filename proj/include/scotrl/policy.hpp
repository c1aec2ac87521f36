#pragma once

#include "scotrl/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scotrl {

// Number of prompt feature slots the MLP input reserves. Prompts fill the
// leading slots (video, question, one per choice); the rest stay zero.
inline constexpr int kPromptRegions = 6;

// k-token-window MLP over a shared embedding table. The prompt enters as a
// bank of pooled region features. Tokens in a region are summed with fixed
// pseudorandom +/-1 signs keyed by (region-relative position, lane), so
// within-region order is not lost and identical region content yields the
// identical feature in every prompt; 1/sqrt(m) keeps the feature magnitude
// at the single-embedding scale regardless of region length:
//
//   f_r = (1/sqrt(m_r)) * sum_j sign(j) .* emb[region_r[j]]   (zeros if absent)
//   x   = [emb[c_1]; ...; emb[c_k]; q_ctx; f_0; ...; f_{R-1}] (c = last k ids)
//   h1  = tanh(w1 x + b1),  h2 = tanh(w2 h1 + b2)
//   p   = softmax(w3 h2 + b3)
struct PolicyParams {
  int v = 0;   // vocabulary size
  int d = 0;   // embedding dim
  int dh = 0;  // hidden dim
  int k = 0;   // context window

  Mat emb;    // v x d
  Vec q_ctx;  // d
  Mat w1;     // dh x (k+1+kPromptRegions)*d
  Vec b1;     // dh
  Mat w2;     // dh x dh
  Vec b2;     // dh
  Mat w3;     // v x dh
  Vec b3;     // v
};

struct PolicyGrad {
  Mat emb;
  Vec q_ctx;
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  Mat w3;
  Vec b3;

  void zero();
  double squared_norm() const;
};

// Named flat view over every tensor; shared by the optimizer, checkpoint IO,
// and the finite-difference harness.
struct TensorRef {
  const char* name;
  double* data;
  Eigen::Index size;
};
std::vector<TensorRef> tensor_refs(PolicyParams& p);
std::vector<TensorRef> tensor_refs(PolicyGrad& g);

PolicyParams zero_params(int v, int d, int dh, int k);
PolicyParams random_params(int v, int d, int dh, int k, std::uint64_t seed);
PolicyGrad zero_grad_like(const PolicyParams& p);

// Frozen copy used as pi_old / pi_ref.
inline PolicyParams snapshot(const PolicyParams& p) { return p; }

// Fixed +/-1 sign for region-relative position j, embedding lane i.
double positional_sign(int j, int i);

// d x kPromptRegions feature bank; column r pools the r-th region.
Mat prompt_features(const PolicyParams& p, const EncodedPrompt& prompt);

struct FwdCache {
  TokenSeq ctx;  // k ids, left-padded with token 0
  Vec x;
  Vec h1;
  Vec h2;
  Vec p;
};

// Next-token distribution given full history (prompt ++ generated) and the
// precomputed prompt feature bank. Zero parameters give the uniform
// distribution.
Vec policy_forward(const PolicyParams& p, const TokenSeq& history, const Mat& feats,
                   FwdCache* cache = nullptr);

// Accumulates coeff * d log p(realized) / d theta into grad for everything
// except the region-pooling path, whose d/d feats lands in dfeats so the
// caller can scatter it once per group via scatter_prompt_grad.
void policy_backward(const PolicyParams& p, const FwdCache& cache, TokenId realized, double coeff,
                     PolicyGrad& grad, Mat& dfeats);

void scatter_prompt_grad(const PolicyParams& p, const EncodedPrompt& prompt, const Mat& dfeats,
                         PolicyGrad& grad);

// G ancestral samples at temperature 1. Generation stops after the closing
// answer tag or max_len tokens; every generated position records its full
// sampling distribution. Deterministic in (params, prompt, seed).
SampleGroup sample_group(const PolicyParams& p, const std::string& prompt_id,
                         const EncodedPrompt& prompt, const VocabSpec& vocab, int g, int max_len,
                         std::uint64_t seed);

// Argmax decode with the same stopping rule as sampling; records the
// distributions so evaluation can fall back to choice probabilities.
StructuredTrajectory greedy_decode(const PolicyParams& p, const std::string& prompt_id,
                                   const EncodedPrompt& prompt, const VocabSpec& vocab,
                                   int max_len);

struct SgdMomentum {
  double lr = 0.05;
  double momentum = 0.9;
  PolicyGrad vel;

  void init(const PolicyParams& p);
  // Ascent step: vel = momentum * vel + grad; theta += lr * vel.
  void step(PolicyParams& p, const PolicyGrad& grad);
};

// Versioned JSON checkpoint with a shape header; load rejects any mismatch
// between header and tensor dimensions.
void save_checkpoint(const std::string& path, const PolicyParams& p);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace scotrl
