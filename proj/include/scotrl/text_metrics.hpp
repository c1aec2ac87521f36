#pragma once

#include "scotrl/types.hpp"

#include <string>

namespace scotrl {

// Smoothed corpus-of-one BLEU over token sequences. Modified n-gram
// precisions with add-one smoothing for n > 1 (unigram precision unsmoothed),
// geometric mean over n = 1..max_n, multiplied by the brevity penalty
// exp(1 - |ref| / |cand|) when the candidate is shorter than the reference.
// An empty candidate scores 0; an empty reference is a caller error.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n = 4);

// Sentence embedder. ngram-cosine hashes token n-grams (orders 1..ngram_order)
// into a fixed-dim count vector; external-service POSTs
// {"texts":[...]} to <base_url>/embed and expects {"vectors":[[...]]}.
struct EmbeddingProvider {
  enum class Mode { NgramCosine, ExternalService };

  Mode mode = Mode::NgramCosine;
  int ngram_order = 3;
  int dim = 512;
  std::string base_url;       // external-service only, e.g. "http://127.0.0.1:8900"
  int timeout_ms = 2000;      // per request
  int retries = 3;            // attempts before giving up

  Vec embed(const TokenSeq& tokens) const;
};

// Cosine similarity of the two embeddings, clamped to [0, 1].
double semantic_sim(const TokenSeq& a, const TokenSeq& b, const EmbeddingProvider& provider);

struct SimilarityWeights {
  double alpha = 0.7;
  double beta = 0.3;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-9)
      throw InvariantError("SimilarityWeights: alpha, beta must be nonnegative and sum to 1");
  }
};

// alpha * semantic_sim + beta * bleu; in [0, 1] by construction.
double composite_sim(const TokenSeq& a, const TokenSeq& b, const SimilarityWeights& w,
                     const EmbeddingProvider& provider, int bleu_max_n = 4);

}  // namespace scotrl
