#pragma once

#include "scotrl/eventflow.hpp"
#include "scotrl/text_metrics.hpp"
#include "scotrl/trajectory.hpp"
#include "scotrl/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace scotrl {

// Token table for the symbolic encoding of generated questions. The fixed
// block (pad, instruction marker, structure tags, choice letters, yes/no,
// value ranks, ratio deciles, small ints, family markers) is identical for
// every dataset; action-label tokens follow in sorted label order, so two
// datasets over the same annotation pool share one vocabulary.
struct Vocab {
  VocabSpec spec;
  TokenId pad = 0;
  TokenId instr = 1;
  TokenId yes_tok = 0;
  TokenId no_tok = 0;
  std::vector<TokenId> rank_tok;    // content token for the k-th smallest value choice
  std::vector<TokenId> ratio_tok;   // ratio arg bucketed into deciles
  std::vector<TokenId> int_tok;     // small integer args, 1-based: int_tok[0] = "1"
  std::map<std::string, TokenId> family_tok;  // category name -> token
  std::map<std::string, TokenId> action_tok;  // label -> token
  std::vector<std::string> names;             // id -> display name

  int size() const { return static_cast<int>(names.size()); }
  const std::string& name(TokenId t) const;
};

Vocab build_vocab(const Dataset& ds);

// One question rendered into tokens. gt_summary is the chronological action
// list of the record's video interval, used as the similarity reference.
struct Episode {
  std::string id;
  int record_idx = 0;
  EncodedPrompt prompt;
  TokenId gt_answer = 0;   // choice letter token
  TokenSeq gt_summary;     // action tokens
  int n_choices = 0;
  std::string video_id;
};

// Prompt layout: [video actions | family | args | per-choice letter+content |
// instr + the six structure tags], with pooling regions marking the video
// actions, the question, and each choice's content. Throws BadInput when a
// record's choice or arg text cannot be expressed in the vocabulary.
Episode encode_episode(const Dataset& ds, int record_idx, const Vocab& vocab);

std::vector<Episode> build_episodes(const Dataset& ds, const std::vector<int>& idx,
                                    const Vocab& vocab);

// Lenient answer extraction for evaluation: the parsed answer span when
// available, else the first choice token anywhere in the generation, else the
// argmax choice-letter probability at the final decoding step. Training
// rewards use the strict extract_answer instead.
TokenId lenient_extract(const StructuredTrajectory& traj, const Vocab& vocab, int n_choices);

struct EvalReport {
  double accuracy = 0.0;
  double mean_bleu_correct = 0.0;
  double mean_bleu_incorrect = 0.0;
  double mean_sem_correct = 0.0;
  double mean_sem_incorrect = 0.0;
  double parse_rate = 0.0;
  // bookkeeping, not serialized
  int n_total = 0;
  int n_correct = 0;
  int n_parsed = 0;
};

nlohmann::json eval_report_to_json(const EvalReport& r);

using RolloutFn = std::function<StructuredTrajectory(const Episode&)>;

// Runs rollout on every episode and aggregates accuracy, parse rate, and
// summary similarity split by answer correctness. Empty buckets report 0.
EvalReport evaluate(const std::vector<Episode>& episodes, const RolloutFn& rollout,
                    const Vocab& vocab, const EmbeddingProvider& provider,
                    const SimilarityWeights& weights, int bleu_max_n = 4);

}  // namespace scotrl
