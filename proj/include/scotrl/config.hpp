#pragma once

#include "scotrl/dvr.hpp"
#include "scotrl/rewards.hpp"
#include "scotrl/text_metrics.hpp"
#include "scotrl/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>

namespace scotrl {

// Every knob of a training run. Serialized snapshot is written next to the
// run outputs so a run can be reproduced from its directory alone.
struct RunConfig {
  // similarity and reward shaping
  double alpha = 0.7;
  double beta = 0.3;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double format_weight = 0.5;
  std::string mode = "gt";  // "gt" | "self"

  // weighting schemes
  double lambda = 0.5;        // summary-consistency strength
  double lambda_prime = 0.7;  // diversity strength
  bool cvk_on = true;
  bool dvr_on = true;
  bool dynamic_on = true;        // accuracy damping on diversity weights
  std::string metric = "entropy";  // "entropy" | "kl"

  // optimization
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_coeff = 0.04;
  double eps_std = 1e-4;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_prompts = 8;
  int inner_epochs = 1;
  int steps = 400;
  int prime_steps = 300;

  // model
  int embed_dim = 32;
  int hidden_dim = 64;
  int context_window = 8;
  int max_len = 48;

  // similarity provider
  std::string sim_provider = "ngram";  // "ngram" | "service"
  std::string service_url;
  int sim_dim = 512;
  int ngram_order = 3;
  int bleu_max_n = 4;
  int timeout_ms = 2000;
  int retries = 3;

  // run plumbing
  std::uint64_t seed = 1;
  int eval_every = 50;
  int checkpoint_every = 0;  // 0: initial and final checkpoints only

  void validate() const;
  RewardMode reward_mode() const;
  DiversityMetric diversity_metric() const;
  SimilarityWeights sim_weights() const;
  RewardConfig reward_config() const;
  // Resolves an empty service_url from SCOTRL_EMBED_URL before falling back
  // to an error; only consulted in service mode.
  EmbeddingProvider make_provider() const;
};

nlohmann::json config_to_json(const RunConfig& c);
// Unknown keys and type mismatches are rejected; absent keys keep defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Applies one "key=value" override on top of a loaded config. Does not
// validate, so interdependent fields (alpha/beta) can be changed in pairs;
// callers validate once after the last override.
void apply_override(RunConfig& c, const std::string& assignment);

}  // namespace scotrl
