#include "scotrl/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace scotrl {

using json = nlohmann::json;

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw BadInput("config: " + msg); };
  if (alpha < 0.0 || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-9)
    fail("alpha and beta must be nonnegative and sum to 1");
  if (gamma1 < 0.0 || gamma2 < 0.0) fail("gamma1/gamma2 must be nonnegative");
  if (format_weight < 0.0) fail("format_weight must be nonnegative");
  if (mode != "gt" && mode != "self") fail("mode must be 'gt' or 'self'");
  if (lambda < 0.0 || lambda > 1.0) fail("lambda must be in [0, 1]");
  if (lambda_prime < 0.0) fail("lambda_prime must be nonnegative");
  if (metric != "entropy" && metric != "kl") fail("metric must be 'entropy' or 'kl'");
  if (group_size < 2) fail("group_size must be at least 2");
  if (clip_eps <= 0.0 || clip_eps >= 1.0) fail("clip_eps must be in (0, 1)");
  if (kl_coeff < 0.0) fail("kl_coeff must be nonnegative");
  if (eps_std <= 0.0) fail("eps_std must be positive");
  if (lr <= 0.0) fail("lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (batch_prompts < 1) fail("batch_prompts must be at least 1");
  if (inner_epochs < 1) fail("inner_epochs must be at least 1");
  if (steps < 0) fail("steps must be nonnegative");
  if (prime_steps < 0) fail("prime_steps must be nonnegative");
  if (embed_dim < 1 || hidden_dim < 1) fail("embed_dim/hidden_dim must be positive");
  if (context_window < 1) fail("context_window must be positive");
  if (max_len < 8) fail("max_len must be at least 8");
  if (sim_provider != "ngram" && sim_provider != "service")
    fail("sim_provider must be 'ngram' or 'service'");
  if (sim_dim < 1) fail("sim_dim must be positive");
  if (ngram_order < 1) fail("ngram_order must be positive");
  if (bleu_max_n < 1) fail("bleu_max_n must be positive");
  if (timeout_ms < 1) fail("timeout_ms must be positive");
  if (retries < 1) fail("retries must be positive");
  if (eval_every < 0) fail("eval_every must be nonnegative");
  if (checkpoint_every < 0) fail("checkpoint_every must be nonnegative");
}

RewardMode RunConfig::reward_mode() const {
  return mode == "gt" ? RewardMode::GtSupervised : RewardMode::SelfSupervised;
}

DiversityMetric RunConfig::diversity_metric() const {
  return metric == "entropy" ? DiversityMetric::Entropy : DiversityMetric::Kl;
}

SimilarityWeights RunConfig::sim_weights() const { return {alpha, beta}; }

RewardConfig RunConfig::reward_config() const {
  RewardConfig rc;
  rc.gamma1 = gamma1;
  rc.gamma2 = gamma2;
  rc.format_weight = format_weight;
  rc.mode = reward_mode();
  rc.sim_weights = sim_weights();
  rc.bleu_max_n = bleu_max_n;
  return rc;
}

EmbeddingProvider RunConfig::make_provider() const {
  EmbeddingProvider p;
  p.ngram_order = ngram_order;
  p.dim = sim_dim;
  p.timeout_ms = timeout_ms;
  p.retries = retries;
  if (sim_provider == "ngram") {
    p.mode = EmbeddingProvider::Mode::NgramCosine;
    return p;
  }
  p.mode = EmbeddingProvider::Mode::ExternalService;
  p.base_url = service_url;
  if (p.base_url.empty()) {
    const char* env = std::getenv("SCOTRL_EMBED_URL");
    if (env) p.base_url = env;
  }
  if (p.base_url.empty())
    throw BadInput("config: service provider needs service_url or SCOTRL_EMBED_URL");
  return p;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma1"] = c.gamma1;
  j["gamma2"] = c.gamma2;
  j["format_weight"] = c.format_weight;
  j["mode"] = c.mode;
  j["lambda"] = c.lambda;
  j["lambda_prime"] = c.lambda_prime;
  j["cvk_on"] = c.cvk_on;
  j["dvr_on"] = c.dvr_on;
  j["dynamic_on"] = c.dynamic_on;
  j["metric"] = c.metric;
  j["group_size"] = c.group_size;
  j["clip_eps"] = c.clip_eps;
  j["kl_coeff"] = c.kl_coeff;
  j["eps_std"] = c.eps_std;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["batch_prompts"] = c.batch_prompts;
  j["inner_epochs"] = c.inner_epochs;
  j["steps"] = c.steps;
  j["prime_steps"] = c.prime_steps;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["context_window"] = c.context_window;
  j["max_len"] = c.max_len;
  j["sim_provider"] = c.sim_provider;
  j["service_url"] = c.service_url;
  j["sim_dim"] = c.sim_dim;
  j["ngram_order"] = c.ngram_order;
  j["bleu_max_n"] = c.bleu_max_n;
  j["timeout_ms"] = c.timeout_ms;
  j["retries"] = c.retries;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["checkpoint_every"] = c.checkpoint_every;
  return j;
}

namespace {

void set_field(RunConfig& c, const std::string& key, const json& v) {
  auto want = [&](bool ok, const char* type) {
    if (!ok) throw BadInput("config: key '" + key + "' expects " + type);
  };
  auto num = [&]() {
    want(v.is_number(), "a number");
    return v.get<double>();
  };
  auto integer = [&]() {
    want(v.is_number_integer(), "an integer");
    return v.get<int>();
  };
  auto boolean = [&]() {
    want(v.is_boolean(), "a boolean");
    return v.get<bool>();
  };
  auto str = [&]() {
    want(v.is_string(), "a string");
    return v.get<std::string>();
  };

  if (key == "alpha") c.alpha = num();
  else if (key == "beta") c.beta = num();
  else if (key == "gamma1") c.gamma1 = num();
  else if (key == "gamma2") c.gamma2 = num();
  else if (key == "format_weight") c.format_weight = num();
  else if (key == "mode") c.mode = str();
  else if (key == "lambda") c.lambda = num();
  else if (key == "lambda_prime") c.lambda_prime = num();
  else if (key == "cvk_on") c.cvk_on = boolean();
  else if (key == "dvr_on") c.dvr_on = boolean();
  else if (key == "dynamic_on") c.dynamic_on = boolean();
  else if (key == "metric") c.metric = str();
  else if (key == "group_size") c.group_size = integer();
  else if (key == "clip_eps") c.clip_eps = num();
  else if (key == "kl_coeff") c.kl_coeff = num();
  else if (key == "eps_std") c.eps_std = num();
  else if (key == "lr") c.lr = num();
  else if (key == "momentum") c.momentum = num();
  else if (key == "batch_prompts") c.batch_prompts = integer();
  else if (key == "inner_epochs") c.inner_epochs = integer();
  else if (key == "steps") c.steps = integer();
  else if (key == "prime_steps") c.prime_steps = integer();
  else if (key == "embed_dim") c.embed_dim = integer();
  else if (key == "hidden_dim") c.hidden_dim = integer();
  else if (key == "context_window") c.context_window = integer();
  else if (key == "max_len") c.max_len = integer();
  else if (key == "sim_provider") c.sim_provider = str();
  else if (key == "service_url") c.service_url = str();
  else if (key == "sim_dim") c.sim_dim = integer();
  else if (key == "ngram_order") c.ngram_order = integer();
  else if (key == "bleu_max_n") c.bleu_max_n = integer();
  else if (key == "timeout_ms") c.timeout_ms = integer();
  else if (key == "retries") c.retries = integer();
  else if (key == "seed") {
    want(v.is_number_unsigned() || v.is_number_integer(), "an unsigned integer");
    c.seed = v.get<std::uint64_t>();
  }
  else if (key == "eval_every") c.eval_every = integer();
  else if (key == "checkpoint_every") c.checkpoint_every = integer();
  else throw BadInput("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw BadInput("config: top level must be an object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) set_field(c, key, value);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadInput("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw BadInput("config: override must look like key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json v;
  if (raw == "true" || raw == "false") {
    v = raw == "true";
  } else {
    try {
      size_t used = 0;
      if (raw.find_first_of(".eE") == std::string::npos && !raw.empty()) {
        if (raw[0] == '-') {
          const long long n = std::stoll(raw, &used);
          if (used == raw.size()) v = n;
        } else {
          const unsigned long long n = std::stoull(raw, &used);
          if (used == raw.size()) v = static_cast<std::uint64_t>(n);
        }
      }
      if (v.is_null()) {
        const double d = std::stod(raw, &used);
        if (used == raw.size()) v = d;
      }
    } catch (const std::exception&) {
      // fall through to string
    }
  }
  if (v.is_null()) v = raw;
  set_field(c, key, v);
}

}  // namespace scotrl
