#pragma once

#include "scotrl/config.hpp"
#include "scotrl/env.hpp"
#include "scotrl/grpo.hpp"
#include "scotrl/policy.hpp"
#include "scotrl/rewards.hpp"

#include <nlohmann/json_fwd.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace scotrl {

// Everything the objective needs about one sampled group, frozen at sampling
// time; the objective is then a function of the current parameters alone.
// The recorded sampling distributions double as the old-policy probabilities.
struct GroupBundle {
  EncodedPrompt prompt;
  SampleGroup group;
  std::vector<double> adv;
  TokenWeights weights;
};

struct ObjectiveParts {
  double surrogate = 0.0;
  double reg = 0.0;
  double clip_frac = 0.0;

  double j_total() const { return surrogate - reg; }
};

// Clipped-surrogate value minus the reference regularizer, averaged over
// bundles. With grad != nullptr the parameter gradient (ascent direction)
// is accumulated into it. Clipped positions contribute no surrogate
// gradient; the regularizer term flows through every position.
ObjectiveParts step_objective(const PolicyParams& params, const PolicyParams& ref,
                              const std::vector<GroupBundle>& bundles, double clip_eps,
                              double kl_coeff, PolicyGrad* grad);

// Scores a sampled group and assembles its advantages and token weights per
// the configured weighting schemes.
GroupBundle make_bundle(const Episode& ep, SampleGroup group, const RunConfig& cfg,
                        const Vocab& vocab, const EmbeddingProvider& provider,
                        GroupRewards* rewards_out = nullptr);

// Structure-priming target: the tag scaffold around a shuffled subset of the
// video's actions, noise think content, and a random choice letter. Carries
// no answer or ordering signal.
TokenSeq priming_target(const Episode& ep, const Vocab& vocab, Rng& rng);

struct StepMetrics {
  int step = 0;
  double j_total = 0.0;
  double surrogate = 0.0;
  double reg = 0.0;
  double mean_reward = 0.0;
  double mean_accuracy = 0.0;
  double clip_frac = 0.0;
  double grad_norm = 0.0;
};
nlohmann::json step_metrics_to_json(const StepMetrics& m);

struct GradCheckConfig {
  std::uint64_t seed = 1;
  int n_per_layer = 20;  // coordinates probed in every parameter tensor
  double fd_eps = 1e-5;
  double tol = 1e-4;
  double kl_coeff = 0.04;
  bool corrupt = false;  // negative control: perturbs the analytic gradient
};

struct GradCheckResult {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  int n_checked = 0;
  bool pass = false;
};

// Central-difference check of step_objective's gradient on a synthetic group,
// evaluated slightly off the sampling point so the ratio term is live.
GradCheckResult run_grad_check(const GradCheckConfig& gc);

// Full pipeline: structure priming, the RL loop, periodic evaluation and
// checkpoints, JSONL logs. Holds an exclusive lockfile in the run directory.
class Trainer {
 public:
  Trainer(RunConfig cfg, Dataset ds, std::string out_dir);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  void run();

  const PolicyParams& params() const { return params_; }

 private:
  void acquire_lock();
  void release_lock();
  void prime();
  StepMetrics rl_step(int step);
  void write_eval(int step);

  RunConfig cfg_;
  Dataset ds_;
  std::string out_;
  Vocab vocab_;
  EmbeddingProvider provider_;
  std::vector<Episode> train_eps_;
  std::vector<Episode> val_eps_;
  PolicyParams params_;
  PolicyParams ref_;
  SgdMomentum opt_;
  std::ofstream metrics_;
  std::ofstream eval_;
  std::ofstream traj_;
  std::string lock_path_;
  int lock_fd_ = -1;
};

}  // namespace scotrl
