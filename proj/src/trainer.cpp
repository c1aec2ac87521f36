#include "scotrl/trainer.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace scotrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

ObjectiveParts step_objective(const PolicyParams& params, const PolicyParams& ref,
                              const std::vector<GroupBundle>& bundles, double clip_eps,
                              double kl_coeff, PolicyGrad* grad) {
  if (bundles.empty()) throw BadInput("step_objective: no groups");
  const double n_bundles = static_cast<double>(bundles.size());

  double surrogate_sum = 0.0;
  double reg_sum = 0.0;
  long long clipped = 0;
  long long total = 0;

  for (const GroupBundle& bu : bundles) {
    const int g = static_cast<int>(bu.group.members.size());
    if (g == 0) throw BadInput("step_objective: empty group");
    const Mat feats = prompt_features(params, bu.prompt);
    const Mat feats_ref = prompt_features(ref, bu.prompt);

    long long n_g = 0;
    for (const StructuredTrajectory& tr : bu.group.members)
      n_g += static_cast<long long>(tr.tokens.size());
    if (n_g == 0) throw BadInput("step_objective: group without tokens");

    std::vector<std::vector<double>> new_p(static_cast<size_t>(g));
    std::vector<std::vector<double>> old_p(static_cast<size_t>(g));
    std::vector<std::vector<double>> ref_p(static_cast<size_t>(g));

    Mat dfeats = Mat::Zero(params.d, kPromptRegions);
    for (int m = 0; m < g; ++m) {
      const StructuredTrajectory& tr = bu.group.members[static_cast<size_t>(m)];
      const size_t len = tr.tokens.size();
      if (tr.dists.size() != len)
        throw InvariantError("step_objective: member distributions out of sync");
      new_p[static_cast<size_t>(m)].resize(len);
      old_p[static_cast<size_t>(m)].resize(len);
      ref_p[static_cast<size_t>(m)].resize(len);

      TokenSeq history = bu.prompt.tokens;
      for (size_t t = 0; t < len; ++t) {
        const TokenId tok = tr.tokens[t];
        FwdCache cache;
        const Vec pn = policy_forward(params, history, feats, grad ? &cache : nullptr);
        const Vec pr = policy_forward(ref, history, feats_ref);
        const double p_new = pn[tok];
        const double p_ref = pr[tok];
        const double p_old = tr.dists[t][tok];
        if (p_old <= 0.0) throw InvariantError("step_objective: nonpositive sampled probability");
        new_p[static_cast<size_t>(m)][t] = p_new;
        old_p[static_cast<size_t>(m)][t] = p_old;
        ref_p[static_cast<size_t>(m)][t] = p_ref;

        if (grad) {
          const double r = p_new / p_old;
          const double a = bu.adv[static_cast<size_t>(m)];
          const double w = bu.weights[static_cast<size_t>(m)][t];
          const double rc = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps);
          // min() takes the plain branch on ties, so the gradient does too
          const bool plain_active = r * a <= rc * a;
          double coeff = 0.0;
          if (plain_active) coeff += w * a * r / (n_bundles * g);
          const double ratio = p_ref / p_new;
          coeff += kl_coeff * (ratio - 1.0) / (n_bundles * static_cast<double>(n_g));
          policy_backward(params, cache, tok, coeff, *grad, dfeats);
        }
        history.push_back(tok);
      }
    }
    if (grad) scatter_prompt_grad(params, bu.prompt, dfeats, *grad);

    const SurrogateResult sr = surrogate(bu.weights, bu.adv, new_p, old_p, clip_eps);
    surrogate_sum += sr.value;
    reg_sum += kl_regularizer(ref_p, new_p, kl_coeff);
    clipped += std::llround(sr.clip_frac * sr.token_count);
    total += sr.token_count;
  }

  ObjectiveParts parts;
  parts.surrogate = surrogate_sum / n_bundles;
  parts.reg = reg_sum / n_bundles;
  parts.clip_frac = total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
  return parts;
}

GroupBundle make_bundle(const Episode& ep, SampleGroup group, const RunConfig& cfg,
                        const Vocab& vocab, const EmbeddingProvider& provider,
                        GroupRewards* rewards_out) {
  GroupRewards rewards =
      score_group(group, ep.gt_answer, ep.gt_summary, vocab.spec, cfg.reward_config(), provider);

  GroupBundle b;
  b.prompt = ep.prompt;
  b.adv = advantages(rewards.r_aug, cfg.eps_std);

  std::vector<double> omega_s;
  if (cfg.cvk_on) {
    const ConsistencyAnchor anchor = compute_anchor(group, rewards.correct);
    omega_s = summary_weights(kl_dispersion(group, anchor), cfg.lambda);
  }
  DiversityWeights dw;
  if (cfg.dvr_on) {
    dw = diversity_weights(group, rewards.accuracy, cfg.lambda_prime, cfg.diversity_metric());
    if (!cfg.dynamic_on) dw.accuracy = 0.0;  // dynamic(base) then returns base exactly
  }
  b.weights = assemble_weights(group, omega_s, cfg.dvr_on ? &dw : nullptr, cfg.cvk_on, cfg.dvr_on);
  b.group = std::move(group);
  if (rewards_out) *rewards_out = std::move(rewards);
  return b;
}

TokenSeq priming_target(const Episode& ep, const Vocab& vocab, Rng& rng) {
  if (ep.gt_summary.empty()) throw InvariantError("priming: episode without video actions");
  TokenSeq t;
  t.push_back(vocab.spec.sum_open);
  TokenSeq sub = ep.gt_summary;
  rng.shuffle(sub);
  const int n = 1 + rng.below(static_cast<int>(sub.size()));
  for (int i = 0; i < n; ++i) t.push_back(sub[static_cast<size_t>(i)]);
  t.push_back(vocab.spec.sum_close);
  t.push_back(vocab.spec.think_open);
  const int m = 1 + rng.below(4);
  for (int i = 0; i < m; ++i)
    t.push_back(ep.gt_summary[static_cast<size_t>(
        rng.below(static_cast<int>(ep.gt_summary.size())))]);
  t.push_back(vocab.spec.think_close);
  t.push_back(vocab.spec.ans_open);
  t.push_back(vocab.spec.choice_ids[static_cast<size_t>(rng.below(ep.n_choices))]);
  t.push_back(vocab.spec.ans_close);
  return t;
}

json step_metrics_to_json(const StepMetrics& m) {
  json j;
  j["step"] = m.step;
  j["J_total"] = m.j_total;
  j["surrogate"] = m.surrogate;
  j["reg"] = m.reg;
  j["mean_reward"] = m.mean_reward;
  j["mean_accuracy"] = m.mean_accuracy;
  j["clip_frac"] = m.clip_frac;
  j["grad_norm"] = m.grad_norm;
  return j;
}

GradCheckResult run_grad_check(const GradCheckConfig& gc) {
  const int v = 24, d = 6, dh = 10, k = 4;
  VocabSpec spec;
  spec.v = v;
  spec.sum_open = 2;
  spec.sum_close = 3;
  spec.think_open = 4;
  spec.think_close = 5;
  spec.ans_open = 6;
  spec.ans_close = 7;
  spec.choice_ids = {8, 9, 10, 11};
  spec.validate();

  const PolicyParams sampler = random_params(v, d, dh, k, mix_seed(gc.seed, 0x6c4d));
  Rng rng(mix_seed(gc.seed, 0x6c4e));
  EncodedPrompt prompt;
  for (int i = 0; i < 10; ++i) prompt.tokens.push_back(static_cast<TokenId>(rng.below(v)));
  prompt.regions = {{0, 4}, {4, 6}, {6, 10}};  // leaves feature slots 3..5 zero

  GroupBundle b;
  b.prompt = prompt;
  b.group = sample_group(sampler, "grad-check", prompt, spec, 4, 20, mix_seed(gc.seed, 0x6c4f));
  std::vector<double> rewards;
  for (size_t m = 0; m < b.group.members.size(); ++m) rewards.push_back(rng.uniform() * 2.0 - 0.5);
  b.adv = advantages(rewards, 1e-4);
  for (const StructuredTrajectory& tr : b.group.members) {
    std::vector<double> w;
    for (size_t t = 0; t < tr.tokens.size(); ++t) w.push_back(0.5 + rng.uniform());
    b.weights.push_back(std::move(w));
  }

  // Evaluate off the sampling point so probability ratios differ from 1.
  PolicyParams theta = sampler;
  for (TensorRef& ref : tensor_refs(theta)) {
    for (Eigen::Index i = 0; i < ref.size; ++i) ref.data[i] += 0.003 * (rng.uniform() - 0.5);
  }
  const PolicyParams reference = random_params(v, d, dh, k, mix_seed(gc.seed, 0x6c50));

  PolicyGrad grad = zero_grad_like(theta);
  step_objective(theta, reference, {b}, 0.2, gc.kl_coeff, &grad);
  if (gc.corrupt) {
    for (TensorRef& ref : tensor_refs(grad)) {
      for (Eigen::Index i = 0; i < ref.size; ++i) ref.data[i] = ref.data[i] * 1.05 + 1e-3;
    }
  }

  auto theta_refs = tensor_refs(theta);
  auto grad_refs = tensor_refs(grad);

  GradCheckResult res;
  res.pass = true;
  for (size_t tensor = 0; tensor < theta_refs.size(); ++tensor) {
    for (int c = 0; c < gc.n_per_layer; ++c) {
      const Eigen::Index flat =
          static_cast<Eigen::Index>(rng.below(static_cast<int>(theta_refs[tensor].size)));
      double* x = theta_refs[tensor].data + flat;
      const double analytic = grad_refs[tensor].data[flat];
      const double x0 = *x;
      *x = x0 + gc.fd_eps;
      const double j_plus =
          step_objective(theta, reference, {b}, 0.2, gc.kl_coeff, nullptr).j_total();
      *x = x0 - gc.fd_eps;
      const double j_minus =
          step_objective(theta, reference, {b}, 0.2, gc.kl_coeff, nullptr).j_total();
      *x = x0;
      const double numeric = (j_plus - j_minus) / (2.0 * gc.fd_eps);

      const double abs_err = std::abs(numeric - analytic);
      const double scale = std::max(1.0, std::max(std::abs(numeric), std::abs(analytic)));
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      res.max_rel_err = std::max(res.max_rel_err, abs_err / scale);
      if (abs_err / scale > gc.tol) res.pass = false;
      ++res.n_checked;
    }
  }
  return res;
}

Trainer::Trainer(RunConfig cfg, Dataset ds, std::string out_dir)
    : cfg_(std::move(cfg)), ds_(std::move(ds)), out_(std::move(out_dir)) {
  cfg_.validate();
  if (ds_.train_idx.empty()) throw BadInput("train: dataset has no training split");
  vocab_ = build_vocab(ds_);
  provider_ = cfg_.make_provider();
  train_eps_ = build_episodes(ds_, ds_.train_idx, vocab_);
  val_eps_ = build_episodes(ds_, ds_.val_idx, vocab_);
}

Trainer::~Trainer() { release_lock(); }

void Trainer::acquire_lock() {
  fs::create_directories(out_);
  lock_path_ = (fs::path(out_) / ".lock").string();
  lock_fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (lock_fd_ < 0)
    throw BadInput("train: run directory is locked (" + lock_path_ +
                   " exists); use a fresh --out or remove the stale lock");
}

void Trainer::release_lock() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    ::unlink(lock_path_.c_str());
    lock_fd_ = -1;
  }
}

void Trainer::prime() {
  if (cfg_.prime_steps == 0) return;
  SgdMomentum opt;
  opt.lr = cfg_.lr;
  opt.momentum = cfg_.momentum;
  opt.init(params_);
  Rng rng(mix_seed(cfg_.seed, 0x1237e));
  PolicyGrad grad = zero_grad_like(params_);

  for (int s = 0; s < cfg_.prime_steps; ++s) {
    grad.zero();
    for (int bslot = 0; bslot < cfg_.batch_prompts; ++bslot) {
      const Episode& ep =
          train_eps_[static_cast<size_t>(rng.below(static_cast<int>(train_eps_.size())))];
      const TokenSeq target = priming_target(ep, vocab_, rng);
      const Mat feats = prompt_features(params_, ep.prompt);
      Mat dfeats = Mat::Zero(params_.d, kPromptRegions);
      const double coeff =
          1.0 / (static_cast<double>(cfg_.batch_prompts) * static_cast<double>(target.size()));
      TokenSeq history = ep.prompt.tokens;
      for (TokenId tok : target) {
        FwdCache cache;
        policy_forward(params_, history, feats, &cache);
        policy_backward(params_, cache, tok, coeff, grad, dfeats);
        history.push_back(tok);
      }
      scatter_prompt_grad(params_, ep.prompt, dfeats, grad);
    }
    opt.step(params_, grad);
  }
}

StepMetrics Trainer::rl_step(int step) {
  Rng rng(mix_seed(cfg_.seed, 0x57e9, static_cast<std::uint64_t>(step)));
  std::vector<int> order(train_eps_.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int nb = std::min<int>(cfg_.batch_prompts, static_cast<int>(order.size()));

  std::vector<GroupBundle> bundles;
  bundles.reserve(static_cast<size_t>(nb));
  double reward_sum = 0.0;
  double acc_sum = 0.0;
  long long n_members = 0;
  for (int slot = 0; slot < nb; ++slot) {
    const Episode& ep = train_eps_[static_cast<size_t>(order[static_cast<size_t>(slot)])];
    SampleGroup group = sample_group(
        params_, ep.id, ep.prompt, vocab_.spec, cfg_.group_size, cfg_.max_len,
        mix_seed(mix_seed(cfg_.seed, 0x9a30), static_cast<std::uint64_t>(step),
                 static_cast<std::uint64_t>(slot)));
    GroupRewards rewards;
    bundles.push_back(make_bundle(ep, std::move(group), cfg_, vocab_, provider_, &rewards));
    for (double r : rewards.r_aug) reward_sum += r;
    n_members += static_cast<long long>(rewards.r_aug.size());
    acc_sum += rewards.accuracy;
  }

  StepMetrics m;
  m.step = step;
  for (int epoch = 0; epoch < cfg_.inner_epochs; ++epoch) {
    PolicyGrad grad = zero_grad_like(params_);
    const ObjectiveParts parts =
        step_objective(params_, ref_, bundles, cfg_.clip_eps, cfg_.kl_coeff, &grad);
    if (epoch == 0) {
      m.surrogate = parts.surrogate;
      m.reg = parts.reg;
      m.j_total = parts.j_total();
      m.clip_frac = parts.clip_frac;
      m.grad_norm = std::sqrt(grad.squared_norm());
    }
    opt_.step(params_, grad);
  }
  m.mean_reward = reward_sum / static_cast<double>(n_members);
  m.mean_accuracy = acc_sum / static_cast<double>(nb);
  return m;
}

void Trainer::write_eval(int step) {
  const auto roll = [&](const Episode& ep) {
    return greedy_decode(params_, ep.id, ep.prompt, vocab_.spec, cfg_.max_len);
  };
  const std::pair<const char*, const std::vector<Episode>*> splits[] = {
      {"train", &train_eps_}, {"val", &val_eps_}};
  for (const auto& [name, eps] : splits) {
    if (eps->empty()) continue;
    const EvalReport rep =
        evaluate(*eps, roll, vocab_, provider_, cfg_.sim_weights(), cfg_.bleu_max_n);
    json line;
    line["step"] = step;
    line["split"] = name;
    line["report"] = eval_report_to_json(rep);
    eval_ << line.dump() << '\n';
  }

  const Episode& ep = train_eps_.front();
  const SampleGroup group =
      sample_group(params_, ep.id, ep.prompt, vocab_.spec, cfg_.group_size, cfg_.max_len,
                   mix_seed(cfg_.seed, 0x7a19, static_cast<std::uint64_t>(step)));
  for (const StructuredTrajectory& tr : group.members) {
    json j = json::parse(to_log_line(tr));
    j["step"] = step;
    traj_ << j.dump() << '\n';
  }
}

void Trainer::run() {
  acquire_lock();
  try {
    params_ = random_params(vocab_.size(), cfg_.embed_dim, cfg_.hidden_dim, cfg_.context_window,
                            mix_seed(cfg_.seed, 0x9a2a5));
    prime();
    ref_ = snapshot(params_);
    opt_.lr = cfg_.lr;
    opt_.momentum = cfg_.momentum;
    opt_.init(params_);

    {
      std::ofstream out(fs::path(out_) / "config.json", std::ios::binary);
      out << config_to_json(cfg_).dump(2) << '\n';
    }
    save_checkpoint((fs::path(out_) / "checkpoint_initial.json").string(), params_);

    metrics_.open(fs::path(out_) / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    eval_.open(fs::path(out_) / "eval.jsonl", std::ios::binary | std::ios::trunc);
    traj_.open(fs::path(out_) / "trajectories.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics_ || !eval_ || !traj_) throw BadInput("train: cannot write logs in " + out_);

    write_eval(0);
    for (int step = 1; step <= cfg_.steps; ++step) {
      const StepMetrics m = rl_step(step);
      metrics_ << step_metrics_to_json(m).dump() << '\n';
      if (cfg_.eval_every > 0 && step % cfg_.eval_every == 0 && step != cfg_.steps)
        write_eval(step);
      if (cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0 && step != cfg_.steps)
        save_checkpoint((fs::path(out_) / ("checkpoint_" + std::to_string(step) + ".json")).string(),
                        params_);
    }
    if (cfg_.steps > 0) write_eval(cfg_.steps);
    save_checkpoint((fs::path(out_) / "checkpoint_final.json").string(), params_);

    metrics_.close();
    eval_.close();
    traj_.close();
  } catch (...) {
    release_lock();
    throw;
  }
  release_lock();
}

}  // namespace scotrl
