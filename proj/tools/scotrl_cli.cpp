#include "scotrl/config.hpp"
#include "scotrl/env.hpp"
#include "scotrl/eventflow.hpp"
#include "scotrl/trainer.hpp"

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using scotrl::BadInput;
using json = nlohmann::json;

scotrl::TemplateFamily resolve_family(const std::string& key) {
  for (const scotrl::FamilyInfo& info : scotrl::all_families()) {
    if (key == info.category || key == info.type) return info.family;
  }
  throw BadInput("gen-data: unknown family '" + key + "'");
}

int cmd_gen_data(const std::string& annotations, const std::string& out, std::uint64_t seed,
                 const std::vector<std::string>& count_args, double val_frac) {
  const std::vector<scotrl::VideoAnnotation> videos = scotrl::load_annotations(annotations);
  std::map<scotrl::TemplateFamily, int> counts;
  for (const std::string& kv : count_args) {
    const size_t eq = kv.rfind('=');
    if (eq == std::string::npos || eq == 0)
      throw BadInput("gen-data: counts entries look like family=N, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    int n = 0;
    try {
      size_t used = 0;
      n = std::stoi(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw BadInput("gen-data: bad count in '" + kv + "'");
    }
    if (n < 0) throw BadInput("gen-data: negative count in '" + kv + "'");
    if (key == "all") {
      for (const scotrl::FamilyInfo& info : scotrl::all_families()) counts[info.family] = n;
    } else {
      counts[resolve_family(key)] = n;
    }
  }
  if (counts.empty()) throw BadInput("gen-data: at least one --counts entry is required");

  const scotrl::Dataset ds = scotrl::generate_dataset(videos, counts, seed, val_frac);
  scotrl::write_dataset(ds, out);
  std::cout << "wrote " << ds.records.size() << " records (train " << ds.train_idx.size()
            << " / val " << ds.val_idx.size() << ") to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& out, const std::vector<std::string>& overrides) {
  scotrl::RunConfig cfg =
      config_path.empty() ? scotrl::RunConfig{} : scotrl::load_config(config_path);
  for (const std::string& kv : overrides) scotrl::apply_override(cfg, kv);
  cfg.validate();
  scotrl::Dataset ds = scotrl::load_dataset(data);
  scotrl::Trainer trainer(std::move(cfg), std::move(ds), out);
  trainer.run();
  std::cout << "run complete: " << out << "\n";
  return 0;
}

scotrl::PolicyParams load_matching_checkpoint(const std::string& path,
                                              const scotrl::Vocab& vocab) {
  scotrl::PolicyParams p = scotrl::load_checkpoint(path);
  if (p.v != vocab.size())
    throw BadInput("checkpoint vocabulary (" + std::to_string(p.v) +
                   ") does not match the dataset vocabulary (" + std::to_string(vocab.size()) +
                   ")");
  return p;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& config_path) {
  const scotrl::RunConfig cfg =
      config_path.empty() ? scotrl::RunConfig{} : scotrl::load_config(config_path);
  const scotrl::Dataset ds = scotrl::load_dataset(data);
  const scotrl::Vocab vocab = scotrl::build_vocab(ds);
  const scotrl::PolicyParams params = load_matching_checkpoint(checkpoint, vocab);

  std::vector<int> idx;
  if (split == "train" || split == "all")
    idx.insert(idx.end(), ds.train_idx.begin(), ds.train_idx.end());
  if (split == "val" || split == "all")
    idx.insert(idx.end(), ds.val_idx.begin(), ds.val_idx.end());
  if (split != "train" && split != "val" && split != "all")
    throw BadInput("eval: --split must be train, val, or all");
  if (idx.empty()) throw BadInput("eval: split '" + split + "' is empty");

  const std::vector<scotrl::Episode> episodes = scotrl::build_episodes(ds, idx, vocab);
  const scotrl::EmbeddingProvider provider = cfg.make_provider();
  const auto roll = [&](const scotrl::Episode& ep) {
    return scotrl::greedy_decode(params, ep.id, ep.prompt, vocab.spec, cfg.max_len);
  };
  const scotrl::EvalReport rep =
      scotrl::evaluate(episodes, roll, vocab, provider, cfg.sim_weights(), cfg.bleu_max_n);
  std::cout << scotrl::eval_report_to_json(rep).dump(2) << "\n";
  return 0;
}

int cmd_grad_check(std::uint64_t seed, int per_layer, double tol, double kl, bool corrupt) {
  scotrl::GradCheckConfig gc;
  gc.seed = seed;
  gc.n_per_layer = per_layer;
  gc.tol = tol;
  gc.kl_coeff = kl;
  gc.corrupt = corrupt;
  const scotrl::GradCheckResult res = scotrl::run_grad_check(gc);
  json j;
  j["pass"] = res.pass;
  j["n_checked"] = res.n_checked;
  j["kl_coeff"] = kl;
  j["max_abs_err"] = res.max_abs_err;
  j["max_rel_err"] = res.max_rel_err;
  std::cout << j.dump(2) << "\n";
  return res.pass ? 0 : 1;
}

int cmd_inspect(const std::string& checkpoint, const std::string& data,
                const std::string& episode_id, const std::string& config_path) {
  const scotrl::RunConfig cfg =
      config_path.empty() ? scotrl::RunConfig{} : scotrl::load_config(config_path);
  const scotrl::Dataset ds = scotrl::load_dataset(data);
  const scotrl::Vocab vocab = scotrl::build_vocab(ds);
  const scotrl::PolicyParams params = load_matching_checkpoint(checkpoint, vocab);

  const auto it = std::find(ds.record_ids.begin(), ds.record_ids.end(), episode_id);
  if (it == ds.record_ids.end()) throw BadInput("inspect-weights: unknown episode " + episode_id);
  const int idx = static_cast<int>(it - ds.record_ids.begin());

  const scotrl::Episode ep = scotrl::encode_episode(ds, idx, vocab);
  scotrl::SampleGroup group =
      scotrl::sample_group(params, ep.id, ep.prompt, vocab.spec, cfg.group_size, cfg.max_len,
                           scotrl::mix_seed(cfg.seed, 0x1257ec7));
  const scotrl::EmbeddingProvider provider = cfg.make_provider();
  scotrl::GroupRewards rewards;
  const scotrl::GroupBundle bundle =
      scotrl::make_bundle(ep, std::move(group), cfg, vocab, provider, &rewards);

  json out;
  out["episode"] = ep.id;
  out["gt_answer"] = vocab.name(ep.gt_answer);
  json members = json::array();
  for (size_t m = 0; m < bundle.group.members.size(); ++m) {
    const scotrl::StructuredTrajectory& tr = bundle.group.members[m];
    json tokens = json::array();
    for (scotrl::TokenId t : tr.tokens) tokens.push_back(vocab.name(t));
    json jm;
    jm["tokens"] = std::move(tokens);
    jm["weights"] = bundle.weights[m];
    jm["parse_ok"] = tr.seg.parse_ok;
    jm["correct"] = static_cast<bool>(rewards.correct[m]);
    jm["reward"] = rewards.r_aug[m];
    jm["advantage"] = bundle.adv[m];
    members.push_back(std::move(jm));
  }
  out["members"] = std::move(members);
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured-CoT GRPO on generated temporal-reasoning QA"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a question dataset from annotations");
  std::string ann, gen_out;
  std::uint64_t gen_seed = 1;
  double val_frac = 0.15;
  std::vector<std::string> count_args;
  gen->add_option("--annotations", ann, "video annotation JSON")->required();
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--val-frac", val_frac, "validation fraction per family");
  gen->add_option("--counts", count_args, "family=N (category or slug; 'all=N' for every family)")
      ->required();

  auto* train = app.add_subcommand("train", "run the full training pipeline");
  std::string train_cfg, train_data, train_out;
  std::vector<std::string> overrides;
  train->add_option("--config", train_cfg, "run config JSON (defaults when omitted)");
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run output directory")->required();
  train->add_option("--set", overrides, "config override key=value");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  std::string ev_ckpt, ev_data, ev_split = "val", ev_cfg;
  ev->add_option("--checkpoint", ev_ckpt, "policy checkpoint JSON")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--split", ev_split, "train | val | all");
  ev->add_option("--config", ev_cfg, "run config JSON (defaults when omitted)");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the objective gradient");
  std::uint64_t gc_seed = 1;
  int gc_per_layer = 20;
  double gc_tol = 1e-4;
  double gc_kl = 0.04;
  bool gc_corrupt = false;
  gc->add_option("--seed", gc_seed, "scenario seed");
  gc->add_option("--per-layer", gc_per_layer, "coordinates to probe in every tensor");
  gc->add_option("--tol", gc_tol, "relative tolerance");
  gc->add_option("--kl", gc_kl, "regularizer coefficient for the probed objective");
  gc->add_flag("--corrupt", gc_corrupt, "negative control: perturb the analytic gradient");

  auto* ins = app.add_subcommand("inspect-weights", "dump token weights for one episode's group");
  std::string in_ckpt, in_data, in_episode, in_cfg;
  ins->add_option("--checkpoint", in_ckpt, "policy checkpoint JSON")->required();
  ins->add_option("--data", in_data, "dataset directory")->required();
  ins->add_option("--episode", in_episode, "record id, e.g. v03#0017")->required();
  ins->add_option("--config", in_cfg, "run config JSON (defaults when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(ann, gen_out, gen_seed, count_args, val_frac);
    if (train->parsed()) return cmd_train(train_cfg, train_data, train_out, overrides);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_cfg);
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_per_layer, gc_tol, gc_kl, gc_corrupt);
    if (ins->parsed()) return cmd_inspect(in_ckpt, in_data, in_episode, in_cfg);
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
