#include "scotrl/env.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace scotrl {

const std::string& Vocab::name(TokenId t) const {
  if (t < 0 || t >= size()) throw InvariantError("vocab: token id out of range");
  return names[static_cast<size_t>(t)];
}

Vocab build_vocab(const Dataset& ds) {
  Vocab v;
  auto add = [&](const std::string& n) {
    v.names.push_back(n);
    return static_cast<TokenId>(v.names.size() - 1);
  };

  v.pad = add("<pad>");
  v.instr = add("<instr>");
  v.spec.sum_open = add("<summary>");
  v.spec.sum_close = add("</summary>");
  v.spec.think_open = add("<think>");
  v.spec.think_close = add("</think>");
  v.spec.ans_open = add("<answer>");
  v.spec.ans_close = add("</answer>");
  for (char c : {'A', 'B', 'C', 'D'}) v.spec.choice_ids.push_back(add(std::string(1, c)));
  v.yes_tok = add("Yes");
  v.no_tok = add("No");
  for (int k = 1; k <= 4; ++k) v.rank_tok.push_back(add("rank" + std::to_string(k)));
  for (int k = 0; k < 10; ++k) v.ratio_tok.push_back(add("ratio" + std::to_string(k)));
  for (int k = 1; k <= 4; ++k) v.int_tok.push_back(add("int" + std::to_string(k)));
  for (const FamilyInfo& info : all_families())
    v.family_tok[info.category] = add(std::string("fam:") + info.type);

  std::set<std::string> labels;
  for (const VideoAnnotation& video : ds.videos) {
    for (const ActionTriplet& a : video.actions) labels.insert(a.action);
  }
  for (const std::string& l : labels) v.action_tok[l] = add("act:" + l);

  v.spec.v = v.size();
  v.spec.validate();
  return v;
}

namespace {

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && s.front() == '\'' && s.back() == '\'') return s.substr(1, s.size() - 2);
  return s;
}

std::vector<double> extract_numbers(const std::string& s) {
  static const std::regex num(R"([0-9]+(?:\.[0-9]+)?)");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), num); it != std::sregex_iterator(); ++it)
    out.push_back(std::stod(it->str()));
  return out;
}

// Splits "a, b, c" and resolves each part to an action token; nullopt when
// any part is not a known label.
std::optional<TokenSeq> as_label_list(const std::string& text, const Vocab& vocab) {
  TokenSeq out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = text.find(", ", pos);
    const std::string part =
        comma == std::string::npos ? text.substr(pos) : text.substr(pos, comma - pos);
    const auto it = vocab.action_tok.find(part);
    if (it == vocab.action_tok.end()) return std::nullopt;
    out.push_back(it->second);
    if (comma == std::string::npos) break;
    pos = comma + 2;
  }
  return out;
}

TokenId encode_arg(const std::string& arg, const Vocab& vocab) {
  const std::string bare = strip_quotes(arg);
  const auto it = vocab.action_tok.find(bare);
  if (it != vocab.action_tok.end()) return it->second;
  if (bare.find('.') == std::string::npos) {
    for (size_t k = 0; k < vocab.int_tok.size(); ++k) {
      if (bare == std::to_string(k + 1)) return vocab.int_tok[k];
    }
  } else {
    const std::vector<double> nums = extract_numbers(bare);
    if (nums.size() == 1 && nums[0] >= 0.0 && nums[0] <= 1.0) {
      const int decile = std::min(9, static_cast<int>(nums[0] * 10.0));
      return vocab.ratio_tok[static_cast<size_t>(decile)];
    }
  }
  throw BadInput("encode: unencodable question arg '" + arg + "'");
}

// Choice contents: yes/no, label lists, or numeric texts reduced to the rank
// of their value among the record's choices.
std::vector<TokenSeq> encode_choices(const EventFlowRecord& r, const Vocab& vocab) {
  const size_t n = r.choice_texts.size();
  std::vector<TokenSeq> out(n);

  bool all_yesno = true;
  for (const std::string& t : r.choice_texts) all_yesno = all_yesno && (t == "Yes" || t == "No");
  if (all_yesno) {
    for (size_t i = 0; i < n; ++i)
      out[i] = {r.choice_texts[i] == "Yes" ? vocab.yes_tok : vocab.no_tok};
    return out;
  }

  bool all_labels = true;
  for (size_t i = 0; i < n && all_labels; ++i) {
    auto seq = as_label_list(r.choice_texts[i], vocab);
    if (seq)
      out[i] = std::move(*seq);
    else
      all_labels = false;
  }
  if (all_labels) return out;

  std::vector<std::vector<double>> values(n);
  for (size_t i = 0; i < n; ++i) {
    values[i] = extract_numbers(r.choice_texts[i]);
    if (values[i].empty())
      throw BadInput("encode: unencodable choice text '" + r.choice_texts[i] + "'");
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  if (n > vocab.rank_tok.size()) throw InvariantError("encode: more choices than rank tokens");
  for (size_t rank = 0; rank < n; ++rank) out[order[rank]] = {vocab.rank_tok[rank]};
  return out;
}

}  // namespace

Episode encode_episode(const Dataset& ds, int record_idx, const Vocab& vocab) {
  if (record_idx < 0 || record_idx >= static_cast<int>(ds.records.size()))
    throw BadInput("encode: record index out of range");
  const EventFlowRecord& r = ds.records[static_cast<size_t>(record_idx)];
  const VideoAnnotation& video = video_by_id(ds, r.video_id);

  Episode ep;
  ep.id = ds.record_ids[static_cast<size_t>(record_idx)];
  ep.record_idx = record_idx;
  ep.video_id = r.video_id;
  ep.n_choices = static_cast<int>(r.choice_texts.size());

  TokenSeq& toks = ep.prompt.tokens;
  auto mark = [&] { return static_cast<int>(toks.size()); };
  auto close_region = [&](int begin) { ep.prompt.regions.push_back({begin, mark()}); };

  int begin = mark();
  for (int i : chronological_order(video))
    toks.push_back(vocab.action_tok.at(video.actions[static_cast<size_t>(i)].action));
  close_region(begin);

  begin = mark();
  toks.push_back(vocab.family_tok.at(r.category));
  for (const std::string& arg : r.question_args) toks.push_back(encode_arg(arg, vocab));
  close_region(begin);

  const std::vector<TokenSeq> contents = encode_choices(r, vocab);
  for (size_t i = 0; i < contents.size(); ++i) {
    toks.push_back(vocab.spec.choice_ids[i]);
    begin = mark();
    toks.insert(toks.end(), contents[i].begin(), contents[i].end());
    close_region(begin);
  }

  toks.push_back(vocab.instr);
  for (TokenId t : vocab.spec.tag_ids()) toks.push_back(t);

  ep.gt_answer = vocab.spec.choice_ids[static_cast<size_t>(r.correct_choice)];
  for (const std::string& l : synthesize_gt_summary(video, r.interval_lo, r.interval_hi))
    ep.gt_summary.push_back(vocab.action_tok.at(l));
  return ep;
}

std::vector<Episode> build_episodes(const Dataset& ds, const std::vector<int>& idx,
                                    const Vocab& vocab) {
  std::vector<Episode> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(encode_episode(ds, i, vocab));
  return out;
}

TokenId lenient_extract(const StructuredTrajectory& traj, const Vocab& vocab, int n_choices) {
  if (n_choices < 1 || n_choices > static_cast<int>(vocab.spec.choice_ids.size()))
    throw BadInput("lenient_extract: bad choice count");
  if (traj.seg.parse_ok) {
    const auto strict = extract_answer(traj.tokens, traj.seg, vocab.spec);
    if (strict) return *strict;
  }
  for (TokenId t : traj.tokens) {
    for (int k = 0; k < n_choices; ++k) {
      if (t == vocab.spec.choice_ids[static_cast<size_t>(k)]) return t;
    }
  }
  if (!traj.dists.empty()) {
    const Vec& last = traj.dists.back();
    int best = 0;
    for (int k = 1; k < n_choices; ++k) {
      if (last[vocab.spec.choice_ids[static_cast<size_t>(k)]] >
          last[vocab.spec.choice_ids[static_cast<size_t>(best)]])
        best = k;
    }
    return vocab.spec.choice_ids[static_cast<size_t>(best)];
  }
  return vocab.spec.choice_ids[0];
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["mean_bleu_correct"] = r.mean_bleu_correct;
  j["mean_bleu_incorrect"] = r.mean_bleu_incorrect;
  j["mean_sem_correct"] = r.mean_sem_correct;
  j["mean_sem_incorrect"] = r.mean_sem_incorrect;
  j["parse_rate"] = r.parse_rate;
  return j;
}

EvalReport evaluate(const std::vector<Episode>& episodes, const RolloutFn& rollout,
                    const Vocab& vocab, const EmbeddingProvider& provider,
                    const SimilarityWeights& weights, int bleu_max_n) {
  if (episodes.empty()) throw BadInput("evaluate: no episodes");
  weights.validate();

  EvalReport rep;
  double bleu_c = 0.0, bleu_i = 0.0, sem_c = 0.0, sem_i = 0.0;
  for (const Episode& ep : episodes) {
    const StructuredTrajectory traj = rollout(ep);
    const bool parsed = traj.seg.parse_ok;
    const TokenId chosen = lenient_extract(traj, vocab, ep.n_choices);
    const bool correct = chosen == ep.gt_answer;

    double b = 0.0, s = 0.0;
    if (parsed && !traj.seg.summary.empty()) {
      TokenSeq summary(traj.tokens.begin() + traj.seg.summary.begin,
                       traj.tokens.begin() + traj.seg.summary.end);
      b = bleu(summary, ep.gt_summary, bleu_max_n);
      s = semantic_sim(summary, ep.gt_summary, provider);
    }
    rep.n_total += 1;
    rep.n_parsed += parsed ? 1 : 0;
    if (correct) {
      rep.n_correct += 1;
      bleu_c += b;
      sem_c += s;
    } else {
      bleu_i += b;
      sem_i += s;
    }
  }
  const int n_inc = rep.n_total - rep.n_correct;
  rep.accuracy = static_cast<double>(rep.n_correct) / rep.n_total;
  rep.parse_rate = static_cast<double>(rep.n_parsed) / rep.n_total;
  rep.mean_bleu_correct = rep.n_correct ? bleu_c / rep.n_correct : 0.0;
  rep.mean_sem_correct = rep.n_correct ? sem_c / rep.n_correct : 0.0;
  rep.mean_bleu_incorrect = n_inc ? bleu_i / n_inc : 0.0;
  rep.mean_sem_incorrect = n_inc ? sem_i / n_inc : 0.0;
  return rep;
}

}  // namespace scotrl
