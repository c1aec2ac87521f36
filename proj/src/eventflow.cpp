#include "scotrl/eventflow.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace scotrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::vector<FamilyInfo>& all_families() {
  static const std::vector<FamilyInfo> table = {
      {TemplateFamily::ActionOrderReasoning, "Action Order Reasoning", "action level",
       "temporal_neighbor", "What action happened immediately before {} in the video?",
       {"What activity took place directly prior to {} in the video?",
        "Which action was performed right before {}?",
        "Immediately before {}, what was the person doing?"},
       4, 4},
      {TemplateFamily::TemporalCausality, "Temporal Causality", "action level",
       "temporal_causality", "What was the most recent action completed before {} began?",
       {"Which action led directly into {}?", "What had just finished when {} started?",
        "Right as {} began, which action had most recently ended?"},
       4, 4},
      {TemplateFamily::ActionAnticipation, "Action Anticipation", "action level",
       "action_anticipation", "What action happened immediately after {} in the video?",
       {"What did the person do right after {}?", "Which activity directly followed {}?",
        "Immediately after {}, what action occurred?"},
       4, 4},
      {TemplateFamily::SequentialPrediction, "Sequential Prediction", "action level",
       "sequential_prediction", "After {}, predict the next {} actions in order.",
       {"Following {}, what are the next {} actions in sequence?",
        "Once {} is done, which {} actions follow, in order?",
        "After {}, name the following {} actions in the order they happen."},
       4, 4},
      {TemplateFamily::DurationEstimation, "Duration Estimation", "action level",
       "duration_estimation", "How long does the action {} take in the video?",
       {"What is the duration of {}?", "For how much time does {} last?",
        "Roughly how long does {} go on?"},
       2, 4},
      {TemplateFamily::TemporalLocalization, "Temporal Localization", "action level",
       "temporal_localization", "When does the action {} occur in the video?",
       {"During which time span does {} take place?",
        "Locate the time interval of {} in the video.",
        "At what times does {} start and end?"},
       4, 4},
      {TemplateFamily::TemporalQaFromNarration, "Temporal QA from Narration", "action level",
       "temporal_narration", "At time ratio {} of the video, what action is taking place?",
       {"What is the person doing at fraction {} of the way through the video?",
        "Which action is underway at relative time {}?",
        "At {} of the video's duration, what activity is occurring?"},
       4, 4},
      {TemplateFamily::TemporalGapEstimation, "Temporal Gap Estimation", "video level",
       "temporal_gap", "How much time passes between the end of {} and the start of {}?",
       {"What is the gap between {} finishing and {} beginning?",
        "After {} ends, how long until {} starts?",
        "How long is the pause between {} and {}?"},
       3, 4},
      {TemplateFamily::TemporalYesNo, "Temporal Yes/No", "video level", "temporal_yesno",
       "Did {} finish before {} started in the video?",
       {"Was {} already over when {} began?", "Did {} end prior to the start of {}?",
        "Had {} concluded before {} got underway?"},
       2, 2},
      {TemplateFamily::TemporalComparison, "Temporal Comparison", "video level",
       "temporal_comparison", "Which of the following actions occurred first in the video?",
       {"Among the options, which action happened earliest?",
        "Of the listed actions, which one took place first?",
        "Which option comes earliest in the video?"},
       4, 4},
      {TemplateFamily::DurationComparison, "Duration Comparison", "video level",
       "duration_comparison", "Which of the following actions took the longest time?",
       {"Among the options, which action lasted longest?",
        "Of the listed actions, which one has the greatest duration?",
        "Which option goes on for the most time?"},
       4, 4},
      {TemplateFamily::InBetweenAction, "In-between Action", "video level", "in_between",
       "Which actions occurred between {} and {}?",
       {"What took place after {} and before {}?",
        "List the actions happening between {} and {}.",
        "Between {} and {}, which actions were performed?"},
       4, 4},
      {TemplateFamily::Transcription, "Transcription", "video level", "transcription",
       "Which option correctly lists the actions of the video in order?",
       {"Which choice gives the video's action sequence from start to finish?",
        "Select the option that matches the order of actions in the video.",
        "Which listing reflects the true order of events?"},
       3, 4},
      {TemplateFamily::ActionOrderReasoningExtreme, "Action Order Reasoning (Extreme)",
       "video level", "temporal_extreme", "Which action happened first in the video?",
       {"What is the very first action in the video?", "Which action does the video begin with?",
        "What action occurs at the start of the video?"},
       4, 4},
      {TemplateFamily::ActionOrderSorting, "Action Order Sorting", "video level", "order_sorting",
       "Arrange the actions {}, {}, {} in the order they occur.",
       {"Sort {}, {}, {} by their order in the video.",
        "Put {}, {}, {} into chronological order.", "In what order do {}, {}, {} happen?"},
       3, 4},
  };
  return table;
}

const FamilyInfo& family_info(TemplateFamily f) {
  for (const FamilyInfo& info : all_families()) {
    if (info.family == f) return info;
  }
  throw InvariantError("family_info: unknown family");
}

std::optional<TemplateFamily> family_by_category(const std::string& category) {
  for (const FamilyInfo& info : all_families()) {
    if (category == info.category) return info.family;
  }
  return std::nullopt;
}

std::string letter_for(int choice_idx) {
  if (choice_idx < 0 || choice_idx >= 26) throw InvariantError("letter_for: index out of range");
  return std::string(1, static_cast<char>('A' + choice_idx));
}

std::string choices_string(const std::vector<std::string>& choice_texts) {
  std::ostringstream out;
  for (size_t i = 0; i < choice_texts.size(); ++i) {
    if (i) out << '\n';
    out << letter_for(static_cast<int>(i)) << ". " << choice_texts[i];
  }
  return out.str();
}

json record_to_json(const EventFlowRecord& r) {
  json j;
  j["tag"] = r.tag;
  j["type"] = r.type;
  j["template_type"] = r.template_type;
  j["answer_type"] = r.answer_type;
  j["category"] = r.category;
  j["template"] = r.template_str;
  j["new_template"] = r.new_template;
  j["question_args"] = r.question_args;
  j["choices"] = choices_string(r.choice_texts);
  j["final_answer"] = letter_for(r.correct_choice);
  j["answer_text"] = r.answer_text;
  j["video_interval"] = json::array({r.interval_lo, r.interval_hi});
  j["act_idx"] = r.act_idx;
  return j;
}

EventFlowRecord record_from_json(const json& j) {
  EventFlowRecord r;
  try {
    r.tag = j.at("tag").get<std::string>();
    r.type = j.at("type").get<std::string>();
    r.template_type = j.at("template_type").get<std::string>();
    r.answer_type = j.at("answer_type").get<std::string>();
    r.category = j.at("category").get<std::string>();
    r.template_str = j.at("template").get<std::string>();
    r.new_template = j.at("new_template").get<std::string>();
    r.question_args = j.at("question_args").get<std::vector<std::string>>();
    const std::string choices = j.at("choices").get<std::string>();
    std::istringstream lines(choices);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.size() < 4 || line[1] != '.' || line[2] != ' ')
        throw BadInput("record: malformed choices line: " + line);
      const int idx = line[0] - 'A';
      if (idx != static_cast<int>(r.choice_texts.size()))
        throw BadInput("record: choice letters out of order");
      r.choice_texts.push_back(line.substr(3));
    }
    const std::string fa = j.at("final_answer").get<std::string>();
    if (fa.size() != 1 || fa[0] < 'A' ||
        fa[0] >= 'A' + static_cast<char>(r.choice_texts.size()))
      throw BadInput("record: final_answer letter outside choice range");
    r.correct_choice = fa[0] - 'A';
    r.answer_text = j.at("answer_text").get<std::string>();
    const json& vi = j.at("video_interval");
    if (!vi.is_array() || vi.size() != 2) throw BadInput("record: video_interval must be [lo, hi]");
    r.interval_lo = vi[0].get<double>();
    r.interval_hi = vi[1].get<double>();
    r.act_idx = j.at("act_idx").get<int>();
  } catch (const json::exception& e) {
    throw BadInput(std::string("record: ") + e.what());
  }
  return r;
}

std::vector<int> chronological_order(const VideoAnnotation& video) {
  std::vector<int> idx(video.actions.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const ActionTriplet& x = video.actions[static_cast<size_t>(a)];
    const ActionTriplet& y = video.actions[static_cast<size_t>(b)];
    if (x.t_s != y.t_s) return x.t_s < y.t_s;
    if (x.t_e != y.t_e) return x.t_e < y.t_e;
    return a < b;
  });
  return idx;
}

std::vector<int> actions_in_interval(const VideoAnnotation& video, double lo, double hi) {
  std::vector<int> out;
  for (int i : chronological_order(video)) {
    const ActionTriplet& a = video.actions[static_cast<size_t>(i)];
    if (a.t_s <= hi && a.t_e >= lo) out.push_back(i);
  }
  return out;
}

std::vector<std::string> synthesize_gt_summary(const VideoAnnotation& video, double lo, double hi) {
  std::vector<std::string> out;
  for (int i : actions_in_interval(video, lo, hi)) out.push_back(video.actions[static_cast<size_t>(i)].action);
  return out;
}

std::string format_duration(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f seconds", seconds);
  return buf;
}

std::string format_interval(double lo, double hi) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "from %.1fs to %.1fs", lo, hi);
  return buf;
}

std::string format_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::ostringstream out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out << ", ";
    out << labels[i];
  }
  return out.str();
}

namespace {

std::string quoted(const std::string& s) { return "'" + s + "'"; }

bool spans_overlap(const ActionTriplet& a, const ActionTriplet& b) {
  return a.t_s < b.t_e && b.t_s < a.t_e;
}

bool any_overlap(const VideoAnnotation& v, const std::vector<int>& involved) {
  for (size_t i = 0; i < involved.size(); ++i) {
    for (size_t j = i + 1; j < involved.size(); ++j) {
      if (spans_overlap(v.actions[static_cast<size_t>(involved[i])],
                        v.actions[static_cast<size_t>(involved[j])]))
        return true;
    }
  }
  return false;
}

// Actions whose label is unique within the video; everything a question or an
// answer names must be unambiguous.
std::vector<bool> usable_mask(const VideoAnnotation& v) {
  std::map<std::string, int> counts;
  for (const ActionTriplet& a : v.actions) ++counts[a.action];
  std::vector<bool> mask(v.actions.size());
  for (size_t i = 0; i < v.actions.size(); ++i) mask[i] = counts[v.actions[i].action] == 1;
  return mask;
}

const std::string& label(const VideoAnnotation& v, int i) {
  return v.actions[static_cast<size_t>(i)].action;
}

// Builder context prepared once per instantiate call.
struct Ctx {
  const VideoAnnotation& v;
  const FamilyInfo& info;
  Rng& rng;
  std::vector<int> ord;          // chronological indices
  std::vector<bool> usable;
  std::vector<int> usable_ord;   // chronological, unique-label only
};

// Fills the record skeleton common to every family and shuffles the choices.
// involved drives the overlap flag; primary_idx fills act_idx.
EventFlowRecord finish(Ctx& c, std::vector<std::string> args, const std::string& gt_text,
                       std::vector<std::string> distractors, const std::vector<int>& involved,
                       int primary_idx, bool order_sensitive) {
  EventFlowRecord r;
  r.tag = c.info.tag;
  r.type = c.info.type;
  r.category = c.info.category;
  r.template_str = c.info.canonical;
  r.new_template = c.info.paraphrases[static_cast<size_t>(
      c.rng.below(static_cast<int>(c.info.paraphrases.size())))];
  r.question_args = std::move(args);
  r.answer_text = gt_text;
  r.video_id = c.v.video_id;
  r.act_idx = primary_idx;
  r.overlap = order_sensitive && any_overlap(c.v, involved);

  const ActionTriplet& first = c.v.actions[static_cast<size_t>(c.ord.front())];
  const ActionTriplet& last = c.v.actions[static_cast<size_t>(c.ord.back())];
  r.interval_lo = first.t_s;
  r.interval_hi = last.t_e;

  std::vector<std::string> texts;
  texts.push_back(gt_text);
  for (std::string& d : distractors) texts.push_back(std::move(d));
  std::vector<int> pos(texts.size());
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  c.rng.shuffle(pos);
  r.choice_texts.resize(texts.size());
  for (size_t slot = 0; slot < pos.size(); ++slot) {
    r.choice_texts[slot] = texts[static_cast<size_t>(pos[slot])];
    if (pos[slot] == 0) r.correct_choice = static_cast<int>(slot);
  }
  return r;
}

// Draws n distinct labels from usable actions, excluding `exclude` texts.
std::optional<std::vector<std::string>> draw_label_distractors(Ctx& c, int n,
                                                               const std::set<std::string>& exclude) {
  std::vector<std::string> pool;
  for (int i : c.usable_ord) {
    if (!exclude.count(label(c.v, i))) pool.push_back(label(c.v, i));
  }
  if (static_cast<int>(pool.size()) < n) return std::nullopt;
  c.rng.shuffle(pool);
  pool.resize(static_cast<size_t>(n));
  return pool;
}

// Three numeric distractors around gt by the fixed perturbation ladder.
std::optional<std::vector<std::string>> numeric_distractors(double gt_value,
                                                            const std::string& gt_text,
                                                            Rng& rng) {
  std::vector<double> mults = {1.2, 0.8, 1.5, 0.5, 2.0, 3.0, 0.25};
  rng.shuffle(mults);
  std::vector<std::string> out;
  std::set<std::string> seen = {gt_text};
  for (double m : mults) {
    const std::string t = format_duration(gt_value * m);
    if (seen.insert(t).second) out.push_back(t);
    if (out.size() == 3) return out;
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_neighbor(Ctx& c, bool forward, bool causal) {
  const int n = static_cast<int>(c.ord.size());
  for (int attempt = 0; attempt < 40; ++attempt) {
    const int pos = forward ? c.rng.between(0, n - 2) : c.rng.between(1, n - 1);
    const int target = c.ord[static_cast<size_t>(pos)];
    if (!c.usable[static_cast<size_t>(target)]) continue;

    int gt = -1;
    bool order_sensitive = true;
    if (causal) {
      // Most recently completed action at the target's start. Well defined
      // even when spans overlap, so no overlap flag; t_e ties are skipped.
      const double start = c.v.actions[static_cast<size_t>(target)].t_s;
      bool tie = false;
      for (int i : c.ord) {
        if (i == target) continue;
        const double end = c.v.actions[static_cast<size_t>(i)].t_e;
        if (end > start) continue;
        if (gt < 0 || end > c.v.actions[static_cast<size_t>(gt)].t_e) {
          gt = i;
          tie = false;
        } else if (end == c.v.actions[static_cast<size_t>(gt)].t_e) {
          tie = true;
        }
      }
      if (gt < 0 || tie) continue;
      order_sensitive = false;
    } else {
      gt = c.ord[static_cast<size_t>(forward ? pos + 1 : pos - 1)];
    }
    if (!c.usable[static_cast<size_t>(gt)]) continue;
    auto distractors = draw_label_distractors(c, 3, {label(c.v, gt)});
    if (!distractors) return std::nullopt;
    return finish(c, {quoted(label(c.v, target))}, label(c.v, gt), std::move(*distractors),
                  {target, gt}, target, order_sensitive);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_sequential(Ctx& c) {
  const int n = static_cast<int>(c.ord.size());
  if (n < 3) return std::nullopt;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const int pos = c.rng.between(0, n - 3);
    const int target = c.ord[static_cast<size_t>(pos)];
    const int s1 = c.ord[static_cast<size_t>(pos + 1)];
    const int s2 = c.ord[static_cast<size_t>(pos + 2)];
    if (!c.usable[static_cast<size_t>(target)] || !c.usable[static_cast<size_t>(s1)] ||
        !c.usable[static_cast<size_t>(s2)])
      continue;
    const std::string gt = join_labels({label(c.v, s1), label(c.v, s2)});

    std::vector<std::string> pool;
    for (int a : c.usable_ord) {
      for (int b : c.usable_ord) {
        if (a == b) continue;
        const std::string t = join_labels({label(c.v, a), label(c.v, b)});
        if (t != gt) pool.push_back(t);
      }
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    if (pool.size() < 3) return std::nullopt;
    c.rng.shuffle(pool);
    pool.resize(3);
    return finish(c, {quoted(label(c.v, target)), "2"}, gt, std::move(pool), {target, s1, s2},
                  target, true);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_duration(Ctx& c) {
  for (int attempt = 0; attempt < 40; ++attempt) {
    if (c.usable_ord.empty()) return std::nullopt;
    const int target =
        c.usable_ord[static_cast<size_t>(c.rng.below(static_cast<int>(c.usable_ord.size())))];
    const ActionTriplet& a = c.v.actions[static_cast<size_t>(target)];
    const double dur = a.t_e - a.t_s;
    if (dur < 0.3) continue;
    const std::string gt = format_duration(dur);
    auto distractors = numeric_distractors(dur, gt, c.rng);
    if (!distractors) continue;
    return finish(c, {quoted(a.action)}, gt, std::move(*distractors), {target}, target, false);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_localization(Ctx& c) {
  if (c.usable_ord.empty()) return std::nullopt;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const int target =
        c.usable_ord[static_cast<size_t>(c.rng.below(static_cast<int>(c.usable_ord.size())))];
    const ActionTriplet& a = c.v.actions[static_cast<size_t>(target)];
    const std::string gt = format_interval(a.t_s, a.t_e);

    std::vector<std::string> pool;
    std::set<std::string> seen = {gt};
    for (int other : c.ord) {
      if (other == target) continue;
      const ActionTriplet& o = c.v.actions[static_cast<size_t>(other)];
      const std::string t = format_interval(o.t_s, o.t_e);
      if (seen.insert(t).second) pool.push_back(t);
    }
    const double len = a.t_e - a.t_s;
    for (double shift : {0.3, 0.6, 0.9}) {
      const std::string t = format_interval(a.t_s + shift * (len + 1.0), a.t_e + shift * (len + 1.0));
      if (seen.insert(t).second) pool.push_back(t);
    }
    if (pool.size() < 3) continue;
    c.rng.shuffle(pool);
    pool.resize(3);
    return finish(c, {quoted(a.action)}, gt, std::move(pool), {target}, target, false);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_narration(Ctx& c) {
  for (int attempt = 0; attempt < 60; ++attempt) {
    if (c.usable_ord.empty()) return std::nullopt;
    const int target =
        c.usable_ord[static_cast<size_t>(c.rng.below(static_cast<int>(c.usable_ord.size())))];
    const ActionTriplet& a = c.v.actions[static_cast<size_t>(target)];
    const double r = std::stod(format_ratio(0.5 * (a.t_s + a.t_e) / c.v.duration));
    const double t = r * c.v.duration;
    // First chronological action containing the rounded timestamp must be the
    // target, else the rounded question would have a different answer.
    int containing = -1;
    for (int i : c.ord) {
      const ActionTriplet& x = c.v.actions[static_cast<size_t>(i)];
      if (x.t_s <= t && t <= x.t_e) {
        containing = i;
        break;
      }
    }
    if (containing != target) continue;
    auto distractors = draw_label_distractors(c, 3, {a.action});
    if (!distractors) return std::nullopt;
    return finish(c, {format_ratio(r)}, a.action, std::move(*distractors), {target}, target, false);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_gap(Ctx& c) {
  std::vector<std::pair<int, int>> pairs;
  for (int a : c.usable_ord) {
    for (int b : c.usable_ord) {
      const ActionTriplet& x = c.v.actions[static_cast<size_t>(a)];
      const ActionTriplet& y = c.v.actions[static_cast<size_t>(b)];
      if (y.t_s - x.t_e >= 0.3) pairs.emplace_back(a, b);
    }
  }
  if (pairs.empty()) return std::nullopt;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const auto [a, b] = pairs[static_cast<size_t>(c.rng.below(static_cast<int>(pairs.size())))];
    const double gap = c.v.actions[static_cast<size_t>(b)].t_s - c.v.actions[static_cast<size_t>(a)].t_e;
    const std::string gt = format_duration(gap);
    auto distractors = numeric_distractors(gap, gt, c.rng);
    if (!distractors) continue;
    return finish(c, {quoted(label(c.v, a)), quoted(label(c.v, b))}, gt, std::move(*distractors),
                  {a, b}, a, false);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_yesno(Ctx& c) {
  if (c.usable_ord.size() < 2) return std::nullopt;
  const int na = static_cast<int>(c.usable_ord.size());
  const int ia = c.rng.below(na);
  int ib = c.rng.below(na - 1);
  if (ib >= ia) ++ib;
  const int a = c.usable_ord[static_cast<size_t>(ia)];
  const int b = c.usable_ord[static_cast<size_t>(ib)];
  const bool yes = c.v.actions[static_cast<size_t>(a)].t_e < c.v.actions[static_cast<size_t>(b)].t_s;

  EventFlowRecord r;
  r.tag = c.info.tag;
  r.type = c.info.type;
  r.category = c.info.category;
  r.template_str = c.info.canonical;
  r.new_template = c.info.paraphrases[static_cast<size_t>(
      c.rng.below(static_cast<int>(c.info.paraphrases.size())))];
  r.question_args = {quoted(label(c.v, a)), quoted(label(c.v, b))};
  r.choice_texts = {"Yes", "No"};
  r.correct_choice = yes ? 0 : 1;
  r.answer_text = yes ? "Yes" : "No";
  r.video_id = c.v.video_id;
  r.act_idx = a;
  r.overlap = false;  // strict precedence is well defined even for overlaps
  const ActionTriplet& first = c.v.actions[static_cast<size_t>(c.ord.front())];
  const ActionTriplet& last = c.v.actions[static_cast<size_t>(c.ord.back())];
  r.interval_lo = first.t_s;
  r.interval_hi = last.t_e;
  return r;
}

std::optional<EventFlowRecord> build_comparison(Ctx& c, bool by_duration) {
  if (c.usable_ord.size() < 4) return std::nullopt;
  for (int attempt = 0; attempt < 60; ++attempt) {
    std::vector<int> cand = c.usable_ord;
    c.rng.shuffle(cand);
    cand.resize(4);
    int best = cand[0];
    bool tie_risky = false;
    if (by_duration) {
      auto dur = [&](int i) {
        return c.v.actions[static_cast<size_t>(i)].t_e - c.v.actions[static_cast<size_t>(i)].t_s;
      };
      for (int i : cand) {
        if (dur(i) > dur(best)) best = i;
      }
      for (int i : cand) {
        if (i != best && dur(best) - dur(i) < 0.05) tie_risky = true;
      }
    } else {
      auto before = [&](int x, int y) {
        const ActionTriplet& p = c.v.actions[static_cast<size_t>(x)];
        const ActionTriplet& q = c.v.actions[static_cast<size_t>(y)];
        if (p.t_s != q.t_s) return p.t_s < q.t_s;
        if (p.t_e != q.t_e) return p.t_e < q.t_e;
        return x < y;
      };
      for (int i : cand) {
        if (before(i, best)) best = i;
      }
    }
    if (tie_risky) continue;
    std::vector<std::string> distractors;
    for (int i : cand) {
      if (i != best) distractors.push_back(label(c.v, i));
    }
    return finish(c, {}, label(c.v, best), std::move(distractors), cand, best, !by_duration);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_in_between(Ctx& c) {
  const int n = static_cast<int>(c.ord.size());
  std::vector<std::pair<int, int>> spans;  // positions in ord
  for (int p = 0; p < n; ++p) {
    for (int q = p + 2; q < std::min(n, p + 5); ++q) spans.emplace_back(p, q);
  }
  if (spans.empty()) return std::nullopt;
  for (int attempt = 0; attempt < 60; ++attempt) {
    const auto [p, q] = spans[static_cast<size_t>(c.rng.below(static_cast<int>(spans.size())))];
    const int a = c.ord[static_cast<size_t>(p)];
    const int b = c.ord[static_cast<size_t>(q)];
    std::vector<int> between;
    bool ok = c.usable[static_cast<size_t>(a)] && c.usable[static_cast<size_t>(b)];
    for (int i = p + 1; i < q && ok; ++i) {
      between.push_back(c.ord[static_cast<size_t>(i)]);
      ok = c.usable[static_cast<size_t>(c.ord[static_cast<size_t>(i)])];
    }
    if (!ok || between.empty()) continue;

    std::vector<std::string> gt_labels;
    for (int i : between) gt_labels.push_back(label(c.v, i));
    const std::string gt = join_labels(gt_labels);

    std::set<std::string> seen = {gt};
    std::vector<std::string> pool;
    if (gt_labels.size() >= 2) {
      std::vector<std::string> rev(gt_labels.rbegin(), gt_labels.rend());
      const std::string t = join_labels(rev);
      if (seen.insert(t).second) pool.push_back(t);
    }
    for (int other : c.usable_ord) {
      if (std::find(between.begin(), between.end(), other) != between.end()) continue;
      std::vector<std::string> mod = gt_labels;
      mod.back() = label(c.v, other);
      std::string t = join_labels(mod);
      if (seen.insert(t).second) pool.push_back(t);
      mod = gt_labels;
      mod.front() = label(c.v, other);
      t = join_labels(mod);
      if (seen.insert(t).second) pool.push_back(t);
    }
    if (pool.size() < 3) continue;
    c.rng.shuffle(pool);
    pool.resize(3);
    std::vector<int> involved = between;
    involved.push_back(a);
    involved.push_back(b);
    return finish(c, {quoted(label(c.v, a)), quoted(label(c.v, b))}, gt, std::move(pool), involved,
                  a, true);
  }
  return std::nullopt;
}

std::optional<EventFlowRecord> build_transcription(Ctx& c) {
  const int n = static_cast<int>(c.ord.size());
  if (n < 3 || n > 7) return std::nullopt;
  for (int i : c.ord) {
    if (!c.usable[static_cast<size_t>(i)]) return std::nullopt;
  }
  std::vector<std::string> gt_labels;
  for (int i : c.ord) gt_labels.push_back(label(c.v, i));
  const std::string gt = join_labels(gt_labels);

  std::set<std::string> seen = {gt};
  std::vector<std::string> pool;
  for (int attempt = 0; attempt < 200 && pool.size() < 3; ++attempt) {
    std::vector<std::string> perm = gt_labels;
    c.rng.shuffle(perm);
    const std::string t = join_labels(perm);
    if (seen.insert(t).second) pool.push_back(t);
  }
  if (pool.size() < 3) return std::nullopt;
  return finish(c, {}, gt, std::move(pool), c.ord, 0, true);
}

std::optional<EventFlowRecord> build_extreme(Ctx& c) {
  const int first = c.ord.front();
  if (!c.usable[static_cast<size_t>(first)]) return std::nullopt;
  auto distractors = draw_label_distractors(c, 3, {label(c.v, first)});
  if (!distractors) return std::nullopt;
  return finish(c, {}, label(c.v, first), std::move(*distractors), c.ord, first, true);
}

std::optional<EventFlowRecord> build_sorting(Ctx& c) {
  if (c.usable_ord.size() < 3) return std::nullopt;
  for (int attempt = 0; attempt < 40; ++attempt) {
    std::vector<int> cand = c.usable_ord;
    c.rng.shuffle(cand);
    cand.resize(3);  // presentation order = shuffled draw order

    std::vector<int> chrono = cand;
    std::sort(chrono.begin(), chrono.end(), [&](int x, int y) {
      const ActionTriplet& p = c.v.actions[static_cast<size_t>(x)];
      const ActionTriplet& q = c.v.actions[static_cast<size_t>(y)];
      if (p.t_s != q.t_s) return p.t_s < q.t_s;
      if (p.t_e != q.t_e) return p.t_e < q.t_e;
      return x < y;
    });
    std::vector<std::string> gt_labels;
    for (int i : chrono) gt_labels.push_back(label(c.v, i));
    const std::string gt = join_labels(gt_labels);

    std::set<std::string> seen = {gt};
    std::vector<std::string> pool;
    std::vector<std::string> perm = gt_labels;
    std::sort(perm.begin(), perm.end());
    do {
      const std::string t = join_labels(perm);
      if (seen.insert(t).second) pool.push_back(t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (pool.size() < 3) continue;
    c.rng.shuffle(pool);
    pool.resize(3);
    return finish(c,
                  {quoted(label(c.v, cand[0])), quoted(label(c.v, cand[1])),
                   quoted(label(c.v, cand[2]))},
                  gt, std::move(pool), cand, cand[0], true);
  }
  return std::nullopt;
}

}  // namespace

std::optional<EventFlowRecord> instantiate(const VideoAnnotation& video, TemplateFamily family,
                                           Rng& rng) {
  const FamilyInfo& info = family_info(family);
  if (static_cast<int>(video.actions.size()) < info.min_actions) return std::nullopt;

  Ctx c{video, info, rng, chronological_order(video), usable_mask(video), {}};
  for (int i : c.ord) {
    if (c.usable[static_cast<size_t>(i)]) c.usable_ord.push_back(i);
  }

  switch (family) {
    case TemplateFamily::ActionOrderReasoning:
      return build_neighbor(c, false, false);
    case TemplateFamily::TemporalCausality:
      return build_neighbor(c, false, true);
    case TemplateFamily::ActionAnticipation:
      return build_neighbor(c, true, false);
    case TemplateFamily::SequentialPrediction:
      return build_sequential(c);
    case TemplateFamily::DurationEstimation:
      return build_duration(c);
    case TemplateFamily::TemporalLocalization:
      return build_localization(c);
    case TemplateFamily::TemporalQaFromNarration:
      return build_narration(c);
    case TemplateFamily::TemporalGapEstimation:
      return build_gap(c);
    case TemplateFamily::TemporalYesNo:
      return build_yesno(c);
    case TemplateFamily::TemporalComparison:
      return build_comparison(c, false);
    case TemplateFamily::DurationComparison:
      return build_comparison(c, true);
    case TemplateFamily::InBetweenAction:
      return build_in_between(c);
    case TemplateFamily::Transcription:
      return build_transcription(c);
    case TemplateFamily::ActionOrderReasoningExtreme:
      return build_extreme(c);
    case TemplateFamily::ActionOrderSorting:
      return build_sorting(c);
  }
  throw InvariantError("instantiate: unknown family");
}

Dataset generate_dataset(const std::vector<VideoAnnotation>& videos,
                         const std::map<TemplateFamily, int>& counts, std::uint64_t seed,
                         double val_fraction) {
  if (videos.empty()) throw BadInput("generate_dataset: no annotations");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw BadInput("generate_dataset: val_fraction must be in [0, 1)");

  Dataset ds;
  ds.videos = videos;
  Rng rng(mix_seed(seed, 0xdada));

  for (const FamilyInfo& info : all_families()) {
    const auto it = counts.find(info.family);
    if (it == counts.end() || it->second <= 0) continue;
    const int want = it->second;
    int made = 0;
    const int max_attempts = want * 200 + 200;
    for (int attempt = 0; attempt < max_attempts && made < want; ++attempt) {
      const VideoAnnotation& v = videos[static_cast<size_t>(rng.below(static_cast<int>(videos.size())))];
      auto rec = instantiate(v, info.family, rng);
      if (!rec) continue;
      ds.records.push_back(std::move(*rec));
      ++made;
    }
    if (made < want)
      throw BadInput(std::string("generate_dataset: annotations cannot fill family '") +
                     info.category + "' (" + std::to_string(made) + "/" + std::to_string(want) + ")");
  }

  ds.record_ids.resize(ds.records.size());
  for (size_t i = 0; i < ds.records.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%04zu", i);
    ds.record_ids[i] = ds.records[i].video_id + buf;
  }

  // Stratified split: every family contributes to val when it has >= 2 records.
  for (const FamilyInfo& info : all_families()) {
    std::vector<int> idx;
    for (size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].category == info.category) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) continue;
    rng.shuffle(idx);
    int n_val = static_cast<int>(std::floor(val_fraction * static_cast<double>(idx.size()) + 0.5));
    if (val_fraction > 0.0 && idx.size() >= 2 && n_val == 0) n_val = 1;
    if (n_val >= static_cast<int>(idx.size())) n_val = static_cast<int>(idx.size()) - 1;
    for (size_t i = 0; i < idx.size(); ++i) {
      if (static_cast<int>(i) < n_val)
        ds.val_idx.push_back(idx[i]);
      else
        ds.train_idx.push_back(idx[i]);
    }
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());
  return ds;
}

std::vector<VideoAnnotation> load_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadInput("annotations: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("annotations: ") + e.what());
  }
  if (!j.is_array()) throw BadInput("annotations: top level must be an array of videos");
  std::vector<VideoAnnotation> videos;
  std::set<std::string> ids;
  try {
    for (const json& vj : j) {
      VideoAnnotation v;
      v.video_id = vj.at("video_id").get<std::string>();
      v.duration = vj.at("duration").get<double>();
      if (v.video_id.empty()) throw BadInput("annotations: empty video_id");
      if (v.video_id.find('#') != std::string::npos)
        throw BadInput("annotations: video_id must not contain '#'");
      if (!ids.insert(v.video_id).second)
        throw BadInput("annotations: duplicate video_id " + v.video_id);
      if (v.duration <= 0.0) throw BadInput("annotations: nonpositive duration in " + v.video_id);
      for (const json& aj : vj.at("actions")) {
        ActionTriplet a;
        a.action = aj.at("action").get<std::string>();
        a.t_s = aj.at("t_s").get<double>();
        a.t_e = aj.at("t_e").get<double>();
        if (a.action.empty()) throw BadInput("annotations: empty action label in " + v.video_id);
        if (!(a.t_s >= 0.0 && a.t_s < a.t_e && a.t_e <= v.duration + 1e-9))
          throw BadInput("annotations: bad span for '" + a.action + "' in " + v.video_id);
        v.actions.push_back(std::move(a));
      }
      if (v.actions.empty()) throw BadInput("annotations: no actions in " + v.video_id);
      videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw BadInput(std::string("annotations: ") + e.what());
  }
  return videos;
}

void write_dataset(const Dataset& ds, const std::string& out_dir) {
  fs::create_directories(out_dir);

  std::ofstream rec(fs::path(out_dir) / "records.jsonl", std::ios::binary);
  if (!rec) throw BadInput("write_dataset: cannot write records.jsonl");
  for (const EventFlowRecord& r : ds.records) rec << record_to_json(r).dump() << '\n';

  json manifest;
  json train = json::array();
  json val = json::array();
  for (int i : ds.train_idx) train.push_back(ds.record_ids[static_cast<size_t>(i)]);
  for (int i : ds.val_idx) val.push_back(ds.record_ids[static_cast<size_t>(i)]);
  manifest["train"] = std::move(train);
  manifest["val"] = std::move(val);
  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';

  json vids = json::array();
  for (const VideoAnnotation& v : ds.videos) {
    json actions = json::array();
    for (const ActionTriplet& a : v.actions)
      actions.push_back({{"action", a.action}, {"t_s", a.t_s}, {"t_e", a.t_e}});
    vids.push_back({{"video_id", v.video_id}, {"duration", v.duration}, {"actions", actions}});
  }
  std::ofstream vf(fs::path(out_dir) / "videos.json", std::ios::binary);
  vf << vids.dump(2) << '\n';

  json flags;
  json overlap = json::array();
  for (size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].overlap) overlap.push_back(ds.record_ids[i]);
  }
  flags["overlap"] = std::move(overlap);
  std::ofstream ff(fs::path(out_dir) / "flags.json", std::ios::binary);
  ff << flags.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;

  std::ifstream vf(fs::path(dir) / "videos.json", std::ios::binary);
  if (!vf) throw BadInput("load_dataset: cannot open videos.json in " + dir);
  json vids;
  try {
    vf >> vids;
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("load_dataset: videos.json: ") + e.what());
  }
  try {
    for (const json& vj : vids) {
      VideoAnnotation v;
      v.video_id = vj.at("video_id").get<std::string>();
      v.duration = vj.at("duration").get<double>();
      for (const json& aj : vj.at("actions")) {
        v.actions.push_back(
            {aj.at("action").get<std::string>(), aj.at("t_s").get<double>(), aj.at("t_e").get<double>()});
      }
      ds.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw BadInput(std::string("load_dataset: videos.json: ") + e.what());
  }

  std::ifstream rec(fs::path(dir) / "records.jsonl", std::ios::binary);
  if (!rec) throw BadInput("load_dataset: cannot open records.jsonl in " + dir);
  std::string line;
  size_t line_no = 0;
  while (std::getline(rec, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw BadInput("load_dataset: records.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
    ds.records.push_back(record_from_json(j));
    ++line_no;
  }

  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw BadInput("load_dataset: cannot open manifest.json in " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("load_dataset: manifest.json: ") + e.what());
  }

  ds.record_ids.resize(ds.records.size());
  std::map<std::string, int> id_to_idx;
  auto parse_id = [&](const std::string& id) {
    const size_t hash = id.rfind('#');
    if (hash == std::string::npos) throw BadInput("load_dataset: malformed record id " + id);
    const int idx = std::stoi(id.substr(hash + 1));
    if (idx < 0 || idx >= static_cast<int>(ds.records.size()))
      throw BadInput("load_dataset: record id out of range: " + id);
    ds.record_ids[static_cast<size_t>(idx)] = id;
    ds.records[static_cast<size_t>(idx)].video_id = id.substr(0, hash);
    return idx;
  };
  try {
    for (const json& id : manifest.at("train")) ds.train_idx.push_back(parse_id(id.get<std::string>()));
    for (const json& id : manifest.at("val")) ds.val_idx.push_back(parse_id(id.get<std::string>()));
  } catch (const json::exception& e) {
    throw BadInput(std::string("load_dataset: manifest.json: ") + e.what());
  }

  std::ifstream ff(fs::path(dir) / "flags.json", std::ios::binary);
  if (ff) {
    json flags;
    try {
      ff >> flags;
      if (flags.contains("overlap")) {
        for (const json& id : flags["overlap"]) {
          const std::string s = id.get<std::string>();
          const size_t hash = s.rfind('#');
          if (hash == std::string::npos) continue;
          const int idx = std::stoi(s.substr(hash + 1));
          if (idx >= 0 && idx < static_cast<int>(ds.records.size()))
            ds.records[static_cast<size_t>(idx)].overlap = true;
        }
      }
    } catch (const json::exception&) {
      // flags are advisory; a malformed file does not invalidate the dataset
    }
  }
  return ds;
}

const VideoAnnotation& video_by_id(const Dataset& ds, const std::string& video_id) {
  for (const VideoAnnotation& v : ds.videos) {
    if (v.video_id == video_id) return v;
  }
  throw BadInput("dataset: unknown video id " + video_id);
}

}  // namespace scotrl
