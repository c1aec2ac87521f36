#pragma once

// Independent checker for generated question records. Re-derives the expected
// answer for every family straight from the raw annotation triplets with its
// own sorting, formatting, and label resolution, so it shares no helper code
// with the generator. verify_record returns "" when the record is sound and a
// description of the first violated property otherwise.

#include "scotrl/eventflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oracle {

using scotrl::ActionTriplet;
using scotrl::EventFlowRecord;
using scotrl::VideoAnnotation;

inline std::string secs_text(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.1f seconds", v);
  return b;
}

inline std::string span_text(double lo, double hi) {
  char b[96];
  std::snprintf(b, sizeof b, "from %.1fs to %.1fs", lo, hi);
  return b;
}

inline std::string ratio_text(double r) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", r);
  return b;
}

inline std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += xs[i];
  }
  return out;
}

// Chronological action indices ordered by (t_s, t_e, original index).
inline std::vector<int> chrono(const VideoAnnotation& v) {
  std::vector<int> idx(v.actions.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const ActionTriplet& x = v.actions[static_cast<size_t>(a)];
    const ActionTriplet& y = v.actions[static_cast<size_t>(b)];
    if (x.t_s != y.t_s) return x.t_s < y.t_s;
    if (x.t_e != y.t_e) return x.t_e < y.t_e;
    return a < b;
  });
  return idx;
}

// Index of the action with this label, provided the label is unambiguous.
inline std::optional<int> resolve(const VideoAnnotation& v, const std::string& lbl) {
  int found = -1;
  for (size_t i = 0; i < v.actions.size(); ++i) {
    if (v.actions[i].action == lbl) {
      if (found >= 0) return std::nullopt;
      found = static_cast<int>(i);
    }
  }
  if (found < 0) return std::nullopt;
  return found;
}

inline std::optional<std::string> unquote(const std::string& s) {
  if (s.size() < 3 || s.front() != '\'' || s.back() != '\'') return std::nullopt;
  return s.substr(1, s.size() - 2);
}

inline int placeholder_count(const std::string& s) {
  int n = 0;
  for (size_t p = s.find("{}"); p != std::string::npos; p = s.find("{}", p + 2)) ++n;
  return n;
}

struct FamilySpec {
  std::string category;
  std::string tag;
  std::string canonical;
  int n_choices;
  int n_args;
};

// Expected surface form per type slug, written down independently of the
// generator's table.
inline const std::map<std::string, FamilySpec>& family_specs() {
  static const std::map<std::string, FamilySpec> specs = {
      {"temporal_neighbor",
       {"Action Order Reasoning", "action level",
        "What action happened immediately before {} in the video?", 4, 1}},
      {"temporal_causality",
       {"Temporal Causality", "action level",
        "What was the most recent action completed before {} began?", 4, 1}},
      {"action_anticipation",
       {"Action Anticipation", "action level",
        "What action happened immediately after {} in the video?", 4, 1}},
      {"sequential_prediction",
       {"Sequential Prediction", "action level",
        "After {}, predict the next {} actions in order.", 4, 2}},
      {"duration_estimation",
       {"Duration Estimation", "action level",
        "How long does the action {} take in the video?", 4, 1}},
      {"temporal_localization",
       {"Temporal Localization", "action level",
        "When does the action {} occur in the video?", 4, 1}},
      {"temporal_narration",
       {"Temporal QA from Narration", "action level",
        "At time ratio {} of the video, what action is taking place?", 4, 1}},
      {"temporal_gap",
       {"Temporal Gap Estimation", "video level",
        "How much time passes between the end of {} and the start of {}?", 4, 2}},
      {"temporal_yesno",
       {"Temporal Yes/No", "video level", "Did {} finish before {} started in the video?", 2, 2}},
      {"temporal_comparison",
       {"Temporal Comparison", "video level",
        "Which of the following actions occurred first in the video?", 4, 0}},
      {"duration_comparison",
       {"Duration Comparison", "video level",
        "Which of the following actions took the longest time?", 4, 0}},
      {"in_between",
       {"In-between Action", "video level", "Which actions occurred between {} and {}?", 4, 2}},
      {"transcription",
       {"Transcription", "video level",
        "Which option correctly lists the actions of the video in order?", 4, 0}},
      {"temporal_extreme",
       {"Action Order Reasoning (Extreme)", "video level",
        "Which action happened first in the video?", 4, 0}},
      {"order_sorting",
       {"Action Order Sorting", "video level",
        "Arrange the actions {}, {}, {} in the order they occur.", 4, 3}},
  };
  return specs;
}

namespace detail {

inline std::string err(const std::string& what) { return what; }

inline double t_s(const VideoAnnotation& v, int i) { return v.actions[static_cast<size_t>(i)].t_s; }
inline double t_e(const VideoAnnotation& v, int i) { return v.actions[static_cast<size_t>(i)].t_e; }
inline const std::string& lbl(const VideoAnnotation& v, int i) {
  return v.actions[static_cast<size_t>(i)].action;
}

inline int pos_in(const std::vector<int>& order, int idx) {
  for (size_t p = 0; p < order.size(); ++p) {
    if (order[p] == idx) return static_cast<int>(p);
  }
  return -1;
}

// Splits a ", "-joined sequence and checks it is a permutation of want.
// Only meaningful when no label contains a comma; callers guard.
inline bool is_permutation_of(const std::string& joined, std::vector<std::string> want) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t p = joined.find(", ", start);
    if (p == std::string::npos) {
      parts.push_back(joined.substr(start));
      break;
    }
    parts.push_back(joined.substr(start, p - start));
    start = p + 2;
  }
  std::sort(parts.begin(), parts.end());
  std::sort(want.begin(), want.end());
  return parts == want;
}

inline bool any_label_has_comma(const VideoAnnotation& v) {
  for (const ActionTriplet& a : v.actions) {
    if (a.action.find(',') != std::string::npos) return true;
  }
  return false;
}

}  // namespace detail

// Full semantic check of one record against its source annotation.
inline std::string verify_record(const EventFlowRecord& r, const VideoAnnotation& v) {
  using namespace detail;

  const auto spec_it = family_specs().find(r.type);
  if (spec_it == family_specs().end()) return err("unknown type slug: " + r.type);
  const FamilySpec& spec = spec_it->second;

  if (r.category != spec.category) return err(r.type + ": category mismatch: " + r.category);
  if (r.tag != spec.tag) return err(r.type + ": tag mismatch: " + r.tag);
  if (r.template_str != spec.canonical) return err(r.type + ": template mismatch: " + r.template_str);
  if (r.template_type != "MCQ") return err(r.type + ": template_type must be MCQ");
  if (r.answer_type != "choice") return err(r.type + ": answer_type must be choice");
  if (r.new_template.empty()) return err(r.type + ": empty new_template");
  if (placeholder_count(r.template_str) != spec.n_args)
    return err(r.type + ": canonical placeholder count != arg count");
  if (placeholder_count(r.new_template) != spec.n_args)
    return err(r.type + ": paraphrase placeholder count != arg count");
  if (static_cast<int>(r.question_args.size()) != spec.n_args)
    return err(r.type + ": expected " + std::to_string(spec.n_args) + " args, got " +
               std::to_string(r.question_args.size()));

  if (static_cast<int>(r.choice_texts.size()) != spec.n_choices)
    return err(r.type + ": expected " + std::to_string(spec.n_choices) + " choices");
  std::set<std::string> uniq;
  for (const std::string& c : r.choice_texts) {
    if (c.empty()) return err(r.type + ": empty choice text");
    if (!uniq.insert(c).second) return err(r.type + ": duplicate choice: " + c);
  }
  if (r.correct_choice < 0 || r.correct_choice >= static_cast<int>(r.choice_texts.size()))
    return err(r.type + ": correct_choice out of range");
  if (r.answer_text != r.choice_texts[static_cast<size_t>(r.correct_choice)])
    return err(r.type + ": answer_text does not match the marked choice");

  const int n = static_cast<int>(v.actions.size());
  if (n == 0) return err("annotation has no actions");
  const std::vector<int> ord = chrono(v);
  if (r.interval_lo != t_s(v, ord.front()) || r.interval_hi != t_e(v, ord.back()))
    return err(r.type + ": video_interval is not the observed action span");
  if (r.act_idx < 0 || r.act_idx >= n) return err(r.type + ": act_idx out of range");

  // Resolves a quoted question arg to a unique action index.
  auto arg_action = [&](size_t k) -> std::optional<int> {
    const auto inner = unquote(r.question_args[k]);
    if (!inner) return std::nullopt;
    return resolve(v, *inner);
  };

  const std::string& answer = r.answer_text;
  const bool commas = any_label_has_comma(v);

  if (r.type == "temporal_neighbor" || r.type == "action_anticipation") {
    const auto target = arg_action(0);
    if (!target) return err(r.type + ": question arg is not a unique quoted label");
    if (r.act_idx != *target) return err(r.type + ": act_idx is not the target action");
    const int p = pos_in(ord, *target);
    const bool fwd = r.type == "action_anticipation";
    const int np = fwd ? p + 1 : p - 1;
    if (np < 0 || np >= n) return err(r.type + ": target has no such neighbor");
    const std::string expect = lbl(v, ord[static_cast<size_t>(np)]);
    if (answer != expect) return err(r.type + ": answer should be '" + expect + "'");
    if (!resolve(v, expect)) return err(r.type + ": answer label is ambiguous");
    for (const std::string& c : r.choice_texts) {
      if (!resolve(v, c)) return err(r.type + ": choice is not a unique video label: " + c);
    }
  } else if (r.type == "temporal_causality") {
    const auto target = arg_action(0);
    if (!target) return err("temporal_causality: question arg is not a unique quoted label");
    if (r.act_idx != *target) return err("temporal_causality: act_idx is not the target action");
    const double start = t_s(v, *target);
    int best = -1;
    int at_max = 0;
    for (int i = 0; i < n; ++i) {
      if (i == *target || t_e(v, i) > start) continue;
      if (best < 0 || t_e(v, i) > t_e(v, best)) {
        best = i;
        at_max = 1;
      } else if (t_e(v, i) == t_e(v, best)) {
        ++at_max;
      }
    }
    if (best < 0) return err("temporal_causality: no action completes before the target starts");
    if (at_max != 1) return err("temporal_causality: latest completion is tied");
    if (answer != lbl(v, best))
      return err("temporal_causality: answer should be '" + lbl(v, best) + "'");
    if (!resolve(v, lbl(v, best))) return err("temporal_causality: answer label is ambiguous");
    for (const std::string& c : r.choice_texts) {
      if (!resolve(v, c)) return err("temporal_causality: choice is not a unique video label: " + c);
    }
  } else if (r.type == "sequential_prediction") {
    if (r.question_args[1] != "2") return err("sequential_prediction: second arg must be \"2\"");
    const auto target = arg_action(0);
    if (!target) return err("sequential_prediction: question arg is not a unique quoted label");
    if (r.act_idx != *target) return err("sequential_prediction: act_idx is not the target action");
    const int p = pos_in(ord, *target);
    if (p + 2 >= n) return err("sequential_prediction: fewer than two successors");
    const std::string a = lbl(v, ord[static_cast<size_t>(p + 1)]);
    const std::string b = lbl(v, ord[static_cast<size_t>(p + 2)]);
    if (!resolve(v, a) || !resolve(v, b))
      return err("sequential_prediction: successor label is ambiguous");
    const std::string expect = a + ", " + b;
    if (answer != expect) return err("sequential_prediction: answer should be '" + expect + "'");
  } else if (r.type == "duration_estimation") {
    const auto target = arg_action(0);
    if (!target) return err("duration_estimation: question arg is not a unique quoted label");
    if (r.act_idx != *target) return err("duration_estimation: act_idx is not the target action");
    const double dur = t_e(v, *target) - t_s(v, *target);
    if (dur < 0.3) return err("duration_estimation: target shorter than 0.3s");
    if (answer != secs_text(dur))
      return err("duration_estimation: answer should be '" + secs_text(dur) + "'");
    for (const std::string& c : r.choice_texts) {
      if (c == answer) continue;
      bool onladder = false;
      for (double m : {1.2, 0.8, 1.5, 0.5, 2.0, 3.0, 0.25}) {
        if (c == secs_text(dur * m)) onladder = true;
      }
      if (!onladder) return err("duration_estimation: distractor off the perturbation ladder: " + c);
    }
  } else if (r.type == "temporal_localization") {
    const auto target = arg_action(0);
    if (!target) return err("temporal_localization: question arg is not a unique quoted label");
    if (r.act_idx != *target) return err("temporal_localization: act_idx is not the target action");
    const double lo = t_s(v, *target);
    const double hi = t_e(v, *target);
    if (answer != span_text(lo, hi))
      return err("temporal_localization: answer should be '" + span_text(lo, hi) + "'");
    std::set<std::string> legal;
    for (int i = 0; i < n; ++i) {
      if (i != *target) legal.insert(span_text(t_s(v, i), t_e(v, i)));
    }
    const double len = hi - lo;
    for (double shift : {0.3, 0.6, 0.9}) {
      legal.insert(span_text(lo + shift * (len + 1.0), hi + shift * (len + 1.0)));
    }
    for (const std::string& c : r.choice_texts) {
      if (c != answer && !legal.count(c))
        return err("temporal_localization: distractor is not a plausible interval: " + c);
    }
  } else if (r.type == "temporal_narration") {
    double rv = 0.0;
    try {
      rv = std::stod(r.question_args[0]);
    } catch (...) {
      return err("temporal_narration: question arg is not a number");
    }
    if (ratio_text(rv) != r.question_args[0])
      return err("temporal_narration: ratio arg is not in %.2f form");
    if (rv < 0.0 || rv > 1.0) return err("temporal_narration: ratio outside [0, 1]");
    const double t = rv * v.duration;
    int containing = -1;
    for (int i : ord) {
      if (t_s(v, i) <= t && t <= t_e(v, i)) {
        containing = i;
        break;
      }
    }
    if (containing < 0) return err("temporal_narration: no action contains the asked timestamp");
    if (answer != lbl(v, containing))
      return err("temporal_narration: answer should be '" + lbl(v, containing) + "'");
    if (r.act_idx != containing) return err("temporal_narration: act_idx is not the target action");
    for (const std::string& c : r.choice_texts) {
      if (!resolve(v, c)) return err("temporal_narration: choice is not a unique video label: " + c);
    }
  } else if (r.type == "temporal_gap") {
    const auto a = arg_action(0);
    const auto b = arg_action(1);
    if (!a || !b) return err("temporal_gap: question args are not unique quoted labels");
    if (r.act_idx != *a) return err("temporal_gap: act_idx is not the first action");
    const double gap = t_s(v, *b) - t_e(v, *a);
    if (gap < 0.3) return err("temporal_gap: gap smaller than 0.3s");
    if (answer != secs_text(gap)) return err("temporal_gap: answer should be '" + secs_text(gap) + "'");
    for (const std::string& c : r.choice_texts) {
      if (c == answer) continue;
      bool onladder = false;
      for (double m : {1.2, 0.8, 1.5, 0.5, 2.0, 3.0, 0.25}) {
        if (c == secs_text(gap * m)) onladder = true;
      }
      if (!onladder) return err("temporal_gap: distractor off the perturbation ladder: " + c);
    }
  } else if (r.type == "temporal_yesno") {
    if (r.choice_texts != std::vector<std::string>{"Yes", "No"})
      return err("temporal_yesno: choices must be exactly Yes, No");
    const auto a = arg_action(0);
    const auto b = arg_action(1);
    if (!a || !b) return err("temporal_yesno: question args are not unique quoted labels");
    if (*a == *b) return err("temporal_yesno: question compares an action with itself");
    if (r.act_idx != *a) return err("temporal_yesno: act_idx is not the first action");
    const std::string expect = t_e(v, *a) < t_s(v, *b) ? "Yes" : "No";
    if (answer != expect) return err("temporal_yesno: answer should be " + expect);
  } else if (r.type == "temporal_comparison") {
    int best = -1;
    for (const std::string& c : r.choice_texts) {
      const auto i = resolve(v, c);
      if (!i) return err("temporal_comparison: choice is not a unique video label: " + c);
      if (best < 0) {
        best = *i;
        continue;
      }
      const bool earlier = t_s(v, *i) != t_s(v, best) ? t_s(v, *i) < t_s(v, best)
                           : t_e(v, *i) != t_e(v, best) ? t_e(v, *i) < t_e(v, best)
                                                        : *i < best;
      if (earlier) best = *i;
    }
    if (answer != lbl(v, best))
      return err("temporal_comparison: answer should be '" + lbl(v, best) + "'");
    if (r.act_idx != best) return err("temporal_comparison: act_idx is not the earliest action");
  } else if (r.type == "duration_comparison") {
    int best = -1;
    for (const std::string& c : r.choice_texts) {
      const auto i = resolve(v, c);
      if (!i) return err("duration_comparison: choice is not a unique video label: " + c);
      if (best < 0 || t_e(v, *i) - t_s(v, *i) > t_e(v, best) - t_s(v, best)) best = *i;
    }
    const double dbest = t_e(v, best) - t_s(v, best);
    for (const std::string& c : r.choice_texts) {
      const int i = *resolve(v, c);
      if (i != best && dbest - (t_e(v, i) - t_s(v, i)) < 0.05)
        return err("duration_comparison: margin below 0.05s for choice: " + c);
    }
    if (answer != lbl(v, best))
      return err("duration_comparison: answer should be '" + lbl(v, best) + "'");
    if (r.act_idx != best) return err("duration_comparison: act_idx is not the longest action");
  } else if (r.type == "in_between") {
    const auto a = arg_action(0);
    const auto b = arg_action(1);
    if (!a || !b) return err("in_between: question args are not unique quoted labels");
    if (r.act_idx != *a) return err("in_between: act_idx is not the opening action");
    const int p = pos_in(ord, *a);
    const int q = pos_in(ord, *b);
    if (q - p < 2 || q - p > 4) return err("in_between: endpoints not 2..4 positions apart");
    std::vector<std::string> between;
    for (int k = p + 1; k < q; ++k) {
      const int i = ord[static_cast<size_t>(k)];
      if (!resolve(v, lbl(v, i))) return err("in_between: between label is ambiguous");
      between.push_back(lbl(v, i));
    }
    if (between.empty()) return err("in_between: nothing between the endpoints");
    const std::string expect = join(between);
    if (answer != expect) return err("in_between: answer should be '" + expect + "'");
  } else if (r.type == "transcription") {
    if (n < 3 || n > 7) return err("transcription: video must have 3..7 actions");
    std::vector<std::string> labels;
    for (int i : ord) {
      if (!resolve(v, lbl(v, i))) return err("transcription: duplicated label in video");
      labels.push_back(lbl(v, i));
    }
    const std::string expect = join(labels);
    if (answer != expect) return err("transcription: answer should be '" + expect + "'");
    if (r.act_idx != 0) return err("transcription: act_idx must be 0");
    if (!commas) {
      for (const std::string& c : r.choice_texts) {
        if (!is_permutation_of(c, labels))
          return err("transcription: choice is not an ordering of the video's actions: " + c);
      }
    }
  } else if (r.type == "temporal_extreme") {
    const int first = ord.front();
    if (!resolve(v, lbl(v, first))) return err("temporal_extreme: earliest label is ambiguous");
    if (answer != lbl(v, first))
      return err("temporal_extreme: answer should be '" + lbl(v, first) + "'");
    if (r.act_idx != first) return err("temporal_extreme: act_idx is not the earliest action");
    for (const std::string& c : r.choice_texts) {
      if (!resolve(v, c)) return err("temporal_extreme: choice is not a unique video label: " + c);
    }
  } else if (r.type == "order_sorting") {
    std::vector<int> named;
    std::vector<std::string> named_labels;
    for (size_t k = 0; k < 3; ++k) {
      const auto i = arg_action(k);
      if (!i) return err("order_sorting: question arg is not a unique quoted label");
      named.push_back(*i);
      named_labels.push_back(lbl(v, *i));
    }
    if (std::set<int>(named.begin(), named.end()).size() != 3)
      return err("order_sorting: question names a repeated action");
    if (r.act_idx != named[0]) return err("order_sorting: act_idx is not the first named action");
    std::vector<int> sorted = named;
    std::sort(sorted.begin(), sorted.end(), [&](int x, int y) {
      if (t_s(v, x) != t_s(v, y)) return t_s(v, x) < t_s(v, y);
      if (t_e(v, x) != t_e(v, y)) return t_e(v, x) < t_e(v, y);
      return x < y;
    });
    std::vector<std::string> want;
    for (int i : sorted) want.push_back(lbl(v, i));
    const std::string expect = join(want);
    if (answer != expect) return err("order_sorting: answer should be '" + expect + "'");
    if (!commas) {
      for (const std::string& c : r.choice_texts) {
        if (!is_permutation_of(c, named_labels))
          return err("order_sorting: choice is not an ordering of the named actions: " + c);
      }
    }
  } else {
    return err("unhandled type slug: " + r.type);
  }

  return "";
}

// Shape check of the serialized record against the published line format:
// exactly these 13 keys with these types, plus internal consistency between
// the rendered choices block, the answer letter, and the struct.
inline std::string verify_serialized(const nlohmann::json& j, const EventFlowRecord& r) {
  using detail::err;
  if (!j.is_object()) return err("record json must be an object");

  static const std::vector<std::string> keys = {
      "act_idx",      "answer_text",   "answer_type", "category", "choices",
      "final_answer", "new_template",  "question_args", "tag",    "template",
      "template_type", "type",         "video_interval"};
  if (j.size() != keys.size()) return err("record json must have exactly 13 keys");
  for (const std::string& k : keys) {
    if (!j.contains(k)) return err("record json missing key: " + k);
  }

  for (const char* k :
       {"answer_text", "answer_type", "category", "choices", "final_answer", "new_template", "tag",
        "template", "template_type", "type"}) {
    if (!j.at(k).is_string()) return err("record json key must be a string: " + std::string(k));
  }
  if (!j.at("act_idx").is_number_integer()) return err("act_idx must be an integer");
  if (!j.at("question_args").is_array()) return err("question_args must be an array");
  for (const nlohmann::json& a : j.at("question_args")) {
    if (!a.is_string()) return err("question_args entries must be strings");
  }
  const nlohmann::json& vi = j.at("video_interval");
  if (!vi.is_array() || vi.size() != 2 || !vi[0].is_number() || !vi[1].is_number())
    return err("video_interval must be a numeric pair");
  if (vi[0].get<double>() > vi[1].get<double>()) return err("video_interval is reversed");

  if (j.at("template_type").get<std::string>() != "MCQ") return err("template_type must be MCQ");
  if (j.at("answer_type").get<std::string>() != "choice") return err("answer_type must be choice");
  const std::string tag = j.at("tag").get<std::string>();
  if (tag != "action level" && tag != "video level") return err("unknown tag: " + tag);

  // The choices block must render one "X. text" line per choice, lettered in
  // order, and final_answer must point at the marked choice.
  std::ostringstream want;
  for (size_t i = 0; i < r.choice_texts.size(); ++i) {
    if (i) want << '\n';
    want << static_cast<char>('A' + i) << ". " << r.choice_texts[i];
  }
  if (j.at("choices").get<std::string>() != want.str())
    return err("choices block does not match the lettered rendering");
  const std::string fa = j.at("final_answer").get<std::string>();
  if (fa.size() != 1 || fa[0] != static_cast<char>('A' + r.correct_choice))
    return err("final_answer letter does not match the marked choice");
  if (j.at("answer_text").get<std::string>() != r.answer_text) return err("answer_text mismatch");
  if (j.at("act_idx").get<int>() != r.act_idx) return err("act_idx mismatch");
  if (vi[0].get<double>() != r.interval_lo || vi[1].get<double>() != r.interval_hi)
    return err("video_interval mismatch");
  return "";
}

}  // namespace oracle
