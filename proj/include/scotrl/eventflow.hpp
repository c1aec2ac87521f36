#pragma once

#include "scotrl/rng.hpp"
#include "scotrl/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scotrl {

struct ActionTriplet {
  std::string action;
  double t_s = 0.0;
  double t_e = 0.0;
};

struct VideoAnnotation {
  std::string video_id;
  double duration = 0.0;
  std::vector<ActionTriplet> actions;
};

enum class TemplateFamily {
  ActionOrderReasoning,
  TemporalCausality,
  ActionAnticipation,
  SequentialPrediction,
  DurationEstimation,
  TemporalLocalization,
  TemporalQaFromNarration,
  TemporalGapEstimation,
  TemporalYesNo,
  TemporalComparison,
  DurationComparison,
  InBetweenAction,
  Transcription,
  ActionOrderReasoningExtreme,
  ActionOrderSorting,
};

inline constexpr int kFamilyCount = 15;

struct FamilyInfo {
  TemplateFamily family;
  const char* category;  // human name, also the key used in --counts
  const char* tag;       // "action level" | "video level"
  const char* type;      // machine slug
  const char* canonical; // template with {} placeholders
  std::vector<const char*> paraphrases;
  int min_actions;       // skip videos with fewer usable actions
  int n_choices;         // 4, or 2 for yes/no
};

const std::vector<FamilyInfo>& all_families();
const FamilyInfo& family_info(TemplateFamily f);
std::optional<TemplateFamily> family_by_category(const std::string& category);

// One generated question. choice_texts/correct_choice are the structured
// form; serialization renders them into the flat schema (choices string,
// final_answer letter). video_id and overlap are generator-side metadata and
// are not part of the record schema.
struct EventFlowRecord {
  std::string tag;
  std::string type;
  std::string template_type = "MCQ";
  std::string answer_type = "choice";
  std::string category;
  std::string template_str;
  std::string new_template;
  std::vector<std::string> question_args;
  std::vector<std::string> choice_texts;
  int correct_choice = 0;
  std::string answer_text;
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  int act_idx = 0;

  std::string video_id;
  bool overlap = false;
};

std::string letter_for(int choice_idx);
std::string choices_string(const std::vector<std::string>& choice_texts);

nlohmann::json record_to_json(const EventFlowRecord& r);
EventFlowRecord record_from_json(const nlohmann::json& j);

// Chronological order of action indices by (t_s, t_e, annotation index).
std::vector<int> chronological_order(const VideoAnnotation& video);

// Indices of actions whose span intersects [lo, hi] (closed), in
// chronological order.
std::vector<int> actions_in_interval(const VideoAnnotation& video, double lo, double hi);

// Ground-truth summary for an interval: the intersecting action labels in
// chronological order.
std::vector<std::string> synthesize_gt_summary(const VideoAnnotation& video, double lo, double hi);

// Number formatting shared with the verification oracle.
std::string format_duration(double seconds);
std::string format_interval(double lo, double hi);
std::string format_ratio(double r);
std::string join_labels(const std::vector<std::string>& labels);

// Samples one question of the family from the video, or nullopt when the
// video lacks the material (too few actions, no valid pair, ...).
std::optional<EventFlowRecord> instantiate(const VideoAnnotation& video, TemplateFamily family,
                                           Rng& rng);

struct Dataset {
  std::vector<EventFlowRecord> records;
  std::vector<std::string> record_ids;  // "<video_id>#<line>", line = position in records
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  std::vector<VideoAnnotation> videos;
};

/// counts: records per family (category-name keys already resolved). Splits
// stratified per family. Throws BadInput when a requested family cannot be
// filled from the annotations.
Dataset generate_dataset(const std::vector<VideoAnnotation>& videos,
                         const std::map<TemplateFamily, int>& counts, std::uint64_t seed,
                         double val_fraction = 0.15);

std::vector<VideoAnnotation> load_annotations(const std::string& path);
void write_dataset(const Dataset& ds, const std::string& out_dir);
Dataset load_dataset(const std::string& dir);

const VideoAnnotation& video_by_id(const Dataset& ds, const std::string& video_id);

}  // namespace scotrl
