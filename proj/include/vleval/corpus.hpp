#pragma once

// Ground-truth datasets, model prediction files and human score files, and
// the join that turns them into evaluation pairs.
//
// All text fields are stored verbatim. Normalisation belongs to consumers.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace vleval {

enum class DatasetKind { kQa, kCaption, kAction, kLabels };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> parse_dataset_kind(std::string_view name);

struct QaItem {
  std::string item_id;
  std::string video_id;
  std::string question;
  std::string answer;

  bool operator==(const QaItem&) const = default;
};

struct CaptionItem {
  std::string item_id;
  std::string video_id;
  std::vector<std::string> references;  // at least one, none empty

  bool operator==(const CaptionItem&) const = default;
};

struct ActionItem {
  std::string item_id;
  std::string video_id;
  std::string label;

  bool operator==(const ActionItem&) const = default;
};

// Closed set of action classes. Label order defines class indices.
struct LabelSet {
  std::string dataset_id;
  std::vector<std::string> labels;

  std::optional<size_t> index_of(std::string_view label) const;
  bool operator==(const LabelSet&) const = default;
};

struct PredictionRecord {
  std::string model_id;
  std::string dataset_id;
  std::string item_id;
  std::string response;  // may be empty; empty responses are scored, not dropped

  bool operator==(const PredictionRecord&) const = default;
};

struct PredictionWarnings {
  size_t empty = 0;
};

struct PredictionSet {
  std::vector<PredictionRecord> records;
  PredictionWarnings warnings;
};

enum class HumanMetric { kCorrectness, kMatch, kPrecision, kCoverage };

std::string_view to_string(HumanMetric metric);
std::optional<HumanMetric> parse_human_metric(std::string_view name);

struct HumanScoreRecord {
  std::string item_id;
  HumanMetric metric = HumanMetric::kCorrectness;
  int human_value = 0;  // 0/1 for correctness, 1..5 otherwise

  bool operator==(const HumanScoreRecord&) const = default;
};

template <typename Item>
struct Dataset {
  std::string dataset_id;
  std::vector<Item> items;
};

// Loaders. Each raises InputError with "<path>:<line>" context on malformed
// records, missing fields, or violated invariants.
std::vector<QaItem> load_qa_items(const std::filesystem::path& path);
std::vector<CaptionItem> load_caption_items(const std::filesystem::path& path);
std::vector<ActionItem> load_action_items(const std::filesystem::path& path,
                                          const LabelSet& labels);
LabelSet load_label_set(const std::filesystem::path& path);
PredictionSet load_predictions(const std::filesystem::path& path);
std::vector<HumanScoreRecord> load_human_scores(const std::filesystem::path& path);

using LoadedDataset =
    std::variant<std::vector<QaItem>, std::vector<CaptionItem>, std::vector<ActionItem>, LabelSet>;

// Kind-dispatching loader. `labels` is required for kAction.
LoadedDataset load_dataset(const std::filesystem::path& path, DatasetKind kind,
                           const LabelSet* labels = nullptr);

nlohmann::ordered_json to_json(const QaItem& item);
nlohmann::ordered_json to_json(const CaptionItem& item);
nlohmann::ordered_json to_json(const ActionItem& item);
nlohmann::ordered_json to_json(const LabelSet& labels);
nlohmann::ordered_json to_json(const PredictionRecord& record);
nlohmann::ordered_json to_json(const HumanScoreRecord& record);

template <typename Record>
std::string to_jsonl(std::span<const Record> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

// Predictions of one model on one dataset, in file order.
std::vector<PredictionRecord> select_predictions(std::span<const PredictionRecord> records,
                                                 std::string_view model_id,
                                                 std::string_view dataset_id);

// Sorted distinct model ids that have predictions for `dataset_id`.
std::vector<std::string> models_for_dataset(std::span<const PredictionRecord> records,
                                            std::string_view dataset_id);

enum class JoinPolicy { kStrict, kIntersect };

std::string_view to_string(JoinPolicy policy);
std::optional<JoinPolicy> parse_join_policy(std::string_view name);

template <typename Item>
struct EvalPair {
  Item ground_truth;
  PredictionRecord prediction;
};

using QaPair = EvalPair<QaItem>;
using CaptionPair = EvalPair<CaptionItem>;
using ActionPair = EvalPair<ActionItem>;

struct JoinSummary {
  size_t matched = 0;
  std::vector<std::string> missing_ids;  // ground truth without prediction, GT order
  std::vector<std::string> extra_ids;    // predictions without ground truth, file order
};

template <typename Item>
struct JoinResult {
  std::vector<EvalPair<Item>> pairs;
  JoinSummary summary;
};

namespace detail {

struct JoinPlan {
  std::vector<std::pair<size_t, size_t>> matches;  // (gt index, prediction index)
  JoinSummary summary;
};

JoinPlan plan_join(std::string_view dataset_id, std::span<const std::string_view> gt_ids,
                   std::span<const PredictionRecord> predictions, JoinPolicy policy);

}  // namespace detail

// Pairs ground truth with predictions by item_id. Predictions must all belong
// to `ground_truth.dataset_id` and to a single model. Output follows
// ground-truth order. Strict policy raises InputError listing every missing id.
template <typename Item>
JoinResult<Item> join(const Dataset<Item>& ground_truth,
                      std::span<const PredictionRecord> predictions, JoinPolicy policy) {
  std::vector<std::string_view> ids;
  ids.reserve(ground_truth.items.size());
  for (const auto& item : ground_truth.items) ids.push_back(item.item_id);
  auto plan = detail::plan_join(ground_truth.dataset_id, ids, predictions, policy);
  JoinResult<Item> result;
  result.pairs.reserve(plan.matches.size());
  for (auto [gt, pred] : plan.matches) {
    result.pairs.push_back({ground_truth.items[gt], predictions[pred]});
  }
  result.summary = std::move(plan.summary);
  return result;
}

}  // namespace vleval
