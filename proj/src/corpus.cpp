#include "vleval/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "vleval/errors.hpp"
#include "vleval/jsonl.hpp"

namespace vleval {

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string at(const std::filesystem::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line);
}

// Tracks first occurrence of each id so duplicates can name both lines.
class UniqueIds {
 public:
  void add(const std::string& id, size_t line, const std::filesystem::path& path,
           std::string_view what) {
    auto [it, inserted] = first_line_.emplace(id, line);
    if (!inserted) {
      throw InputError(path.string() + ": duplicate " + std::string(what) + " \"" + id +
                       "\" on lines " + std::to_string(it->second) + " and " +
                       std::to_string(line));
    }
  }

 private:
  std::unordered_map<std::string, size_t> first_line_;
};

void require_non_blank(const std::string& value, std::string_view field,
                       const std::filesystem::path& path, size_t line) {
  if (blank(value)) {
    throw InputError(at(path, line) + ": field \"" + std::string(field) + "\" must not be empty");
  }
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kQa: return "qa";
    case DatasetKind::kCaption: return "caption";
    case DatasetKind::kAction: return "action";
    case DatasetKind::kLabels: return "labels";
  }
  return "?";
}

std::optional<DatasetKind> parse_dataset_kind(std::string_view name) {
  if (name == "qa") return DatasetKind::kQa;
  if (name == "caption") return DatasetKind::kCaption;
  if (name == "action") return DatasetKind::kAction;
  if (name == "labels") return DatasetKind::kLabels;
  return std::nullopt;
}

std::string_view to_string(HumanMetric metric) {
  switch (metric) {
    case HumanMetric::kCorrectness: return "correctness";
    case HumanMetric::kMatch: return "match";
    case HumanMetric::kPrecision: return "precision";
    case HumanMetric::kCoverage: return "coverage";
  }
  return "?";
}

std::optional<HumanMetric> parse_human_metric(std::string_view name) {
  if (name == "correctness") return HumanMetric::kCorrectness;
  if (name == "match") return HumanMetric::kMatch;
  if (name == "precision") return HumanMetric::kPrecision;
  if (name == "coverage") return HumanMetric::kCoverage;
  return std::nullopt;
}

std::string_view to_string(JoinPolicy policy) {
  return policy == JoinPolicy::kStrict ? "strict" : "intersect";
}

std::optional<JoinPolicy> parse_join_policy(std::string_view name) {
  if (name == "strict") return JoinPolicy::kStrict;
  if (name == "intersect") return JoinPolicy::kIntersect;
  return std::nullopt;
}

std::optional<size_t> LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<size_t>(it - labels.begin());
}

std::vector<QaItem> load_qa_items(const std::filesystem::path& path) {
  const auto src = path.string();
  std::vector<QaItem> items;
  UniqueIds ids;
  for (const auto& line : read_jsonl(path)) {
    QaItem item{require_string(line, "item_id", src), require_string(line, "video_id", src),
                require_string(line, "question", src), require_string(line, "answer", src)};
    require_non_blank(item.item_id, "item_id", path, line.line_number);
    require_non_blank(item.question, "question", path, line.line_number);
    require_non_blank(item.answer, "answer", path, line.line_number);
    ids.add(item.item_id, line.line_number, path, "item_id");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<CaptionItem> load_caption_items(const std::filesystem::path& path) {
  const auto src = path.string();
  std::vector<CaptionItem> items;
  UniqueIds ids;
  for (const auto& line : read_jsonl(path)) {
    CaptionItem item{require_string(line, "item_id", src), require_string(line, "video_id", src),
                     require_string_list(line, "references", src)};
    require_non_blank(item.item_id, "item_id", path, line.line_number);
    if (item.references.empty()) {
      throw InputError(at(path, line.line_number) + ": \"references\" must hold at least one caption");
    }
    for (const auto& ref : item.references) {
      require_non_blank(ref, "references", path, line.line_number);
    }
    ids.add(item.item_id, line.line_number, path, "item_id");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ActionItem> load_action_items(const std::filesystem::path& path,
                                          const LabelSet& labels) {
  const auto src = path.string();
  std::vector<ActionItem> items;
  UniqueIds ids;
  std::string unknown;
  for (const auto& line : read_jsonl(path)) {
    ActionItem item{require_string(line, "item_id", src), require_string(line, "video_id", src),
                    require_string(line, "label", src)};
    require_non_blank(item.item_id, "item_id", path, line.line_number);
    ids.add(item.item_id, line.line_number, path, "item_id");
    if (!labels.index_of(item.label)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += item.item_id + " (label \"" + item.label + "\")";
    }
    items.push_back(std::move(item));
  }
  if (!unknown.empty()) {
    throw InputError(src + ": labels outside the label set of \"" + labels.dataset_id +
                     "\": " + unknown);
  }
  return items;
}

LabelSet load_label_set(const std::filesystem::path& path) {
  const auto src = path.string();
  auto lines = read_jsonl(path);
  if (lines.size() != 1) {
    throw InputError(src + ": a label file holds exactly one record, found " +
                     std::to_string(lines.size()));
  }
  LabelSet set{require_string(lines[0], "dataset_id", src),
               require_string_list(lines[0], "labels", src)};
  if (set.labels.empty()) throw InputError(at(path, lines[0].line_number) + ": empty label list");
  std::set<std::string_view> seen;
  for (const auto& label : set.labels) {
    require_non_blank(label, "labels", path, lines[0].line_number);
    if (!seen.insert(label).second) {
      throw InputError(at(path, lines[0].line_number) + ": duplicate label \"" + label + "\"");
    }
  }
  return set;
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  const auto src = path.string();
  PredictionSet out;
  std::map<std::tuple<std::string, std::string, std::string>, size_t> first_line;
  for (const auto& line : read_jsonl(path)) {
    PredictionRecord rec{require_string(line, "model_id", src),
                         require_string(line, "dataset_id", src),
                         require_string(line, "item_id", src), require_string(line, "response", src)};
    require_non_blank(rec.model_id, "model_id", path, line.line_number);
    require_non_blank(rec.dataset_id, "dataset_id", path, line.line_number);
    require_non_blank(rec.item_id, "item_id", path, line.line_number);
    auto [it, inserted] =
        first_line.emplace(std::make_tuple(rec.model_id, rec.dataset_id, rec.item_id), line.line_number);
    if (!inserted) {
      throw InputError(src + ": duplicate prediction (" + rec.model_id + ", " + rec.dataset_id +
                       ", " + rec.item_id + ") on lines " + std::to_string(it->second) + " and " +
                       std::to_string(line.line_number));
    }
    if (blank(rec.response)) ++out.warnings.empty;
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<HumanScoreRecord> load_human_scores(const std::filesystem::path& path) {
  const auto src = path.string();
  std::vector<HumanScoreRecord> out;
  for (const auto& line : read_jsonl(path)) {
    auto item_id = require_string(line, "item_id", src);
    auto metric_name = require_string(line, "metric", src);
    auto value = require_integer(line, "human_value", src);
    auto metric = parse_human_metric(metric_name);
    if (!metric) {
      throw InputError(at(path, line.line_number) + ": unknown metric \"" + metric_name + "\"");
    }
    const bool binary = *metric == HumanMetric::kCorrectness;
    const long long lo = binary ? 0 : 1;
    const long long hi = binary ? 1 : 5;
    if (value < lo || value > hi) {
      throw InputError(at(path, line.line_number) + ": human_value " + std::to_string(value) +
                       " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "] for " +
                       metric_name);
    }
    out.push_back({std::move(item_id), *metric, static_cast<int>(value)});
  }
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, DatasetKind kind,
                           const LabelSet* labels) {
  switch (kind) {
    case DatasetKind::kQa: return load_qa_items(path);
    case DatasetKind::kCaption: return load_caption_items(path);
    case DatasetKind::kAction:
      if (labels == nullptr) throw InputError(path.string() + ": action datasets need a label set");
      return load_action_items(path, *labels);
    case DatasetKind::kLabels: return load_label_set(path);
  }
  throw InputError("unknown dataset kind");
}

nlohmann::ordered_json to_json(const QaItem& item) {
  return {{"item_id", item.item_id},
          {"video_id", item.video_id},
          {"question", item.question},
          {"answer", item.answer}};
}

nlohmann::ordered_json to_json(const CaptionItem& item) {
  return {{"item_id", item.item_id}, {"video_id", item.video_id}, {"references", item.references}};
}

nlohmann::ordered_json to_json(const ActionItem& item) {
  return {{"item_id", item.item_id}, {"video_id", item.video_id}, {"label", item.label}};
}

nlohmann::ordered_json to_json(const LabelSet& labels) {
  return {{"dataset_id", labels.dataset_id}, {"labels", labels.labels}};
}

nlohmann::ordered_json to_json(const PredictionRecord& record) {
  return {{"model_id", record.model_id},
          {"dataset_id", record.dataset_id},
          {"item_id", record.item_id},
          {"response", record.response}};
}

nlohmann::ordered_json to_json(const HumanScoreRecord& record) {
  return {{"item_id", record.item_id},
          {"metric", std::string(to_string(record.metric))},
          {"human_value", record.human_value}};
}

std::vector<PredictionRecord> select_predictions(std::span<const PredictionRecord> records,
                                                 std::string_view model_id,
                                                 std::string_view dataset_id) {
  std::vector<PredictionRecord> out;
  for (const auto& r : records) {
    if (r.model_id == model_id && r.dataset_id == dataset_id) out.push_back(r);
  }
  return out;
}

std::vector<std::string> models_for_dataset(std::span<const PredictionRecord> records,
                                            std::string_view dataset_id) {
  std::set<std::string> models;
  for (const auto& r : records) {
    if (r.dataset_id == dataset_id) models.insert(r.model_id);
  }
  return {models.begin(), models.end()};
}

namespace detail {

JoinPlan plan_join(std::string_view dataset_id, std::span<const std::string_view> gt_ids,
                   std::span<const PredictionRecord> predictions, JoinPolicy policy) {
  std::unordered_map<std::string_view, size_t> by_item;
  std::string_view model;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    if (p.dataset_id != dataset_id) {
      throw InputError("join: prediction for item \"" + p.item_id + "\" belongs to dataset \"" +
                       p.dataset_id + "\", expected \"" + std::string(dataset_id) + "\"");
    }
    if (i == 0) model = p.model_id;
    if (p.model_id != model) {
      throw InputError("join: predictions mix models \"" + std::string(model) + "\" and \"" +
                       p.model_id + "\"; select one model first");
    }
    if (!by_item.emplace(p.item_id, i).second) {
      throw InputError("join: duplicate prediction for item \"" + p.item_id + "\"");
    }
  }

  JoinPlan plan;
  std::unordered_map<std::string_view, bool> in_gt;
  for (size_t g = 0; g < gt_ids.size(); ++g) {
    in_gt[gt_ids[g]] = true;
    auto it = by_item.find(gt_ids[g]);
    if (it == by_item.end()) {
      plan.summary.missing_ids.emplace_back(gt_ids[g]);
    } else {
      plan.matches.emplace_back(g, it->second);
    }
  }
  for (const auto& p : predictions) {
    if (!in_gt.count(p.item_id)) plan.summary.extra_ids.push_back(p.item_id);
  }
  plan.summary.matched = plan.matches.size();

  if (policy == JoinPolicy::kStrict && !plan.summary.missing_ids.empty()) {
    std::string ids;
    for (const auto& id : plan.summary.missing_ids) {
      if (!ids.empty()) ids += ", ";
      ids += id;
    }
    throw InputError("join: " + std::to_string(plan.summary.missing_ids.size()) +
                     " ground-truth item(s) of \"" + std::string(dataset_id) +
                     "\" lack a prediction: " + ids);
  }
  return plan;
}

}  // namespace detail

}  // namespace vleval
