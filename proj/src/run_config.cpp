#include "vleval/run_config.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "vleval/jsonl.hpp"

namespace vleval {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kTopLevelKeys = {"output_dir", "cache_dir", "join_policy", "tasks",
                                                "datasets",   "predictions", "judge", "embedding",
                                                "retrieval",  "agreement", "ngram"};

size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Collects diagnostics while reading typed fields out of the JSON document.
class Reader {
 public:
  explicit Reader(fs::path base) : base_(std::move(base)) {}

  std::vector<Diagnostic> diagnostics;

  void error(std::string location, std::string message) {
    diagnostics.push_back({std::move(location), std::move(message)});
  }

  const nlohmann::json* field(const nlohmann::json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<std::string> string(const nlohmann::json& obj, const std::string& key,
                                    const std::string& loc, bool required) {
    const auto* v = field(obj, key);
    if (!v) {
      if (required) error(loc, "required string is missing");
      return std::nullopt;
    }
    if (!v->is_string()) {
      error(loc, "must be a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<long long> integer(const nlohmann::json& obj, const std::string& key,
                                   const std::string& loc, long long min_value) {
    const auto* v = field(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      error(loc, "must be an integer");
      return std::nullopt;
    }
    auto value = v->get<long long>();
    if (value < min_value) {
      error(loc, "must be >= " + std::to_string(min_value) + " (got " + std::to_string(value) + ")");
      return std::nullopt;
    }
    return value;
  }

  std::optional<double> number(const nlohmann::json& obj, const std::string& key, const std::string& loc) {
    const auto* v = field(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      error(loc, "must be a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<bool> boolean(const nlohmann::json& obj, const std::string& key, const std::string& loc) {
    const auto* v = field(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      error(loc, "must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  // Resolves against the config directory and checks existence.
  std::optional<fs::path> existing_path(const std::string& text, const std::string& loc) {
    fs::path p = resolve(text);
    std::error_code ec;
    if (!fs::exists(p, ec)) {
      error(loc, "file not found: " + p.string());
      return std::nullopt;
    }
    return p;
  }

  fs::path resolve(const std::string& text) const {
    fs::path p(text);
    return p.is_absolute() ? p : base_ / p;
  }

  void object_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                   const std::string& prefix) {
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
      std::string msg = "unknown field \"" + key + "\"";
      if (auto s = suggest_name(key, allowed)) msg += " (did you mean \"" + *s + "\"?)";
      error(prefix.empty() ? key : prefix + "." + key, msg);
    }
  }

 private:
  fs::path base_;
};

bool has_task(const RunConfig& c, TaskName t) {
  return std::find(c.tasks.begin(), c.tasks.end(), t) != c.tasks.end();
}

void read_judge(Reader& rd, const nlohmann::json& j, RunConfig& config) {
  if (!j.is_object()) {
    rd.error("judge", "must be an object");
    return;
  }
  rd.object_keys(j, {"provider", "endpoint", "model_name", "temperature", "max_attempts", "parallelism",
                     "api_key_env", "timeout_seconds", "retry_backoff_ms"},
                 "judge");
  auto& s = config.judge;
  if (auto v = rd.string(j, "provider", "judge.provider", false)) s.provider = *v;
  if (s.provider != "mock" && s.provider != "http") {
    rd.error("judge.provider", "must be \"mock\" or \"http\" (got \"" + s.provider + "\")");
  }
  const bool http = s.provider == "http";
  if (auto v = rd.string(j, "endpoint", "judge.endpoint", http)) s.config.provider_endpoint = *v;
  if (auto v = rd.string(j, "model_name", "judge.model_name", http)) s.config.model_name = *v;
  if (s.config.model_name.empty() && !http) s.config.model_name = "mock-judge";
  if (auto v = rd.number(j, "temperature", "judge.temperature")) {
    if (*v < 0) rd.error("judge.temperature", "must be >= 0");
    s.config.temperature = *v;
  }
  if (auto v = rd.integer(j, "max_attempts", "judge.max_attempts", 1)) s.config.max_attempts = static_cast<int>(*v);
  if (auto v = rd.integer(j, "parallelism", "judge.parallelism", 1)) s.config.parallelism = static_cast<int>(*v);
  if (auto v = rd.integer(j, "retry_backoff_ms", "judge.retry_backoff_ms", 0)) {
    s.config.retry_backoff_ms = static_cast<int>(*v);
  }
  if (auto v = rd.integer(j, "timeout_seconds", "judge.timeout_seconds", 1)) s.timeout_seconds = static_cast<int>(*v);
  if (auto v = rd.string(j, "api_key_env", "judge.api_key_env", false)) s.api_key_env = *v;
}

void read_embedding(Reader& rd, const nlohmann::json& j, RunConfig& config) {
  if (!j.is_object()) {
    rd.error("embedding", "must be an object");
    return;
  }
  rd.object_keys(j, {"provider", "vectors", "endpoint", "model_name", "api_key_env", "dim", "batch_size",
                     "parallelism", "max_attempts", "timeout_seconds", "retry_backoff_ms"},
                 "embedding");
  auto& s = config.embedding;
  if (auto v = rd.string(j, "provider", "embedding.provider", false)) s.provider = *v;
  if (s.provider == "file") {
    if (auto v = rd.string(j, "vectors", "embedding.vectors", true)) {
      s.vectors_text = *v;
      if (auto p = rd.existing_path(*v, "embedding.vectors")) s.vectors = *p;
    }
  } else if (s.provider == "http") {
    if (auto v = rd.string(j, "endpoint", "embedding.endpoint", true)) s.endpoint = *v;
  } else if (s.provider != "hashing") {
    rd.error("embedding.provider", "must be \"file\", \"http\" or \"hashing\" (got \"" + s.provider + "\")");
  }
  if (auto v = rd.string(j, "model_name", "embedding.model_name", false)) s.model_name = *v;
  if (auto v = rd.string(j, "api_key_env", "embedding.api_key_env", false)) s.api_key_env = *v;
  if (auto v = rd.integer(j, "dim", "embedding.dim", 1)) s.hashing_dim = static_cast<size_t>(*v);
  if (auto v = rd.integer(j, "batch_size", "embedding.batch_size", 1)) s.options.batch_size = static_cast<size_t>(*v);
  if (auto v = rd.integer(j, "parallelism", "embedding.parallelism", 1)) s.options.parallelism = static_cast<int>(*v);
  if (auto v = rd.integer(j, "max_attempts", "embedding.max_attempts", 1)) s.options.max_attempts = static_cast<int>(*v);
  if (auto v = rd.integer(j, "retry_backoff_ms", "embedding.retry_backoff_ms", 0)) {
    s.options.retry_backoff_ms = static_cast<int>(*v);
  }
  if (auto v = rd.integer(j, "timeout_seconds", "embedding.timeout_seconds", 1)) s.timeout_seconds = static_cast<int>(*v);
}

}  // namespace

std::string_view to_string(TaskName task) {
  switch (task) {
    case TaskName::kQaJudge: return "qa-judge";
    case TaskName::kCaptionJudge: return "caption-judge";
    case TaskName::kNgram: return "ngram";
    case TaskName::kT2V: return "t2v";
    case TaskName::kV2T: return "v2t";
    case TaskName::kAction: return "action";
    case TaskName::kAgreement: return "agreement";
  }
  return "?";
}

const std::vector<std::string>& known_task_names() {
  static const std::vector<std::string> names = {"qa-judge", "caption-judge", "ngram", "t2v",
                                                 "v2t",      "action",        "agreement"};
  return names;
}

std::optional<TaskName> parse_task_name(std::string_view name) {
  for (auto t : {TaskName::kQaJudge, TaskName::kCaptionJudge, TaskName::kNgram, TaskName::kT2V,
                 TaskName::kV2T, TaskName::kAction, TaskName::kAgreement}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<std::string> suggest_name(std::string_view given, const std::vector<std::string>& candidates) {
  std::optional<std::string> best;
  size_t best_distance = 3;
  for (const auto& c : candidates) {
    size_t d = edit_distance(given, c);
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  return best;
}

std::string format_diagnostic(const Diagnostic& d) { return d.location + ": " + d.message; }

ConfigParse parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  Reader rd(base_dir);
  ConfigParse result;
  if (!doc.is_object()) {
    result.diagnostics.push_back({"<root>", "configuration must be a JSON object"});
    return result;
  }
  RunConfig config;
  config.raw = doc;
  rd.object_keys(doc, kTopLevelKeys, "");

  if (auto v = rd.string(doc, "output_dir", "output_dir", true)) config.output_dir = rd.resolve(*v);
  if (auto v = rd.string(doc, "cache_dir", "cache_dir", false)) config.judge.config.cache_dir = rd.resolve(*v);
  if (auto v = rd.string(doc, "join_policy", "join_policy", false)) {
    if (auto p = parse_join_policy(*v)) {
      config.join_policy = *p;
    } else {
      rd.error("join_policy", "must be \"strict\" or \"intersect\" (got \"" + *v + "\")");
    }
  }

  // tasks
  if (const auto* tasks = rd.field(doc, "tasks"); !tasks) {
    rd.error("tasks", "required list of task names is missing");
  } else if (!tasks->is_array() || tasks->empty()) {
    rd.error("tasks", "must be a non-empty list of task names");
  } else {
    for (size_t i = 0; i < tasks->size(); ++i) {
      const std::string loc = "tasks[" + std::to_string(i) + "]";
      const auto& t = (*tasks)[i];
      if (!t.is_string()) {
        rd.error(loc, "must be a string");
        continue;
      }
      auto name = t.get<std::string>();
      auto task = parse_task_name(name);
      if (!task) {
        std::string msg = "unknown task \"" + name + "\"";
        if (auto s = suggest_name(name, known_task_names())) msg += " (did you mean \"" + *s + "\"?)";
        rd.error(loc, msg);
        continue;
      }
      if (has_task(config, *task)) {
        rd.error(loc, "task \"" + name + "\" listed twice");
        continue;
      }
      config.tasks.push_back(*task);
    }
  }

  // datasets
  std::set<std::string> dataset_ids;
  if (const auto* ds = rd.field(doc, "datasets"); !ds) {
    rd.error("datasets", "required list of datasets is missing");
  } else if (!ds->is_array()) {
    rd.error("datasets", "must be a list");
  } else {
    for (size_t i = 0; i < ds->size(); ++i) {
      const std::string loc = "datasets[" + std::to_string(i) + "]";
      const auto& d = (*ds)[i];
      if (!d.is_object()) {
        rd.error(loc, "must be an object");
        continue;
      }
      rd.object_keys(d, {"id", "kind", "path", "labels"}, loc);
      DatasetSpec spec;
      auto id = rd.string(d, "id", loc + ".id", true);
      auto kind = rd.string(d, "kind", loc + ".kind", true);
      auto path = rd.string(d, "path", loc + ".path", true);
      if (id) {
        if (id->empty()) rd.error(loc + ".id", "must not be empty");
        if (!dataset_ids.insert(*id).second) rd.error(loc + ".id", "duplicate dataset id \"" + *id + "\"");
        spec.id = *id;
      }
      if (kind) {
        auto k = parse_dataset_kind(*kind);
        if (!k || *k == DatasetKind::kLabels) {
          rd.error(loc + ".kind", "must be \"qa\", \"caption\" or \"action\" (got \"" + *kind + "\")");
        } else {
          spec.kind = *k;
        }
      }
      if (path) {
        spec.path_text = *path;
        if (auto p = rd.existing_path(*path, loc + ".path")) spec.path = *p;
      }
      if (spec.kind == DatasetKind::kAction) {
        if (auto labels = rd.string(d, "labels", loc + ".labels", true)) {
          spec.labels_text = *labels;
          if (auto p = rd.existing_path(*labels, loc + ".labels")) spec.labels = *p;
        }
      }
      config.datasets.push_back(std::move(spec));
    }
  }

  // predictions
  if (const auto* preds = rd.field(doc, "predictions"); !preds) {
    rd.error("predictions", "required list of prediction files is missing");
  } else if (!preds->is_array() || preds->empty()) {
    rd.error("predictions", "must be a non-empty list of file paths");
  } else {
    for (size_t i = 0; i < preds->size(); ++i) {
      const std::string loc = "predictions[" + std::to_string(i) + "]";
      if (!(*preds)[i].is_string()) {
        rd.error(loc, "must be a string");
        continue;
      }
      auto text = (*preds)[i].get<std::string>();
      config.predictions_text.push_back(text);
      if (auto p = rd.existing_path(text, loc)) config.predictions.push_back(*p);
    }
  }

  const bool needs_judge = has_task(config, TaskName::kQaJudge) || has_task(config, TaskName::kCaptionJudge);
  if (const auto* j = rd.field(doc, "judge")) {
    read_judge(rd, *j, config);
  } else if (needs_judge) {
    config.judge.config.model_name = "mock-judge";
  }

  const bool needs_embedding = has_task(config, TaskName::kT2V) || has_task(config, TaskName::kV2T) ||
                               has_task(config, TaskName::kAction);
  if (const auto* e = rd.field(doc, "embedding")) {
    read_embedding(rd, *e, config);
  } else if (needs_embedding) {
    rd.error("embedding", "required by the t2v, v2t and action tasks");
  }

  if (const auto* r = rd.field(doc, "retrieval")) {
    if (!r->is_object()) {
      rd.error("retrieval", "must be an object");
    } else {
      rd.object_keys(*r, {"ks", "gallery_size", "seed"}, "retrieval");
      if (const auto* ks = rd.field(*r, "ks")) {
        config.ks.clear();
        if (!ks->is_array() || ks->empty()) {
          rd.error("retrieval.ks", "must be a non-empty list of integers");
        } else {
          for (size_t i = 0; i < ks->size(); ++i) {
            const auto& k = (*ks)[i];
            if (!k.is_number_integer() || k.get<long long>() < 1) {
              rd.error("retrieval.ks[" + std::to_string(i) + "]", "must be an integer >= 1");
            } else {
              config.ks.push_back(k.get<int>());
            }
          }
        }
      }
      if (auto v = rd.integer(*r, "gallery_size", "retrieval.gallery_size", 1)) {
        config.gallery_size = static_cast<size_t>(*v);
      }
      if (auto v = rd.integer(*r, "seed", "retrieval.seed", 0)) config.gallery_seed = static_cast<uint64_t>(*v);
    }
  }

  if (const auto* n = rd.field(doc, "ngram")) {
    if (!n->is_object()) {
      rd.error("ngram", "must be an object");
    } else {
      rd.object_keys(*n, {"bleu_smoothing", "percent_scale"}, "ngram");
      if (auto v = rd.boolean(*n, "bleu_smoothing", "ngram.bleu_smoothing")) config.bleu_add_one_smoothing = *v;
      if (auto v = rd.boolean(*n, "percent_scale", "ngram.percent_scale")) config.ngram_percent_scale = *v;
    }
  }

  if (const auto* a = rd.field(doc, "agreement")) {
    if (!a->is_array()) {
      rd.error("agreement", "must be a list");
    } else {
      for (size_t i = 0; i < a->size(); ++i) {
        const std::string loc = "agreement[" + std::to_string(i) + "]";
        const auto& e = (*a)[i];
        if (!e.is_object()) {
          rd.error(loc, "must be an object");
          continue;
        }
        rd.object_keys(e, {"human_scores", "dataset_id", "model_id"}, loc);
        AgreementSpec spec;
        if (auto v = rd.string(e, "human_scores", loc + ".human_scores", true)) {
          spec.human_scores_text = *v;
          if (auto p = rd.existing_path(*v, loc + ".human_scores")) spec.human_scores = *p;
        }
        if (auto v = rd.string(e, "dataset_id", loc + ".dataset_id", true)) spec.dataset_id = *v;
        if (auto v = rd.string(e, "model_id", loc + ".model_id", true)) spec.model_id = *v;
        config.agreement.push_back(std::move(spec));
      }
    }
  }

  // Cross-field checks.
  auto kind_present = [&](DatasetKind k) {
    return std::any_of(config.datasets.begin(), config.datasets.end(),
                       [&](const DatasetSpec& d) { return d.kind == k; });
  };
  auto task_index = [&](TaskName t) {
    return static_cast<size_t>(std::find(config.tasks.begin(), config.tasks.end(), t) - config.tasks.begin());
  };
  for (size_t i = 0; i < config.tasks.size(); ++i) {
    const auto t = config.tasks[i];
    std::optional<DatasetKind> needed;
    if (t == TaskName::kQaJudge) needed = DatasetKind::kQa;
    if (t == TaskName::kCaptionJudge || t == TaskName::kNgram || t == TaskName::kT2V || t == TaskName::kV2T) {
      needed = DatasetKind::kCaption;
    }
    if (t == TaskName::kAction) needed = DatasetKind::kAction;
    if (needed && !kind_present(*needed)) {
      rd.error("tasks", "task \"" + std::string(to_string(t)) + "\" needs at least one " +
                            std::string(to_string(*needed)) + " dataset");
    }
  }
  if (has_task(config, TaskName::kAgreement)) {
    if (config.agreement.empty()) rd.error("agreement", "required by the agreement task");
    for (size_t i = 0; i < config.agreement.size(); ++i) {
      const auto& spec = config.agreement[i];
      const std::string loc = "agreement[" + std::to_string(i) + "].dataset_id";
      auto it = std::find_if(config.datasets.begin(), config.datasets.end(),
                             [&](const DatasetSpec& d) { return d.id == spec.dataset_id; });
      if (it == config.datasets.end()) {
        if (!spec.dataset_id.empty()) rd.error(loc, "unknown dataset \"" + spec.dataset_id + "\"");
        continue;
      }
      if (it->kind == DatasetKind::kAction) {
        rd.error(loc, "agreement needs a qa or caption dataset");
        continue;
      }
      const auto judge = it->kind == DatasetKind::kQa ? TaskName::kQaJudge : TaskName::kCaptionJudge;
      if (task_index(judge) > task_index(TaskName::kAgreement)) {
        rd.error(loc, "task \"" + std::string(to_string(judge)) + "\" must run before \"agreement\"");
      }
    }
  }

  result.diagnostics = std::move(rd.diagnostics);
  if (result.diagnostics.empty()) result.config = std::move(config);
  return result;
}

ConfigParse load_run_config(const std::filesystem::path& path) {
  ConfigParse result;
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    result.diagnostics.push_back({"<file>", e.what()});
    return result;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    result.diagnostics.push_back({"<file>", std::string("invalid JSON: ") + e.what()});
    return result;
  }
  auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  result = parse_run_config(doc, base);
  if (result.config) result.config->source = path;
  return result;
}

std::vector<Diagnostic> apply_overrides(RunConfig& config, const ConfigOverrides& overrides) {
  std::vector<Diagnostic> diags;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.cache_dir) config.judge.config.cache_dir = *overrides.cache_dir;
  if (overrides.parallelism) {
    if (*overrides.parallelism < 1) {
      diags.push_back({"--parallelism", "must be >= 1 (got " + std::to_string(*overrides.parallelism) + ")"});
    } else {
      config.judge.config.parallelism = *overrides.parallelism;
      config.embedding.options.parallelism = *overrides.parallelism;
    }
  }
  if (overrides.join_policy) config.join_policy = *overrides.join_policy;
  if (overrides.gallery_seed) config.gallery_seed = *overrides.gallery_seed;
  return diags;
}

}  // namespace vleval
