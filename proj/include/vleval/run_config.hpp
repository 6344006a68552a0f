#pragma once

// Declarative run configuration (JSON) and its validation.
//
// Relative paths inside a config file resolve against the file's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleval/corpus.hpp"
#include "vleval/judge.hpp"
#include "vleval/retrieval.hpp"

namespace vleval {

enum class TaskName { kQaJudge, kCaptionJudge, kNgram, kT2V, kV2T, kAction, kAgreement };

std::string_view to_string(TaskName task);
std::optional<TaskName> parse_task_name(std::string_view name);
const std::vector<std::string>& known_task_names();

// Closest candidate within edit distance 2, if any.
std::optional<std::string> suggest_name(std::string_view given, const std::vector<std::string>& candidates);

struct DatasetSpec {
  std::string id;
  DatasetKind kind = DatasetKind::kQa;
  std::filesystem::path path;
  std::filesystem::path labels;  // action datasets only
  std::string path_text;         // as written in the config, for the manifest
  std::string labels_text;
};

struct JudgeSettings {
  std::string provider = "mock";  // "mock" | "http"
  JudgeConfig config;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 60;
};

struct EmbeddingSettings {
  std::string provider = "file";  // "file" | "http" | "hashing"
  std::filesystem::path vectors;  // file provider
  std::string vectors_text;
  std::string endpoint;
  std::string model_name;
  std::string api_key_env = "OPENAI_API_KEY";
  size_t hashing_dim = 256;
  int timeout_seconds = 60;
  EmbedOptions options;
};

struct AgreementSpec {
  std::filesystem::path human_scores;
  std::string human_scores_text;
  std::string dataset_id;
  std::string model_id;
};

struct RunConfig {
  std::filesystem::path source;  // config file, empty when built in memory
  std::vector<DatasetSpec> datasets;
  std::vector<std::filesystem::path> predictions;
  std::vector<std::string> predictions_text;
  std::vector<TaskName> tasks;
  JudgeSettings judge;
  EmbeddingSettings embedding;
  std::filesystem::path output_dir;
  JoinPolicy join_policy = JoinPolicy::kStrict;
  std::optional<size_t> gallery_size;
  uint64_t gallery_seed = 0;
  std::vector<int> ks{1, 5};
  std::vector<AgreementSpec> agreement;
  bool bleu_add_one_smoothing = false;
  bool ngram_percent_scale = true;  // report n-gram metrics x100
  nlohmann::json raw;  // the parsed document, for hashing
};

struct Diagnostic {
  std::string location;  // e.g. "tasks[2]" or "judge.parallelism"
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

struct ConfigParse {
  std::optional<RunConfig> config;  // set only when diagnostics is empty
  std::vector<Diagnostic> diagnostics;
};

// Schema, range and path-existence checks. Never touches the filesystem
// beyond existence tests.
ConfigParse parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ConfigParse load_run_config(const std::filesystem::path& path);

// Flag overrides for ad-hoc runs; unset members leave the config alone.
struct ConfigOverrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<int> parallelism;
  std::optional<JoinPolicy> join_policy;
  std::optional<uint64_t> gallery_seed;
};

// Applies overrides and re-checks the affected invariants.
std::vector<Diagnostic> apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

}  // namespace vleval
