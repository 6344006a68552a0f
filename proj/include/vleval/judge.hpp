#pragma once

// LLM-judge scoring of open-ended answers (correctness + 1-5 match) and
// captions (1-5 precision + 1-5 coverage).
//
// Prompts come from versioned templates compiled into the library. Replies
// are scanned for the first JSON object and range-checked; unparseable
// replies are retried with a format reminder and, once max_attempts is
// exhausted, recorded as invalid verdicts that are excluded from the means.

#include <atomic>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleval/corpus.hpp"

namespace vleval {

enum class JudgeTask { kQa, kCaption };

std::string_view to_string(JudgeTask task);
std::optional<JudgeTask> parse_judge_task(std::string_view name);

// Version tag of the compiled-in prompt templates.
std::string_view judge_template_version();

struct JudgePrompt {
  JudgeTask task = JudgeTask::kQa;
  std::string system_text;
  std::string user_text;
  std::string item_id;
};

JudgePrompt build_qa_prompt(const QaItem& item, const PredictionRecord& prediction);
JudgePrompt build_caption_prompt(const CaptionItem& item, const PredictionRecord& prediction);

// Appended as a follow-up user turn when a reply could not be parsed.
std::string_view format_reminder(JudgeTask task);

struct VerdictScores {
  std::optional<bool> correct;
  std::optional<int> match;
  std::optional<int> precision;
  std::optional<int> coverage;

  bool operator==(const VerdictScores&) const = default;
};

struct ParseOutcome {
  std::optional<VerdictScores> scores;
  std::string error;  // set when scores is empty

  bool ok() const { return scores.has_value(); }
};

// Takes the first well-formed JSON object found in the reply. QA replies
// need "correct" ("yes"/"no" or a boolean) and an integer "score" in 1..5;
// caption replies need integer "precision" and "coverage" in 1..5.
ParseOutcome parse_verdict(std::string_view raw_reply, JudgeTask task);

struct JudgeVerdict {
  std::string item_id;
  std::optional<bool> correct;
  std::optional<int> match;
  std::optional<int> precision;
  std::optional<int> coverage;
  std::string raw_reply;  // last reply received for this item
  int attempts = 1;
  bool valid = false;

  bool operator==(const JudgeVerdict&) const = default;
};

struct JudgeConfig {
  std::string provider_endpoint;
  std::string model_name;
  double temperature = 0.0;
  int max_attempts = 3;
  int parallelism = 1;
  std::filesystem::path cache_dir;  // empty disables caching
  int retry_backoff_ms = 250;       // linear backoff between failed provider calls
};

// Throws ConfigError on temperature < 0, max_attempts < 1 or parallelism < 1.
void validate(const JudgeConfig& config);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
};

nlohmann::ordered_json to_json(const ChatRequest& request);

// A judge backend. complete() returns the assistant text or throws
// ProviderError; implementations must be safe to call concurrently.
class JudgeProvider {
 public:
  virtual ~JudgeProvider() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string identity() const = 0;
};

struct JudgeReport {
  JudgeTask task = JudgeTask::kQa;
  size_t n_items = 0;
  size_t n_valid = 0;
  // Absent when n_valid == 0 or not applicable to the task.
  std::optional<double> accuracy;  // percent, QA only
  std::optional<double> mean_match;
  std::optional<double> mean_precision;
  std::optional<double> mean_coverage;

  bool operator==(const JudgeReport&) const = default;
};

// Sequential fold over the verdicts; invalid verdicts only count in n_items.
JudgeReport summarize(JudgeTask task, std::span<const JudgeVerdict> verdicts);

struct JudgeRun {
  std::vector<JudgeVerdict> verdicts;  // input order
  JudgeReport report;
  size_t provider_calls = 0;
  size_t cache_hits = 0;
};

// On-disk verdict cache, one JSON file per key. Entries that fail to parse
// or validate are treated as misses and overwritten.
class VerdictCache {
 public:
  explicit VerdictCache(std::filesystem::path dir);

  static std::string key(std::string_view model_name, const JudgePrompt& prompt);

  std::optional<JudgeVerdict> get(const std::string& key, JudgeTask task) const;
  void put(const std::string& key, JudgeTask task, const JudgeVerdict& verdict) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

// Scores every prompt. Verdicts keep input order for any parallelism. A
// provider that keeps failing for one item aborts the run with
// ProviderError; verdicts finished before that stay in the cache.
JudgeRun evaluate(std::span<const JudgePrompt> prompts, const JudgeConfig& config,
                  JudgeProvider& provider);
JudgeRun evaluate(std::span<const QaPair> pairs, const JudgeConfig& config, JudgeProvider& provider);
JudgeRun evaluate(std::span<const CaptionPair> pairs, const JudgeConfig& config,
                  JudgeProvider& provider);

nlohmann::ordered_json to_json(const JudgeVerdict& verdict);
nlohmann::ordered_json to_json(const JudgeReport& report);
std::string verdicts_to_jsonl(std::span<const JudgeVerdict> verdicts);
std::vector<JudgeVerdict> load_verdicts(const std::filesystem::path& path);

}  // namespace vleval
