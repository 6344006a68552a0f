#pragma once

// End-to-end run: load every input, execute the configured tasks in order and
// write verdict dumps, metric reports, rendered tables and a run manifest.
//
// Output layout under RunConfig::output_dir:
//   verdicts/<model>__<dataset>__<task>.jsonl
//   ngram/<model>__<dataset>.jsonl
//   retrieval/<model>__<dataset>__<direction>.json
//   agreement/<model>__<dataset>__<metric>.{json,txt}
//   reports.jsonl
//   tables/report.{md,csv,json}
//   manifest.json

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleval/judge.hpp"
#include "vleval/report.hpp"
#include "vleval/retrieval.hpp"
#include "vleval/run_config.hpp"

namespace vleval {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

// Providers supplied by the caller take precedence over the configured ones.
struct PipelineProviders {
  JudgeProvider* judge = nullptr;
  EmbeddingProvider* embedding = nullptr;
};

struct PipelineResult {
  int exit_code = kExitOk;
  std::vector<std::string> errors;
  std::vector<MetricReport> reports;
  nlohmann::ordered_json manifest;  // empty when inputs failed to load
  std::string manifest_sha256;
  size_t judge_calls = 0;
  size_t judge_cache_hits = 0;
};

// Input problems (unreadable files, malformed records, strict-join misses)
// are reported before anything is written. A failing task stops the run;
// outputs of earlier tasks and the manifest are still written.
PipelineResult run_pipeline(const RunConfig& config, std::ostream& log, PipelineProviders providers = {});

// Hash of the manifest with its "runtime" member and the hash field removed.
std::string manifest_hash(const nlohmann::ordered_json& manifest);

}  // namespace vleval
