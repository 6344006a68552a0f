#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "test_support.hpp"
#include "vleval/errors.hpp"
#include "vleval/judge_providers.hpp"
#include "vleval/pipeline.hpp"

using namespace vleval;
using namespace vleval::testing;
namespace fs = std::filesystem;

namespace {

RunConfig fixture_config(const fs::path& output_dir, const std::vector<std::string>& tasks = {}) {
  auto doc = nlohmann::json::parse(slurp(fixture("run.json")));
  doc["output_dir"] = output_dir.string();
  doc["judge"]["retry_backoff_ms"] = 0;
  if (!tasks.empty()) {
    doc["tasks"] = tasks;
    doc.erase("agreement");
  }
  auto p = parse_run_config(doc, fixture(""));
  if (!p.config) throw std::runtime_error(format_diagnostic(p.diagnostics.at(0)));
  return *p.config;
}

std::vector<std::string> listing(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(VLEVAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, NgramOnlyRun) {
  TempDir dir;
  auto config = fixture_config(dir / "out", {"ngram"});
  std::ostringstream log;
  auto result = run_pipeline(config, log);
  ASSERT_EQ(result.exit_code, kExitOk) << log.str();
  ASSERT_EQ(result.reports.size(), 3u);  // two caption sets for video-llava, one for videochat
  EXPECT_TRUE(fs::exists(dir / "out/tables/report.md"));
  EXPECT_TRUE(fs::exists(dir / "out/reports.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "out/manifest.json"));
  EXPECT_EQ(result.judge_calls, 0u);
  auto md = slurp(dir / "out/tables/report.md");
  EXPECT_NE(md.find("Caption n-gram"), std::string::npos);
  EXPECT_EQ(result.manifest["manifest_sha256"], result.manifest_sha256);
  EXPECT_EQ(manifest_hash(result.manifest), result.manifest_sha256);
}

TEST(Pipeline, MalformedInputWritesNothing) {
  TempDir dir;
  auto config = fixture_config(dir / "out", {"ngram"});
  config.predictions.push_back(dir.write("broken.jsonl", "{\"model_id\": \"m\"\n"));
  std::ostringstream log;
  auto result = run_pipeline(config, log);
  EXPECT_EQ(result.exit_code, kExitValidation);
  ASSERT_FALSE(result.errors.empty());
  EXPECT_NE(result.errors[0].find("broken.jsonl"), std::string::npos) << result.errors[0];
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Pipeline, StrictJoinMissIsValidationError) {
  TempDir dir;
  auto config = fixture_config(dir / "out", {"ngram"});
  config.predictions.push_back(dir.write(
      "partial.jsonl", R"({"model_id": "partial", "dataset_id": "msvd-caption", "item_id": "c01", "response": "a man"})"));
  std::ostringstream log;
  auto result = run_pipeline(config, log);
  EXPECT_EQ(result.exit_code, kExitValidation);
  EXPECT_FALSE(fs::exists(dir / "out"));
  config.join_policy = JoinPolicy::kIntersect;
  EXPECT_EQ(run_pipeline(config, log).exit_code, kExitOk) << log.str();
}

TEST(Pipeline, WarmRerunIsIdentical) {
  TempDir dir;
  auto config = fixture_config(dir / "out");
  std::ostringstream log;
  auto first = run_pipeline(config, log);
  ASSERT_EQ(first.exit_code, kExitOk) << log.str();
  EXPECT_GT(first.judge_calls, 0u);
  const auto files = listing(dir / "out");
  std::map<std::string, std::string> contents;
  for (const auto& f : files) {
    if (f != "manifest.json") contents[f] = slurp(dir / "out" / f);
  }

  auto second = run_pipeline(config, log);
  ASSERT_EQ(second.exit_code, kExitOk);
  EXPECT_EQ(second.judge_calls, 0u);
  EXPECT_EQ(second.judge_cache_hits, first.judge_calls);
  EXPECT_EQ(second.manifest_sha256, first.manifest_sha256);
  EXPECT_EQ(listing(dir / "out"), files);
  for (const auto& [f, bytes] : contents) EXPECT_EQ(slurp(dir / "out" / f), bytes) << f;

  auto elsewhere = config;
  elsewhere.output_dir = dir / "other";
  elsewhere.judge.config.parallelism = 1;
  auto third = run_pipeline(elsewhere, log);
  EXPECT_EQ(third.manifest_sha256, first.manifest_sha256);
  EXPECT_EQ(slurp(dir / "other/tables/report.md"), contents.at("tables/report.md"));
}

TEST(Pipeline, TaskFailureKeepsEarlierOutputs) {
  TempDir dir;
  auto config = fixture_config(dir / "out", {"ngram", "qa-judge", "t2v"});
  FunctionJudgeProvider down([](const ChatRequest&) -> std::string { throw ProviderError("service unavailable"); });
  std::ostringstream log;
  auto result = run_pipeline(config, log, {&down, nullptr});
  EXPECT_EQ(result.exit_code, kExitRuntime);
  EXPECT_TRUE(fs::exists(dir / "out/ngram"));
  EXPECT_TRUE(fs::exists(dir / "out/manifest.json"));
  const auto& tasks = result.manifest["tasks"];
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_EQ(tasks[0]["status"], "ok");
  EXPECT_EQ(tasks[1]["status"], "failed");
  EXPECT_EQ(tasks[2]["status"], "skipped");
  EXPECT_GE(down.calls(), static_cast<size_t>(config.judge.config.max_attempts));
}

TEST(Cli, ValidateRunAndReport) {
  TempDir dir;
  EXPECT_EQ(run_cli("validate " + fixture("run.json").string(), dir / "validate.log"), 0)
      << slurp(dir / "validate.log");

  auto bad = nlohmann::json::parse(slurp(fixture("run.json")));
  bad["tasks"][0] = "qa-jdge";
  bad["judge"]["parallelism"] = 0;
  fs::copy(fixture(""), dir / "fx", fs::copy_options::recursive);
  auto bad_in_place = dir.write("fx/bad.json", bad.dump());
  EXPECT_EQ(run_cli("validate " + bad_in_place.string(), dir / "bad.log"), 1);
  auto log = slurp(dir / "bad.log");
  EXPECT_NE(log.find("did you mean \"qa-judge\""), std::string::npos) << log;
  EXPECT_NE(log.find("judge.parallelism"), std::string::npos) << log;

  const auto out = dir / "run-out";
  ASSERT_EQ(run_cli("run " + fixture("run.json").string() + " -q --output-dir " + out.string(), dir / "run.log"), 0)
      << slurp(dir / "run.log");
  auto run_log = slurp(dir / "run.log");
  EXPECT_NE(run_log.find("manifest "), std::string::npos);

  EXPECT_EQ(run_cli("report " + (out / "reports.jsonl").string() + " -f csv -o " + (dir / "t.csv").string(),
                    dir / "report.log"),
            0)
      << slurp(dir / "report.log");
  EXPECT_EQ(slurp(dir / "t.csv"), slurp(out / "tables/report.csv"));

  const auto verdicts = out / "verdicts/video-llava__msvd-qa__qa-judge.jsonl";
  ASSERT_TRUE(fs::exists(verdicts));
  EXPECT_EQ(run_cli("agreement --verdicts " + verdicts.string() + " --human " +
                        fixture("human_msvd_qa_llava.jsonl").string() + " --metric match -f json",
                    dir / "agree.log"),
            0)
      << slurp(dir / "agree.log");
  auto agree = nlohmann::json::parse(slurp(dir / "agree.log"));
  EXPECT_EQ(agree["report"]["metric"], "match");

  EXPECT_EQ(run_cli("frobnicate", dir / "usage.log"), 1);
  EXPECT_EQ(run_cli("report " + (dir / "missing.jsonl").string(), dir / "missing.log"), 1);
}
