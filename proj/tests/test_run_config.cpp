#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"
#include "vleval/run_config.hpp"

using namespace vleval;
using namespace vleval::testing;

namespace {

nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "output_dir": "out",
    "tasks": ["ngram"],
    "datasets": [{"id": "msvd-caption", "kind": "caption", "path": "msvd_caption.jsonl"}],
    "predictions": ["predictions/msvd_caption_llava.jsonl"]
  })");
}

bool has_diagnostic(const ConfigParse& p, std::string_view location, std::string_view fragment) {
  return std::any_of(p.diagnostics.begin(), p.diagnostics.end(), [&](const Diagnostic& d) {
    return d.location == location && d.message.find(fragment) != std::string::npos;
  });
}

std::string dump(const ConfigParse& p) {
  std::string out;
  for (const auto& d : p.diagnostics) out += format_diagnostic(d) + "\n";
  return out;
}

}  // namespace

TEST(RunConfig, FixtureConfigIsValid) {
  auto p = load_run_config(fixture("run.json"));
  ASSERT_TRUE(p.config) << dump(p);
  const auto& c = *p.config;
  EXPECT_EQ(c.tasks.size(), 7u);
  EXPECT_EQ(c.tasks.front(), TaskName::kQaJudge);
  EXPECT_EQ(c.datasets.size(), 5u);
  EXPECT_EQ(c.judge.config.parallelism, 4);
  EXPECT_EQ(c.gallery_seed, 7u);
  EXPECT_EQ(c.ks, (std::vector<int>{1, 5}));
  EXPECT_TRUE(c.datasets[0].path.is_absolute());
  EXPECT_TRUE(std::filesystem::exists(c.embedding.vectors));
  EXPECT_EQ(c.agreement.at(0).model_id, "video-llava");
}

TEST(RunConfig, MinimalDefaults) {
  auto p = parse_run_config(minimal(), fixture(""));
  ASSERT_TRUE(p.config) << dump(p);
  EXPECT_EQ(p.config->judge.provider, "mock");
  EXPECT_EQ(p.config->join_policy, JoinPolicy::kStrict);
  EXPECT_TRUE(p.config->ngram_percent_scale);
  EXPECT_FALSE(p.config->bleu_add_one_smoothing);
}

TEST(RunConfig, UnknownTaskSuggestsName) {
  auto doc = minimal();
  doc["tasks"] = {"qa-jdge"};
  auto p = parse_run_config(doc, fixture(""));
  EXPECT_FALSE(p.config);
  EXPECT_TRUE(has_diagnostic(p, "tasks[0]", "did you mean \"qa-judge\"")) << dump(p);
  EXPECT_EQ(suggest_name("ngarm", known_task_names()), "ngram");
  EXPECT_FALSE(suggest_name("zzzzzz", known_task_names()).has_value());
}

TEST(RunConfig, RangeAndPathErrorsAllReported) {
  auto doc = minimal();
  doc["judge"] = {{"parallelism", 0}, {"temperature", -1.0}};
  doc["predictions"] = {"predictions/does_not_exist.jsonl"};
  doc["colour"] = "blue";
  auto p = parse_run_config(doc, fixture(""));
  EXPECT_FALSE(p.config);
  EXPECT_TRUE(has_diagnostic(p, "judge.parallelism", "must be >= 1 (got 0)")) << dump(p);
  EXPECT_TRUE(has_diagnostic(p, "judge.temperature", "")) << dump(p);
  EXPECT_TRUE(has_diagnostic(p, "predictions[0]", "does_not_exist")) << dump(p);
  EXPECT_TRUE(has_diagnostic(p, "colour", "")) << dump(p);
  EXPECT_GE(p.diagnostics.size(), 4u);
}

TEST(RunConfig, CrossFieldChecks) {
  auto doc = minimal();
  doc["tasks"] = {"action"};
  auto p = parse_run_config(doc, fixture(""));
  EXPECT_FALSE(p.config) << "action task without an action dataset";

  auto agree = minimal();
  agree["tasks"] = {"agreement", "caption-judge"};
  agree["agreement"] = {{{"human_scores", "human_msvd_qa_llava.jsonl"}, {"dataset_id", "msvd-caption"},
                         {"model_id", "video-llava"}}};
  auto q = parse_run_config(agree, fixture(""));
  EXPECT_FALSE(q.config) << "agreement must follow its judge task";

  auto missing = minimal();
  missing.erase("output_dir");
  EXPECT_TRUE(has_diagnostic(parse_run_config(missing, fixture("")), "output_dir", ""));
}

TEST(RunConfig, LoadErrorsAndNoSideEffects) {
  TempDir dir;
  auto bad = dir.write("bad.json", "{ not json");
  auto p = load_run_config(bad);
  EXPECT_FALSE(p.config);
  ASSERT_FALSE(p.diagnostics.empty());
  EXPECT_EQ(p.diagnostics[0].location, "<file>");
  EXPECT_FALSE(load_run_config(dir / "absent.json").config);

  auto doc = minimal();
  doc["output_dir"] = (dir / "never-created").string();
  auto ok = parse_run_config(doc, fixture(""));
  ASSERT_TRUE(ok.config) << dump(ok);
  EXPECT_FALSE(std::filesystem::exists(dir / "never-created"));
}

TEST(RunConfig, Overrides) {
  auto p = parse_run_config(minimal(), fixture(""));
  ASSERT_TRUE(p.config);
  auto config = *p.config;
  ConfigOverrides o;
  o.output_dir = "/tmp/elsewhere";
  o.parallelism = 3;
  o.join_policy = JoinPolicy::kIntersect;
  o.gallery_seed = 99;
  EXPECT_TRUE(apply_overrides(config, o).empty());
  EXPECT_EQ(config.output_dir, "/tmp/elsewhere");
  EXPECT_EQ(config.judge.config.parallelism, 3);
  EXPECT_EQ(config.embedding.options.parallelism, 3);
  EXPECT_EQ(config.join_policy, JoinPolicy::kIntersect);
  EXPECT_EQ(config.gallery_seed, 99u);

  ConfigOverrides zero;
  zero.parallelism = 0;
  auto diags = apply_overrides(config, zero);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].location, "--parallelism");
}
