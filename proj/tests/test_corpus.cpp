#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vleval/corpus.hpp"
#include "vleval/errors.hpp"

using namespace vleval;
using vleval::testing::TempDir;

namespace {

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected InputError";
  return {};
}

PredictionRecord pred(std::string item, std::string response = "x", std::string model = "m",
                      std::string dataset = "d") {
  return {std::move(model), std::move(dataset), std::move(item), std::move(response)};
}

Dataset<QaItem> qa_dataset(const std::vector<std::string>& ids) {
  Dataset<QaItem> ds{"d", {}};
  for (const auto& id : ids) ds.items.push_back({id, "v-" + id, "q?", "a"});
  return ds;
}

}  // namespace

TEST(LoadDataset, ThreeQaLines) {
  TempDir dir;
  auto p = dir.write("qa.jsonl",
                     R"({"item_id":"v1_q1","video_id":"v1","question":"who?","answer":"man"}
{"item_id":"v1_q2","video_id":"v1","question":"what?","answer":"dog","extra":1}

{"item_id":"v2_q1","video_id":"v2","question":"where?","answer":"park"}
)");
  auto items = load_qa_items(p);
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].item_id, "v1_q1");
  EXPECT_EQ(items[1].answer, "dog");
  EXPECT_EQ(items[2].video_id, "v2");
}

TEST(LoadDataset, DuplicateIdNamesBothLines) {
  TempDir dir;
  std::string text;
  for (int i = 1; i <= 5; ++i) {
    std::string id = (i == 2 || i == 5) ? "v1_q1" : "q" + std::to_string(i);
    text += R"({"item_id":")" + id + R"(","video_id":"v","question":"q","answer":"a"})" "\n";
  }
  auto p = dir.write("qa.jsonl", text);
  auto msg = error_of([&] { load_qa_items(p); });
  EXPECT_NE(msg.find("v1_q1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("lines 2 and 5"), std::string::npos) << msg;
}

TEST(LoadDataset, ActionLabelOutsideLabelSet) {
  TempDir dir;
  auto labels_path = dir.write("labels.jsonl", R"({"dataset_id":"hmdb","labels":["run","walk"]})" "\n");
  auto items_path = dir.write("items.jsonl",
                              R"({"item_id":"a1","video_id":"v1","label":"run"}
{"item_id":"a2","video_id":"v2","label":"jogging"}
{"item_id":"a3","video_id":"v3","label":"swim"}
)");
  auto labels = load_label_set(labels_path);
  EXPECT_EQ(labels.index_of("walk"), std::optional<size_t>(1));
  auto msg = error_of([&] { load_action_items(items_path, labels); });
  EXPECT_NE(msg.find("a2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("jogging"), std::string::npos) << msg;
  EXPECT_NE(msg.find("a3"), std::string::npos) << msg;
}

TEST(LoadDataset, MalformedLineReportsLineNumber) {
  TempDir dir;
  auto p = dir.write("qa.jsonl", R"({"item_id":"a","video_id":"v","question":"q","answer":"a"}
{"item_id": "b", oops}
)");
  auto msg = error_of([&] { load_qa_items(p); });
  EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
}

TEST(LoadDataset, MissingFieldAndBlankText) {
  TempDir dir;
  auto missing = dir.write("m.jsonl", R"({"item_id":"a","video_id":"v","question":"q"})" "\n");
  EXPECT_NE(error_of([&] { load_qa_items(missing); }).find("answer"), std::string::npos);
  auto blank = dir.write("b.jsonl", R"({"item_id":"a","video_id":"v","question":"  ","answer":"x"})" "\n");
  EXPECT_NE(error_of([&] { load_qa_items(blank); }).find("question"), std::string::npos);
}

TEST(LoadDataset, CaptionReferencesMustBeNonEmpty) {
  TempDir dir;
  auto none = dir.write("c.jsonl", R"({"item_id":"a","video_id":"v","references":[]})" "\n");
  EXPECT_THROW(load_caption_items(none), InputError);
  auto blank = dir.write("d.jsonl", R"({"item_id":"a","video_id":"v","references":["ok",""]})" "\n");
  EXPECT_THROW(load_caption_items(blank), InputError);
}

TEST(LoadDataset, LabelFileRules) {
  TempDir dir;
  EXPECT_THROW(load_label_set(dir.write("two.jsonl", "{\"dataset_id\":\"a\",\"labels\":[\"x\"]}\n"
                                                     "{\"dataset_id\":\"b\",\"labels\":[\"y\"]}\n")),
               InputError);
  EXPECT_THROW(load_label_set(dir.write("dup.jsonl", R"({"dataset_id":"a","labels":["x","x"]})")), InputError);
  EXPECT_THROW(load_label_set(dir.write("empty.jsonl", R"({"dataset_id":"a","labels":[]})")), InputError);
}

TEST(LoadDataset, KindDispatch) {
  auto loaded = load_dataset(vleval::testing::fixture("msvd_caption.jsonl"), DatasetKind::kCaption);
  ASSERT_TRUE(std::holds_alternative<std::vector<CaptionItem>>(loaded));
  EXPECT_EQ(std::get<std::vector<CaptionItem>>(loaded).size(), 12u);
  EXPECT_THROW(load_dataset(vleval::testing::fixture("hmdb51.jsonl"), DatasetKind::kAction), InputError);
}

TEST(LoadPredictions, EmptyResponseCounted) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 10; ++i) {
    text += R"({"model_id":"m","dataset_id":"d","item_id":"i)" + std::to_string(i) + R"(","response":")" +
            (i == 4 ? "" : "text") + "\"}\n";
  }
  auto set = load_predictions(dir.write("p.jsonl", text));
  EXPECT_EQ(set.records.size(), 10u);
  EXPECT_EQ(set.warnings.empty, 1u);
  EXPECT_EQ(set.records[4].response, "");
}

TEST(LoadPredictions, EmptyFile) {
  TempDir dir;
  auto set = load_predictions(dir.write("p.jsonl", ""));
  EXPECT_TRUE(set.records.empty());
  EXPECT_EQ(set.warnings.empty, 0u);
}

TEST(LoadPredictions, DuplicateTriple) {
  TempDir dir;
  auto p = dir.write("p.jsonl", R"({"model_id":"m","dataset_id":"d","item_id":"i","response":"a"}
{"model_id":"m2","dataset_id":"d","item_id":"i","response":"a"}
{"model_id":"m","dataset_id":"d","item_id":"i","response":"b"}
)");
  auto msg = error_of([&] { load_predictions(p); });
  EXPECT_NE(msg.find("lines 1 and 3"), std::string::npos) << msg;
}

TEST(LoadHumanScores, RangeAndMetric) {
  TempDir dir;
  auto ok = dir.write("h.jsonl", R"({"item_id":"a","metric":"correctness","human_value":1}
{"item_id":"a","metric":"match","human_value":5}
)");
  auto recs = load_human_scores(ok);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].metric, HumanMetric::kMatch);
  EXPECT_THROW(load_human_scores(dir.write("r.jsonl", R"({"item_id":"a","metric":"correctness","human_value":2})")),
               InputError);
  EXPECT_THROW(load_human_scores(dir.write("s.jsonl", R"({"item_id":"a","metric":"match","human_value":0})")),
               InputError);
  EXPECT_THROW(load_human_scores(dir.write("t.jsonl", R"({"item_id":"a","metric":"fluency","human_value":3})")),
               InputError);
}

TEST(RoundTrip, SerializeAndReload) {
  TempDir dir;
  auto qa = load_qa_items(vleval::testing::fixture("msvd_qa.jsonl"));
  auto caption = load_caption_items(vleval::testing::fixture("msvd_caption.jsonl"));
  auto preds = load_predictions(vleval::testing::fixture("predictions/video_llava.jsonl")).records;
  auto human = load_human_scores(vleval::testing::fixture("human_msvd_qa_llava.jsonl"));
  EXPECT_EQ(load_qa_items(dir.write("qa.jsonl", to_jsonl(std::span<const QaItem>(qa)))), qa);
  EXPECT_EQ(load_caption_items(dir.write("c.jsonl", to_jsonl(std::span<const CaptionItem>(caption)))), caption);
  EXPECT_EQ(load_predictions(dir.write("p.jsonl", to_jsonl(std::span<const PredictionRecord>(preds)))).records,
            preds);
  EXPECT_EQ(load_human_scores(dir.write("h.jsonl", to_jsonl(std::span<const HumanScoreRecord>(human)))), human);

  auto labels = load_label_set(vleval::testing::fixture("hmdb51_labels.jsonl"));
  auto actions = load_action_items(vleval::testing::fixture("hmdb51.jsonl"), labels);
  auto labels_path = dir.write("l.jsonl", to_json(labels).dump() + "\n");
  EXPECT_EQ(load_label_set(labels_path), labels);
  EXPECT_EQ(load_action_items(dir.write("a.jsonl", to_jsonl(std::span<const ActionItem>(actions))), labels),
            actions);
}

TEST(Join, StrictAllPresent) {
  auto ds = qa_dataset({"a", "b", "c", "d", "e"});
  std::vector<PredictionRecord> preds{pred("e"), pred("d"), pred("c"), pred("b"), pred("a")};
  auto result = join(ds, std::span<const PredictionRecord>(preds), JoinPolicy::kStrict);
  ASSERT_EQ(result.pairs.size(), 5u);
  EXPECT_TRUE(result.summary.missing_ids.empty());
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(result.pairs[i].ground_truth.item_id, ds.items[i].item_id);
    EXPECT_EQ(result.pairs[i].prediction.item_id, ds.items[i].item_id);
  }
}

TEST(Join, StrictMissingListsIds) {
  auto ds = qa_dataset({"a", "b", "c", "d", "e"});
  std::vector<PredictionRecord> preds{pred("a"), pred("b"), pred("d"), pred("e")};
  auto msg = error_of([&] { join(ds, std::span<const PredictionRecord>(preds), JoinPolicy::kStrict); });
  EXPECT_NE(msg.find("1 ground-truth item"), std::string::npos) << msg;
  EXPECT_NE(msg.find(": c"), std::string::npos) << msg;
}

TEST(Join, IntersectCounts) {
  auto ds = qa_dataset({"a", "b", "c", "d", "e"});
  std::vector<PredictionRecord> preds{pred("a"), pred("x"), pred("b"), pred("d"), pred("e"), pred("y")};
  auto result = join(ds, std::span<const PredictionRecord>(preds), JoinPolicy::kIntersect);
  EXPECT_EQ(result.pairs.size(), 4u);
  EXPECT_EQ(result.summary.matched, 4u);
  EXPECT_EQ(result.summary.missing_ids, std::vector<std::string>{"c"});
  EXPECT_EQ(result.summary.extra_ids, (std::vector<std::string>{"x", "y"}));
}

TEST(Join, Errors) {
  auto ds = qa_dataset({"a", "b"});
  std::vector<PredictionRecord> other_dataset{pred("a", "x", "m", "other")};
  EXPECT_THROW(join(ds, std::span<const PredictionRecord>(other_dataset), JoinPolicy::kIntersect), InputError);
  std::vector<PredictionRecord> two_models{pred("a", "x", "m1"), pred("b", "x", "m2")};
  EXPECT_THROW(join(ds, std::span<const PredictionRecord>(two_models), JoinPolicy::kIntersect), InputError);
}

TEST(Join, IntersectCountProperty) {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::string> gt_ids, pred_ids;
    std::uniform_int_distribution<int> id(0, 29), size(0, 20);
    for (int n = size(rng); n > 0; --n) gt_ids.insert("i" + std::to_string(id(rng)));
    for (int n = size(rng); n > 0; --n) pred_ids.insert("i" + std::to_string(id(rng)));
    std::vector<std::string> gt_order(gt_ids.begin(), gt_ids.end());
    std::shuffle(gt_order.begin(), gt_order.end(), rng);
    std::vector<PredictionRecord> preds;
    for (const auto& p : pred_ids) preds.push_back(pred(p));
    std::shuffle(preds.begin(), preds.end(), rng);

    auto ds = qa_dataset(gt_order);
    auto a = join(ds, std::span<const PredictionRecord>(preds), JoinPolicy::kIntersect);
    auto b = join(ds, std::span<const PredictionRecord>(preds), JoinPolicy::kIntersect);
    std::vector<std::string> common;
    std::set_intersection(gt_ids.begin(), gt_ids.end(), pred_ids.begin(), pred_ids.end(),
                          std::back_inserter(common));
    ASSERT_EQ(a.pairs.size(), common.size());
    EXPECT_EQ(a.summary.missing_ids.size(), gt_ids.size() - common.size());
    EXPECT_EQ(a.summary.extra_ids.size(), pred_ids.size() - common.size());
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (size_t i = 0; i < a.pairs.size(); ++i) {
      EXPECT_EQ(a.pairs[i].ground_truth, b.pairs[i].ground_truth);
    }
  }
}

TEST(Selection, ModelsAndPredictions) {
  std::vector<PredictionRecord> recs{pred("a", "x", "zeta"), pred("a", "x", "alpha"), pred("b", "x", "zeta"),
                                     pred("a", "x", "beta", "other")};
  EXPECT_EQ(models_for_dataset(recs, "d"), (std::vector<std::string>{"alpha", "zeta"}));
  auto sel = select_predictions(recs, "zeta", "d");
  ASSERT_EQ(sel.size(), 2u);
  EXPECT_EQ(sel[1].item_id, "b");
}
