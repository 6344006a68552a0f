#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "vleval/agreement.hpp"
#include "vleval/errors.hpp"

using namespace vleval;

namespace {

JudgeVerdict graded(const std::string& id, int match) {
  JudgeVerdict v;
  v.item_id = id;
  v.correct = match >= 3;
  v.match = match;
  v.valid = true;
  return v;
}

HumanScoreRecord human(const std::string& id, HumanMetric metric, int value) {
  return {id, metric, value};
}

// Mean human score per judge value, recomputed by scanning for each value.
std::vector<std::pair<int, int>> oracle_violations(const std::vector<ScorePair>& pairs, int lo, int hi) {
  std::vector<int> present;
  std::vector<double> means;
  for (int j = lo; j <= hi; ++j) {
    double sum = 0;
    int count = 0;
    for (const auto& p : pairs) {
      if (p.judge == j) {
        sum += p.human;
        ++count;
      }
    }
    if (count > 0) {
      present.push_back(j);
      means.push_back(sum / count);
    }
  }
  std::vector<std::pair<int, int>> out;
  for (size_t i = 1; i < present.size(); ++i) {
    if (means[i] < means[i - 1]) out.emplace_back(present[i - 1], present[i]);
  }
  return out;
}

}  // namespace

TEST(PairScores, InnerJoinByItem) {
  std::vector<JudgeVerdict> judge{graded("b", 4), graded("a", 2), graded("c", 5)};
  JudgeVerdict invalid;
  invalid.item_id = "d";
  judge.push_back(invalid);
  std::vector<HumanScoreRecord> humans{human("a", HumanMetric::kMatch, 3), human("b", HumanMetric::kMatch, 4),
                                       human("e", HumanMetric::kMatch, 1),
                                       human("a", HumanMetric::kCorrectness, 1)};
  auto r = pair_scores(judge, humans, HumanMetric::kMatch);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (ScorePair{"a", 2, 3}));
  EXPECT_EQ(r.pairs[1], (ScorePair{"b", 4, 4}));
  EXPECT_EQ(r.unmatched_judge, 1u);
  EXPECT_EQ(r.unmatched_human, 1u);
  EXPECT_EQ(r.invalid_verdicts, 1u);

  auto c = pair_scores(judge, humans, HumanMetric::kCorrectness);
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.pairs[0], (ScorePair{"a", 0, 1}));
}

TEST(PairScores, DuplicatesRejected) {
  std::vector<JudgeVerdict> judge{graded("a", 2)};
  std::vector<HumanScoreRecord> humans{human("a", HumanMetric::kMatch, 3), human("a", HumanMetric::kMatch, 4)};
  try {
    pair_scores(judge, humans, HumanMetric::kMatch);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("\"a\""), std::string::npos);
  }
  std::vector<JudgeVerdict> twice{graded("a", 2), graded("a", 3)};
  std::vector<HumanScoreRecord> one{human("a", HumanMetric::kMatch, 3)};
  EXPECT_THROW(pair_scores(twice, one, HumanMetric::kMatch), InputError);
}

TEST(Confusion, Examples) {
  std::vector<ScorePair> pairs{{"a", 1, 1}, {"b", 1, 0}, {"c", 0, 0}, {"d", 1, 1}};
  auto bins = bins_for(HumanMetric::kCorrectness);
  auto m = confusion(pairs, bins);
  EXPECT_EQ(m.at(1, 1), 2u);
  EXPECT_EQ(m.at(1, 0), 1u);
  EXPECT_EQ(m.at(0, 0), 1u);
  EXPECT_EQ(m.at(0, 1), 0u);
  EXPECT_EQ(m.total(), 4u);
  EXPECT_EQ(m.diagonal(), 3u);

  std::vector<ScorePair> out_of_range{{"a", 6, 1}};
  auto graded_bins = bins_for(HumanMetric::kMatch);
  EXPECT_THROW(confusion(out_of_range, graded_bins), InputError);
  EXPECT_EQ(graded_bins, (std::vector<int>{1, 2, 3, 4, 5}));
}

TEST(Confusion, TotalsMatchPairCount) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> score(1, 5);
  auto bins = bins_for(HumanMetric::kPrecision);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScorePair> pairs;
    const int n = trial * 3;
    for (int i = 0; i < n; ++i) pairs.push_back({std::to_string(i), score(rng), score(rng)});
    auto m = confusion(pairs, bins);
    EXPECT_EQ(m.total(), pairs.size());
    size_t equal = std::count_if(pairs.begin(), pairs.end(), [](const ScorePair& p) { return p.judge == p.human; });
    EXPECT_EQ(m.diagonal(), equal);
  }
}

TEST(Analyze, MonotoneExample) {
  std::vector<ScorePair> pairs{{"a", 1, 1}, {"b", 2, 2}, {"c", 2, 3}, {"d", 4, 4}, {"e", 5, 5}};
  auto r = analyze(pairs, HumanMetric::kMatch);
  EXPECT_TRUE(r.monotone);
  EXPECT_DOUBLE_EQ(r.mean_human_by_judge.at(2), 2.5);
  EXPECT_EQ(r.mean_human_by_judge.count(3), 0u);
  EXPECT_DOUBLE_EQ(r.exact_agreement_rate, 80.0);
  EXPECT_DOUBLE_EQ(*r.within_one_rate, 100.0);
}

TEST(Analyze, ViolationReported) {
  std::vector<ScorePair> pairs{{"a", 1, 1}, {"b", 2, 4}, {"c", 3, 2}, {"d", 4, 5}};
  auto r = analyze(pairs, HumanMetric::kMatch);
  EXPECT_FALSE(r.monotone);
  EXPECT_EQ(r.violations, (std::vector<std::pair<int, int>>{{2, 3}}));
}

TEST(Analyze, PerfectAgreement) {
  std::vector<ScorePair> pairs;
  for (int v = 1; v <= 5; ++v) pairs.push_back({std::to_string(v), v, v});
  auto r = analyze(pairs, HumanMetric::kCoverage);
  EXPECT_DOUBLE_EQ(r.exact_agreement_rate, 100.0);
  EXPECT_TRUE(r.monotone);
  std::vector<ScorePair> binary{{"a", 1, 1}, {"b", 0, 0}};
  auto b = analyze(binary, HumanMetric::kCorrectness);
  EXPECT_DOUBLE_EQ(b.exact_agreement_rate, 100.0);
  EXPECT_FALSE(b.within_one_rate.has_value());
}

TEST(Analyze, EmptyInputRejected) {
  std::vector<ScorePair> none;
  EXPECT_THROW(analyze(none, HumanMetric::kMatch), InputError);
}

TEST(Analyze, MatchesOracleAndIgnoresOrder) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const bool binary = trial % 3 == 0;
    const int lo = binary ? 0 : 1, hi = binary ? 1 : 5;
    std::uniform_int_distribution<int> score(lo, hi);
    std::vector<ScorePair> pairs;
    const int n = 1 + trial % 25;
    for (int i = 0; i < n; ++i) pairs.push_back({std::to_string(i), score(rng), score(rng)});
    const auto metric = binary ? HumanMetric::kCorrectness : HumanMetric::kMatch;
    auto r = analyze(pairs, metric);
    EXPECT_EQ(r.violations, oracle_violations(pairs, lo, hi));

    size_t exact = 0;
    for (const auto& p : pairs) exact += p.judge == p.human;
    EXPECT_DOUBLE_EQ(r.exact_agreement_rate, 100.0 * exact / n);

    auto shuffled = pairs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto s = analyze(shuffled, metric);
    EXPECT_EQ(s.violations, r.violations);
    EXPECT_EQ(s.mean_human_by_judge, r.mean_human_by_judge);
    EXPECT_DOUBLE_EQ(s.exact_agreement_rate, r.exact_agreement_rate);
  }
}

TEST(Render, ConfusionTable) {
  std::vector<ScorePair> pairs{{"a", 1, 1}, {"b", 0, 1}};
  auto bins = bins_for(HumanMetric::kCorrectness);
  auto text = render_confusion(confusion(pairs, bins), HumanMetric::kCorrectness);
  EXPECT_NE(text.find("judge\\human"), std::string::npos);
  EXPECT_NE(text.find("false"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  auto j = to_json(analyze(pairs, HumanMetric::kCorrectness));
  EXPECT_EQ(j["metric"], "correctness");
  EXPECT_TRUE(j["within_one_rate"].is_null());
}
