#pragma once

// Judge-versus-human agreement: score pairing, confusion matrices, exact and
// within-one agreement, and whether mean human score rises with judge score.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleval/corpus.hpp"
#include "vleval/judge.hpp"

namespace vleval {

struct ScorePair {
  std::string item_id;
  int judge = 0;  // correctness is encoded 0/1
  int human = 0;

  bool operator==(const ScorePair&) const = default;
};

struct PairingResult {
  std::vector<ScorePair> pairs;  // ordered by item_id
  size_t unmatched_judge = 0;    // valid verdicts without a human record
  size_t unmatched_human = 0;    // human records without a valid verdict
  size_t invalid_verdicts = 0;   // verdicts skipped because they carry no score
};

// Inner join on item_id for one metric. Human records for other metrics are
// ignored. Raises InputError on a duplicate (item_id, metric) human record.
PairingResult pair_scores(std::span<const JudgeVerdict> judge,
                          std::span<const HumanScoreRecord> human, HumanMetric metric);

// {0, 1} for correctness, {1..5} for the graded metrics.
std::vector<int> bins_for(HumanMetric metric);

// Rows are judge scores, columns human scores.
struct ConfusionMatrix {
  std::vector<int> bins;
  std::vector<std::vector<size_t>> counts;

  size_t at(int judge, int human) const;
  size_t total() const;
  size_t diagonal() const;
};

ConfusionMatrix confusion(std::span<const ScorePair> pairs, std::span<const int> bins);

struct AgreementReport {
  HumanMetric metric = HumanMetric::kMatch;
  size_t n_pairs = 0;
  double exact_agreement_rate = 0.0;            // percent
  std::optional<double> within_one_rate;        // percent, graded metrics only
  std::map<int, double> mean_human_by_judge;    // over judge scores that occur
  bool monotone = true;
  std::vector<std::pair<int, int>> violations;  // adjacent present judge scores (a, b), a < b, mean drops
};

// Raises InputError on empty input.
AgreementReport analyze(std::span<const ScorePair> pairs, HumanMetric metric);

nlohmann::ordered_json to_json(const ConfusionMatrix& matrix);
nlohmann::ordered_json to_json(const AgreementReport& report);

// Plain-text table of a confusion matrix with row and column labels.
std::string render_confusion(const ConfusionMatrix& matrix, HumanMetric metric);

}  // namespace vleval
