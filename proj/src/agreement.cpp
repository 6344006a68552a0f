#include "vleval/agreement.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "vleval/errors.hpp"

namespace vleval {

namespace {

std::optional<int> judge_value(const JudgeVerdict& v, HumanMetric metric) {
  if (!v.valid) return std::nullopt;
  switch (metric) {
    case HumanMetric::kCorrectness:
      if (v.correct) return *v.correct ? 1 : 0;
      return std::nullopt;
    case HumanMetric::kMatch: return v.match;
    case HumanMetric::kPrecision: return v.precision;
    case HumanMetric::kCoverage: return v.coverage;
  }
  return std::nullopt;
}

size_t bin_index(std::span<const int> bins, int value, std::string_view axis) {
  auto it = std::find(bins.begin(), bins.end(), value);
  if (it == bins.end()) {
    throw InputError("confusion: " + std::string(axis) + " value " + std::to_string(value) +
                     " is outside the bins");
  }
  return static_cast<size_t>(it - bins.begin());
}

std::string axis_label(int bin, HumanMetric metric) {
  if (metric == HumanMetric::kCorrectness) return bin == 1 ? "true" : "false";
  return std::to_string(bin);
}

}  // namespace

PairingResult pair_scores(std::span<const JudgeVerdict> judge,
                          std::span<const HumanScoreRecord> human, HumanMetric metric) {
  std::unordered_map<std::string, int> human_by_item;
  for (const auto& h : human) {
    if (h.metric != metric) continue;
    if (!human_by_item.emplace(h.item_id, h.human_value).second) {
      throw InputError("duplicate human " + std::string(to_string(metric)) + " record for item \"" +
                       h.item_id + "\"");
    }
  }

  PairingResult result;
  std::set<std::string> seen;
  for (const auto& v : judge) {
    if (!seen.insert(v.item_id).second) {
      throw InputError("duplicate verdict for item \"" + v.item_id + "\"");
    }
    auto value = judge_value(v, metric);
    if (!value) {
      ++result.invalid_verdicts;
      continue;
    }
    auto it = human_by_item.find(v.item_id);
    if (it == human_by_item.end()) {
      ++result.unmatched_judge;
      continue;
    }
    result.pairs.push_back({v.item_id, *value, it->second});
  }
  std::set<std::string_view> paired;
  for (const auto& p : result.pairs) paired.insert(p.item_id);
  for (const auto& [item, _] : human_by_item) {
    if (!paired.count(item)) ++result.unmatched_human;
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const ScorePair& a, const ScorePair& b) { return a.item_id < b.item_id; });
  return result;
}

std::vector<int> bins_for(HumanMetric metric) {
  if (metric == HumanMetric::kCorrectness) return {0, 1};
  return {1, 2, 3, 4, 5};
}

size_t ConfusionMatrix::at(int judge, int human) const {
  return counts[bin_index(bins, judge, "judge")][bin_index(bins, human, "human")];
}

size_t ConfusionMatrix::total() const {
  size_t t = 0;
  for (const auto& row : counts) {
    for (size_t c : row) t += c;
  }
  return t;
}

size_t ConfusionMatrix::diagonal() const {
  size_t d = 0;
  for (size_t i = 0; i < counts.size(); ++i) d += counts[i][i];
  return d;
}

ConfusionMatrix confusion(std::span<const ScorePair> pairs, std::span<const int> bins) {
  ConfusionMatrix m;
  m.bins.assign(bins.begin(), bins.end());
  m.counts.assign(bins.size(), std::vector<size_t>(bins.size(), 0));
  for (const auto& p : pairs) {
    ++m.counts[bin_index(bins, p.judge, "judge")][bin_index(bins, p.human, "human")];
  }
  return m;
}

AgreementReport analyze(std::span<const ScorePair> pairs, HumanMetric metric) {
  if (pairs.empty()) throw InputError("agreement: no score pairs to analyse");
  AgreementReport report;
  report.metric = metric;
  report.n_pairs = pairs.size();

  size_t exact = 0, within_one = 0;
  std::map<int, std::pair<long long, size_t>> sums;  // judge -> (human sum, count)
  for (const auto& p : pairs) {
    exact += p.judge == p.human ? 1 : 0;
    within_one += std::abs(p.judge - p.human) <= 1 ? 1 : 0;
    auto& s = sums[p.judge];
    s.first += p.human;
    ++s.second;
  }
  const auto n = static_cast<double>(pairs.size());
  report.exact_agreement_rate = 100.0 * static_cast<double>(exact) / n;
  if (metric != HumanMetric::kCorrectness) {
    report.within_one_rate = 100.0 * static_cast<double>(within_one) / n;
  }
  for (const auto& [judge, s] : sums) {
    report.mean_human_by_judge[judge] = static_cast<double>(s.first) / static_cast<double>(s.second);
  }
  for (auto it = report.mean_human_by_judge.begin(); it != report.mean_human_by_judge.end(); ++it) {
    auto next = std::next(it);
    if (next == report.mean_human_by_judge.end()) break;
    if (next->second < it->second) report.violations.emplace_back(it->first, next->first);
  }
  report.monotone = report.violations.empty();
  return report;
}

nlohmann::ordered_json to_json(const ConfusionMatrix& matrix) {
  return {{"bins", matrix.bins}, {"rows", "judge"}, {"cols", "human"}, {"counts", matrix.counts}};
}

nlohmann::ordered_json to_json(const AgreementReport& report) {
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.mean_human_by_judge) means[std::to_string(k)] = v;
  nlohmann::ordered_json violations = nlohmann::ordered_json::array();
  for (const auto& [a, b] : report.violations) violations.push_back({a, b});
  return {{"metric", std::string(to_string(report.metric))},
          {"n_pairs", report.n_pairs},
          {"exact_agreement_rate", report.exact_agreement_rate},
          {"within_one_rate", report.within_one_rate ? nlohmann::ordered_json(*report.within_one_rate)
                                                     : nlohmann::ordered_json(nullptr)},
          {"mean_human_by_judge", means},
          {"monotone", report.monotone},
          {"violations", violations}};
}

std::string render_confusion(const ConfusionMatrix& matrix, HumanMetric metric) {
  std::ostringstream out;
  const int width = 7;
  out << std::left << std::setw(12) << "judge\\human";
  for (int b : matrix.bins) out << std::right << std::setw(width) << axis_label(b, metric);
  out << '\n';
  for (size_t r = 0; r < matrix.bins.size(); ++r) {
    out << std::left << std::setw(12) << axis_label(matrix.bins[r], metric);
    for (size_t c = 0; c < matrix.bins.size(); ++c) out << std::right << std::setw(width) << matrix.counts[r][c];
    out << '\n';
  }
  return out.str();
}

}  // namespace vleval
