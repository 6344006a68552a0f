#pragma once

// Judge reply parsing table: each row is a raw reply and the verdict it must
// produce, or a failure.

#include <array>
#include <optional>
#include <string_view>

#include "vleval/judge.hpp"

namespace vleval::testing {

struct ParseCase {
  JudgeTask task;
  std::string_view reply;
  bool ok;
  std::optional<bool> correct = std::nullopt;
  std::optional<int> match = std::nullopt;
  std::optional<int> precision = std::nullopt;
  std::optional<int> coverage = std::nullopt;
};

inline constexpr JudgeTask kQ = JudgeTask::kQa;
inline constexpr JudgeTask kC = JudgeTask::kCaption;

inline const std::array<ParseCase, 30> kParseCases = {{
    {kQ, R"({"correct": "yes", "score": 4})", true, true, 4},
    {kC, R"(Sure! {"precision": 2, "coverage": 5})", true, std::nullopt, std::nullopt, 2, 5},
    {kQ, R"({"correct": "yes", "score": 9})", false},
    {kQ, R"({"correct": "no", "score": 1})", true, false, 1},
    {kQ, R"({"correct": true, "score": 5})", true, true, 5},
    {kQ, R"({"correct": false, "score": 2})", true, false, 2},
    {kQ, R"({"correct": "YES", "score": 3})", true, true, 3},
    {kQ, R"({"correct": " No ", "score": 2})", true, false, 2},
    {kQ, "Here is my verdict:\n{\"correct\": \"no\", \"score\": 2}\nThanks!", true, false, 2},
    {kQ, "```json\n{\"correct\": \"yes\", \"score\": 5}\n```", true, true, 5},
    {kQ, R"({"score": 4})", false},
    {kQ, R"({"correct": "yes"})", false},
    {kQ, R"({"correct": "maybe", "score": 3})", false},
    {kQ, R"({"correct": "yes", "score": 0})", false},
    {kQ, R"({"correct": "yes", "score": 4.0})", true, true, 4},
    {kQ, R"({"correct": "yes", "score": 3.5})", false},
    {kQ, R"({"correct": "yes", "score": "4"})", false},
    {kQ, "no structured content at all", false},
    {kQ, "", false},
    {kQ, R"(Bad {json here} then {"correct": "no", "score": 3})", true, false, 3},
    {kQ, R"({"correct": "yes", "score": 4, "reason": "mentions {braces} and \"quotes\""})", true, true, 4},
    {kQ, R"({"correct": "yes", "score": 4)", false},
    {kQ, R"({"verdict": {"correct": "yes", "score": 4}})", false},
    {kQ, R"({"correct": "yes", "score": -2})", false},
    {kC, R"({"precision": 6, "coverage": 3})", false},
    {kC, R"({"precision": 3})", false},
    {kC, R"({"coverage": 4, "precision": 1, "notes": "x"})", true, std::nullopt, std::nullopt, 1, 4},
    {kC, "Precision 4, coverage 5.", false},
    {kC, R"({"correct": "yes", "score": 4})", false},
    {kC, R"(I'd say {"precision": 5, "coverage": 5} overall, {"precision": 1, "coverage": 1})", true,
     std::nullopt, std::nullopt, 5, 5},
}};

// True when `outcome` is exactly what `c` specifies.
inline bool matches(const ParseCase& c, const ParseOutcome& outcome) {
  if (!c.ok) return !outcome.ok() && !outcome.error.empty();
  if (!outcome.ok()) return false;
  const auto& s = *outcome.scores;
  return s.correct == c.correct && s.match == c.match && s.precision == c.precision && s.coverage == c.coverage;
}

}  // namespace vleval::testing
