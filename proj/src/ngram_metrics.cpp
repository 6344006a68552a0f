#include "vleval/ngram_metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "vleval/errors.hpp"

namespace vleval {

namespace {

void require_references(std::span<const TokenSequence> references, std::string_view metric) {
  if (references.empty()) {
    throw InputError(std::string(metric) + ": at least one reference is required");
  }
}

// Per-order clipped match counts and candidate n-gram totals.
struct BleuCounts {
  std::array<long long, 5> clipped{};
  std::array<long long, 5> total{};
};

BleuCounts bleu_counts(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  BleuCounts out;
  for (int n = 1; n <= 4; ++n) {
    auto cand = ngram_counts(candidate, n);
    std::map<Ngram, int> max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : ngram_counts(ref, n).counts) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    for (const auto& [gram, count] : cand.counts) {
      out.total[n] += count;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) out.clipped[n] += std::min(count, it->second);
    }
  }
  return out;
}

size_t closest_reference_length(size_t candidate_length, std::span<const TokenSequence> references) {
  size_t best = references.front().size();
  auto diff = [&](size_t len) {
    return len > candidate_length ? len - candidate_length : candidate_length - len;
  };
  for (const auto& ref : references) {
    size_t len = ref.size();
    if (diff(len) < diff(best) || (diff(len) == diff(best) && len < best)) best = len;
  }
  return best;
}

double bleu_from_counts(const BleuCounts& counts, size_t candidate_length, size_t reference_length,
                        const BleuOptions& options) {
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    double num = static_cast<double>(counts.clipped[n]);
    double den = static_cast<double>(counts.total[n]);
    if (options.add_one_smoothing && n >= 2) {
      num += 1.0;
      den += 1.0;
    }
    if (den == 0.0 || num == 0.0) return 0.0;
    log_sum += 0.25 * std::log(num / den);
  }
  double bp = 1.0;
  if (candidate_length < reference_length) {
    bp = std::exp(1.0 - static_cast<double>(reference_length) / static_cast<double>(candidate_length));
  }
  return bp * std::exp(log_sum);
}

// Branch-and-bound search for the alignment with the fewest chunks among the
// maximum-size exact alignments. Links are adjacent candidate positions mapped
// to adjacent reference positions; chunks = matches - links.
class MeteorSearch {
 public:
  MeteorSearch(const TokenSequence& cand, const TokenSequence& ref) : cand_(cand), ref_(ref) {
    std::unordered_map<std::string, int> word_ids;
    auto id_of = [&](const std::string& w) {
      auto [it, inserted] = word_ids.emplace(w, static_cast<int>(word_ids.size()));
      return it->second;
    };
    cand_word_.resize(cand.size());
    for (size_t i = 0; i < cand.size(); ++i) cand_word_[i] = id_of(cand[i]);
    ref_word_.resize(ref.size());
    for (size_t j = 0; j < ref.size(); ++j) ref_word_[j] = id_of(ref[j]);

    const size_t words = word_ids.size();
    std::vector<int> cand_count(words, 0), ref_count(words, 0);
    for (int w : cand_word_) ++cand_count[w];
    for (int w : ref_word_) ++ref_count[w];
    need_.assign(words, 0);
    for (size_t w = 0; w < words; ++w) {
      need_[w] = std::min(cand_count[w], ref_count[w]);
      total_matches_ += need_[w];
    }
    // remaining_[i] = occurrences of cand_word_[i] at positions >= i
    remaining_.resize(cand.size());
    std::vector<int> seen(words, 0);
    for (size_t i = cand.size(); i-- > 0;) remaining_[i] = ++seen[cand_word_[i]];
    ref_positions_.resize(words);
    for (size_t j = 0; j < ref.size(); ++j) ref_positions_[ref_word_[j]].push_back(j);
    used_.assign(ref.size(), false);
  }

  MeteorAlignment run() {
    if (total_matches_ == 0) return {0, 0};
    search(0, -1, 0, total_matches_);
    return {total_matches_, total_matches_ - best_links_};
  }

 private:
  static constexpr long kNodeBudget = 2'000'000;

  void search(size_t i, long prev_ref, int links, int to_match) {
    if (nodes_ >= kNodeBudget && best_links_ >= 0) return;
    ++nodes_;
    if (to_match == 0) {
      best_links_ = std::max(best_links_, links);
      return;
    }
    if (i >= cand_.size()) return;
    // Each remaining match adds at most one link; the first match of a fresh
    // run adds none, so this bound is admissible.
    if (best_links_ >= 0 && links + to_match <= best_links_) return;

    const int w = cand_word_[i];
    if (need_[w] > 0) {
      // Extending the current run first finds good incumbents early.
      if (prev_ref >= 0 && static_cast<size_t>(prev_ref + 1) < ref_.size()) {
        size_t j = static_cast<size_t>(prev_ref + 1);
        if (ref_word_[j] == w && !used_[j]) take(i, j, links + 1, to_match);
      }
      for (size_t j : ref_positions_[w]) {
        if (used_[j] || (prev_ref >= 0 && j == static_cast<size_t>(prev_ref + 1))) continue;
        take(i, j, links, to_match);
      }
    }
    // Skipping is allowed while later occurrences can still fill the quota.
    if (need_[w] == 0 || remaining_[i] - 1 >= need_[w]) search(i + 1, -1, links, to_match);
  }

  void take(size_t i, size_t j, int links, int to_match) {
    const int w = cand_word_[i];
    used_[j] = true;
    --need_[w];
    search(i + 1, static_cast<long>(j), links, to_match - 1);
    ++need_[w];
    used_[j] = false;
  }

  const TokenSequence& cand_;
  const TokenSequence& ref_;
  std::vector<int> cand_word_, ref_word_, need_, remaining_;
  std::vector<std::vector<size_t>> ref_positions_;
  std::vector<bool> used_;
  int total_matches_ = 0;
  int best_links_ = -1;
  long nodes_ = 0;
};

using WeightedVector = std::map<Ngram, double>;

struct CiderVectors {
  std::array<WeightedVector, 4> vec;
  std::array<double, 4> norm{};
};

CiderVectors cider_vectors(const TokenSequence& tokens, const CorpusStats& stats) {
  CiderVectors out;
  for (int n = 1; n <= 4; ++n) {
    double sq = 0.0;
    for (const auto& [gram, count] : ngram_counts(tokens, n).counts) {
      double v = count * stats.idf(gram);
      out.vec[n - 1][gram] = v;
      sq += v * v;
    }
    out.norm[n - 1] = std::sqrt(sq);
  }
  return out;
}

double cider_pair(const CiderVectors& cand, size_t cand_len, const CiderVectors& ref, size_t ref_len,
                  double sigma) {
  const double delta = static_cast<double>(cand_len) - static_cast<double>(ref_len);
  const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
  double sum = 0.0;
  for (size_t n = 0; n < 4; ++n) {
    if (cand.norm[n] == 0.0 || ref.norm[n] == 0.0) continue;
    double dot = 0.0;
    for (const auto& [gram, v] : cand.vec[n]) {
      auto it = ref.vec[n].find(gram);
      if (it != ref.vec[n].end()) dot += std::min(v, it->second) * it->second;
    }
    sum += dot / (cand.norm[n] * ref.norm[n]) * penalty;
  }
  return sum / 4.0;
}

}  // namespace

int NgramMultiset::total() const {
  int t = 0;
  for (const auto& [_, c] : counts) t += c;
  return t;
}

NgramMultiset ngram_counts(const TokenSequence& tokens, int n) {
  if (n < 1 || n > 4) throw InputError("ngram order must be in 1..4");
  NgramMultiset out;
  out.n = n;
  const auto& t = tokens.tokens();
  for (size_t i = 0; i + static_cast<size_t>(n) <= t.size(); ++i) {
    ++out.counts[Ngram(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i) + n)];
  }
  return out;
}

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ClippedPrecision clipped_precision(const TokenSequence& candidate, std::span<const TokenSequence> references,
                                   int n) {
  require_references(references, "clipped_precision");
  if (n < 1 || n > 4) throw InputError("n-gram order must be in 1..4");
  auto counts = bleu_counts(candidate, references);
  return {counts.clipped[n], counts.total[n]};
}

double bleu4(const TokenSequence& candidate, std::span<const TokenSequence> references,
             const BleuOptions& options) {
  require_references(references, "bleu4");
  if (candidate.empty()) return 0.0;
  return bleu_from_counts(bleu_counts(candidate, references), candidate.size(),
                          closest_reference_length(candidate.size(), references), options);
}

double corpus_bleu4(std::span<const BleuSegment> segments, const BleuOptions& options) {
  BleuCounts sum;
  size_t cand_len = 0;
  size_t ref_len = 0;
  for (const auto& seg : segments) {
    require_references(seg.references, "corpus_bleu4");
    auto c = bleu_counts(*seg.candidate, seg.references);
    for (int n = 1; n <= 4; ++n) {
      sum.clipped[n] += c.clipped[n];
      sum.total[n] += c.total[n];
    }
    cand_len += seg.candidate->size();
    ref_len += closest_reference_length(seg.candidate->size(), seg.references);
  }
  if (cand_len == 0) return 0.0;
  return bleu_from_counts(sum, cand_len, ref_len, options);
}

double rouge_l(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  require_references(references, "rouge_l");
  double best = 0.0;
  for (const auto& ref : references) {
    const auto l = static_cast<double>(lcs_length(candidate.tokens(), ref.tokens()));
    if (l == 0.0) continue;
    const double p = l / static_cast<double>(candidate.size());
    const double r = l / static_cast<double>(ref.size());
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference) {
  return MeteorSearch(candidate, reference).run();
}

double meteor_lite(const TokenSequence& candidate, std::span<const TokenSequence> references,
                   const MeteorParams& params) {
  require_references(references, "meteor_lite");
  double best = 0.0;
  for (const auto& ref : references) {
    auto align = meteor_align(candidate, ref);
    if (align.matches == 0) continue;
    const double p = static_cast<double>(align.matches) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(align.matches) / static_cast<double>(ref.size());
    const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
    const double frag = static_cast<double>(align.chunks) / static_cast<double>(align.matches);
    const double penalty = params.gamma * std::pow(frag, params.beta);
    best = std::max(best, fmean * (1.0 - penalty));
  }
  return best;
}

double CorpusStats::idf(const Ngram& gram) const {
  auto it = document_frequency.find(gram);
  const double df = it == document_frequency.end() ? 1.0 : static_cast<double>(std::max<size_t>(1, it->second));
  return std::log(static_cast<double>(document_count) / df);
}

CorpusStats corpus_stats(const std::map<std::string, std::vector<TokenSequence>>& references) {
  CorpusStats stats;
  stats.document_count = references.size();
  for (const auto& [_, refs] : references) {
    std::set<Ngram> seen;
    for (const auto& ref : refs) {
      for (int n = 1; n <= 4; ++n) {
        for (const auto& [gram, count] : ngram_counts(ref, n).counts) seen.insert(gram);
      }
    }
    for (const auto& gram : seen) ++stats.document_frequency[gram];
  }
  return stats;
}

CiderResult cider_d(const std::map<std::string, TokenSequence>& candidates,
                    const std::map<std::string, std::vector<TokenSequence>>& references,
                    const CiderParams& params) {
  std::string mismatch;
  for (const auto& [id, _] : candidates) {
    if (!references.count(id)) mismatch += " candidate-only:" + id;
  }
  for (const auto& [id, _] : references) {
    if (!candidates.count(id)) mismatch += " reference-only:" + id;
  }
  if (!mismatch.empty()) throw InputError("cider_d: key mismatch:" + mismatch);

  const auto stats = corpus_stats(references);
  CiderResult result;
  for (const auto& [id, cand] : candidates) {
    const auto& refs = references.at(id);
    if (refs.empty()) throw InputError("cider_d: item " + id + " has no references");
    const auto cand_vec = cider_vectors(cand, stats);
    double sum = 0.0;
    for (const auto& ref : refs) {
      sum += cider_pair(cand_vec, cand.size(), cider_vectors(ref, stats), ref.size(), params.sigma);
    }
    const double score = 10.0 * sum / static_cast<double>(refs.size());
    result.per_item[id] = score;
    result.mean += score;
  }
  if (!result.per_item.empty()) result.mean /= static_cast<double>(result.per_item.size());
  return result;
}

}  // namespace vleval
