#pragma once

// Conventional caption metrics over a shared tokenizer:
//   BLEU-4 (closest-reference brevity penalty, optional add-one smoothing),
//   ROUGE-L (LCS F1, max over references),
//   METEOR-lite (exact unigram matches only, no stemming or synonyms),
//   CIDEr-D (clipped TF-IDF cosine with Gaussian length penalty, x10 scale).

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vleval {

class TokenSequence;
TokenSequence tokenize(std::string_view text);

// Lowercased word tokens. Only `tokenize` constructs non-empty sequences.
class TokenSequence {
 public:
  TokenSequence() = default;

  const std::vector<std::string>& tokens() const { return tokens_; }
  size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& operator[](size_t i) const { return tokens_[i]; }
  auto begin() const { return tokens_.begin(); }
  auto end() const { return tokens_.end(); }

  // Space-joined tokens; tokenize(join()) reproduces the sequence.
  std::string join() const;

  bool operator==(const TokenSequence&) const = default;

 private:
  explicit TokenSequence(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
  friend TokenSequence tokenize(std::string_view text);

  std::vector<std::string> tokens_;
};

// NFKC-normalises, lowercases, replaces punctuation with spaces and splits on
// whitespace. Invalid UTF-8 sequences are replaced with U+FFFD first.
TokenSequence tokenize(std::string_view text);

using Ngram = std::vector<std::string>;

struct NgramMultiset {
  int n = 1;
  std::map<Ngram, int> counts;  // every count >= 1

  int total() const;
};

NgramMultiset ngram_counts(const TokenSequence& tokens, int n);

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct BleuOptions {
  bool add_one_smoothing = false;  // add one to numerator and denominator for n >= 2
};

struct ClippedPrecision {
  long long clipped = 0;  // candidate n-gram matches, capped by the max count in any reference
  long long total = 0;    // candidate n-grams
};

ClippedPrecision clipped_precision(const TokenSequence& candidate, std::span<const TokenSequence> references,
                                   int n);

// Sentence-level BLEU-4 with uniform weights.
double bleu4(const TokenSequence& candidate, std::span<const TokenSequence> references,
             const BleuOptions& options = {});

struct BleuSegment {
  const TokenSequence* candidate = nullptr;
  std::span<const TokenSequence> references;
};

// Corpus-level BLEU-4: clipped counts and lengths summed over all segments
// before the precisions and brevity penalty are formed.
double corpus_bleu4(std::span<const BleuSegment> segments, const BleuOptions& options = {});

double rouge_l(const TokenSequence& candidate, std::span<const TokenSequence> references);

struct MeteorAlignment {
  int matches = 0;
  int chunks = 0;
};

// Exact-match alignment with the maximum number of matches and, among those,
// the fewest chunks.
MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

double meteor_lite(const TokenSequence& candidate, std::span<const TokenSequence> references,
                   const MeteorParams& params = {});

struct CorpusStats {
  size_t document_count = 0;
  // Number of reference sets containing each n-gram, n in 1..4.
  std::map<Ngram, size_t> document_frequency;

  double idf(const Ngram& gram) const;
};

CorpusStats corpus_stats(const std::map<std::string, std::vector<TokenSequence>>& references);

struct CiderResult {
  std::map<std::string, double> per_item;  // each in [0, 10]
  double mean = 0.0;
};

struct CiderParams {
  double sigma = 6.0;
};

// CIDEr-D with document frequencies taken from the evaluated references.
// Raises InputError when the two maps do not share the same key set.
CiderResult cider_d(const std::map<std::string, TokenSequence>& candidates,
                    const std::map<std::string, std::vector<TokenSequence>>& references,
                    const CiderParams& params = {});

}  // namespace vleval
