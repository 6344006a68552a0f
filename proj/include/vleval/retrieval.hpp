#pragma once

// Embedding-similarity evaluation: text-to-video and video-to-text retrieval
// over generated captions, and action recognition by ranking label texts.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vleval/corpus.hpp"

namespace vleval {

// Unit-normalised embedding, or the zero vector (flagged) for empty text or
// a degenerate provider output.
struct EmbeddingVector {
  std::vector<double> values;
  bool zero = false;

  size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Raw (unnormalised) vectors, one per input text, in input order. Throws
// ProviderError for transient failures; those are retried by embed_batch.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
  virtual std::string identity() const = 0;
};

struct EmbedOptions {
  size_t batch_size = 64;
  int parallelism = 1;
  int max_attempts = 3;
  int retry_backoff_ms = 250;
};

// Empty or whitespace-only texts are never sent to the provider and come back
// as flagged zero vectors. Non-empty outputs are L2-normalised.
std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         EmbeddingProvider& provider,
                                         const EmbedOptions& options = {});

class SimilarityMatrix {
 public:
  // Entry value for any pair involving a zero vector.
  static constexpr double kMissing = -std::numeric_limits<double>::infinity();

  SimilarityMatrix() = default;
  SimilarityMatrix(size_t rows, size_t cols, std::vector<double> values);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double at(size_t r, size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> row(size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> values_;
};

// Cosine similarity of unit vectors. Throws InputError on dimension mismatch.
SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> queries,
                                   std::span<const EmbeddingVector> candidates);

// 1-based rank of `truth` within a similarity row: candidates with a higher
// score, or an equal score and a lower index, rank ahead of it.
size_t candidate_rank(std::span<const double> row, size_t truth);

enum class RetrievalDirection { kT2V, kV2T, kAction };

std::string_view to_string(RetrievalDirection direction);

struct RetrievalReport {
  RetrievalDirection direction = RetrievalDirection::kT2V;
  std::map<int, double> top_k_accuracy;  // k -> percent
  size_t n_queries = 0;
  size_t n_candidates = 0;
  size_t zero_vectors = 0;  // queries and candidates that embedded to zero
  std::vector<std::string> notes;
};

// Percent of queries whose correct candidate ranks within the top k. Rows or
// truth entries at kMissing count as misses. Requires 1 <= k <= cols and a
// truth index per row.
RetrievalReport topk_accuracy(const SimilarityMatrix& sim, std::span<const size_t> truth,
                              std::span<const int> ks,
                              RetrievalDirection direction = RetrievalDirection::kT2V);

struct RetrievalOptions {
  std::vector<int> ks{1, 5};
  // Evaluate on a fixed-seed random subset of this many items (t2v/v2t only).
  std::optional<size_t> gallery_size;
  uint64_t seed = 0;
  EmbedOptions embed;
};

// Ground-truth text (first reference) retrieves the predicted caption.
RetrievalReport eval_t2v(std::span<const CaptionPair> pairs, EmbeddingProvider& provider,
                         const RetrievalOptions& options = {});

// Predicted caption retrieves the ground-truth text (first reference).
RetrievalReport eval_v2t(std::span<const CaptionPair> pairs, EmbeddingProvider& provider,
                         const RetrievalOptions& options = {});

// Each response is ranked against every label of the closed label set.
RetrievalReport eval_action(std::span<const ActionPair> pairs, const LabelSet& labels,
                            EmbeddingProvider& provider, const RetrievalOptions& options = {});

nlohmann::ordered_json to_json(const RetrievalReport& report);

}  // namespace vleval
