#include "vleval/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "vleval/errors.hpp"

namespace vleval {

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::vector<std::vector<double>> embed_with_retry(EmbeddingProvider& provider,
                                                  std::span<const std::string> texts,
                                                  const EmbedOptions& options) {
  std::string last_error;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      auto out = provider.embed(texts);
      if (out.size() != texts.size()) {
        throw ProviderError("embedding provider returned " + std::to_string(out.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
      }
      return out;
    } catch (const ProviderError& e) {
      last_error = e.what();
    }
    if (attempt < attempts && options.retry_backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(options.retry_backoff_ms * attempt));
    }
  }
  throw ProviderError("embedding provider failed after " + std::to_string(attempts) +
                      " attempts: " + last_error);
}

EmbeddingVector normalize(std::vector<double> raw) {
  double sq = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw ProviderError("embedding provider returned a non-finite value");
    sq += v * v;
  }
  EmbeddingVector out;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) {
    out.values.assign(raw.size(), 0.0);
    out.zero = true;
    return out;
  }
  for (double& v : raw) v /= norm;
  out.values = std::move(raw);
  return out;
}

std::vector<size_t> sample_gallery(size_t n, const RetrievalOptions& options) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (!options.gallery_size || *options.gallery_size >= n) return idx;
  std::mt19937_64 rng(options.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(*options.gallery_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// k larger than the candidate pool is clamped; every finite row then hits.
std::vector<int> clamp_ks(std::span<const int> ks, size_t cols, std::vector<std::string>& notes) {
  std::vector<int> out;
  for (int k : ks) {
    if (k < 1) throw InputError("top-k: k must be >= 1");
    if (static_cast<size_t>(k) > cols) {
      notes.push_back("k=" + std::to_string(k) + " exceeds the " + std::to_string(cols) +
                      " candidates; evaluated as k=" + std::to_string(cols));
    }
    out.push_back(std::min<int>(k, static_cast<int>(cols)));
  }
  return out;
}

// Reports accuracy under the requested k labels after clamping to the pool size.
RetrievalReport clamped_topk(const SimilarityMatrix& sim, std::span<const size_t> truth,
                             std::span<const int> requested, RetrievalDirection direction);

RetrievalReport caption_retrieval(std::span<const CaptionPair> pairs, EmbeddingProvider& provider,
                                  const RetrievalOptions& options, RetrievalDirection direction) {
  if (pairs.empty()) throw InputError("retrieval: no evaluation pairs");
  const auto chosen = sample_gallery(pairs.size(), options);
  std::vector<std::string> truth_texts, predicted;
  for (size_t i : chosen) {
    truth_texts.push_back(pairs[i].ground_truth.references.front());
    predicted.push_back(pairs[i].prediction.response);
  }
  auto truth_vecs = embed_batch(truth_texts, provider, options.embed);
  auto pred_vecs = embed_batch(predicted, provider, options.embed);
  const bool t2v = direction == RetrievalDirection::kT2V;
  auto sim = t2v ? similarity_matrix(truth_vecs, pred_vecs) : similarity_matrix(pred_vecs, truth_vecs);

  std::vector<size_t> truth(chosen.size());
  std::iota(truth.begin(), truth.end(), 0);
  auto report = clamped_topk(sim, truth, options.ks, direction);
  for (const auto& v : truth_vecs) report.zero_vectors += v.zero ? 1 : 0;
  for (const auto& v : pred_vecs) report.zero_vectors += v.zero ? 1 : 0;
  report.notes.push_back("ground truth uses the first reference of each item");
  if (chosen.size() < pairs.size()) {
    report.notes.push_back("gallery sampled: " + std::to_string(chosen.size()) + " of " +
                           std::to_string(pairs.size()) + " items, seed " +
                           std::to_string(options.seed));
  }
  return report;
}

}  // namespace

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         EmbeddingProvider& provider, const EmbedOptions& options) {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<size_t> pending;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (blank(texts[i])) {
      out[i].zero = true;
    } else {
      pending.push_back(i);
    }
  }

  const size_t batch = std::max<size_t>(1, options.batch_size);
  const size_t n_chunks = (pending.size() + batch - 1) / batch;
  std::vector<std::vector<std::vector<double>>> raw(n_chunks);
  std::atomic<size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (!abort) {
      const size_t c = next++;
      if (c >= n_chunks) return;
      std::vector<std::string> chunk;
      for (size_t k = c * batch; k < std::min(pending.size(), (c + 1) * batch); ++k) {
        chunk.push_back(texts[pending[k]]);
      }
      try {
        raw[c] = embed_with_retry(provider, chunk, options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };
  const size_t threads = std::min<size_t>(std::max(1, options.parallelism), std::max<size_t>(1, n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::optional<size_t> dim;
  for (size_t c = 0; c < n_chunks; ++c) {
    for (size_t k = 0; k < raw[c].size(); ++k) {
      auto& v = raw[c][k];
      if (v.empty()) throw ProviderError("embedding provider returned an empty vector");
      if (!dim) dim = v.size();
      if (v.size() != *dim) {
        throw ProviderError("embedding dimension mismatch within batch: " + std::to_string(v.size()) +
                            " vs " + std::to_string(*dim));
      }
      out[pending[c * batch + k]] = normalize(std::move(v));
    }
  }
  // Zero vectors for empty texts take the batch dimension.
  for (auto& v : out) {
    if (v.zero && v.values.empty() && dim) v.values.assign(*dim, 0.0);
  }
  return out;
}

SimilarityMatrix::SimilarityMatrix(size_t rows, size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw InputError("similarity matrix: value count does not match shape");
}

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> queries,
                                   std::span<const EmbeddingVector> candidates) {
  std::optional<size_t> dim;
  auto check = [&](const EmbeddingVector& v) {
    if (v.zero && v.values.empty()) return;
    if (!dim) dim = v.dim();
    if (v.dim() != *dim) {
      throw InputError("similarity matrix: dimension mismatch (" + std::to_string(v.dim()) + " vs " +
                       std::to_string(*dim) + ")");
    }
  };
  for (const auto& q : queries) check(q);
  for (const auto& c : candidates) check(c);

  std::vector<double> values(queries.size() * candidates.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    for (size_t j = 0; j < candidates.size(); ++j) {
      double s = SimilarityMatrix::kMissing;
      if (!queries[i].zero && !candidates[j].zero) {
        s = 0.0;
        for (size_t d = 0; d < queries[i].dim(); ++d) s += queries[i].values[d] * candidates[j].values[d];
      }
      values[i * candidates.size() + j] = s;
    }
  }
  return SimilarityMatrix(queries.size(), candidates.size(), std::move(values));
}

size_t candidate_rank(std::span<const double> row, size_t truth) {
  const double target = row[truth];
  size_t rank = 1;
  for (size_t j = 0; j < row.size(); ++j) {
    if (row[j] > target || (row[j] == target && j < truth)) ++rank;
  }
  return rank;
}

std::string_view to_string(RetrievalDirection direction) {
  switch (direction) {
    case RetrievalDirection::kT2V: return "t2v";
    case RetrievalDirection::kV2T: return "v2t";
    case RetrievalDirection::kAction: return "action";
  }
  return "?";
}

RetrievalReport topk_accuracy(const SimilarityMatrix& sim, std::span<const size_t> truth,
                              std::span<const int> ks, RetrievalDirection direction) {
  if (sim.rows() == 0) throw InputError("top-k: no queries");
  if (truth.size() != sim.rows()) {
    throw InputError("top-k: truth has " + std::to_string(truth.size()) + " entries for " +
                     std::to_string(sim.rows()) + " queries");
  }
  for (int k : ks) {
    if (k < 1 || static_cast<size_t>(k) > sim.cols()) {
      throw InputError("top-k: k=" + std::to_string(k) + " outside 1.." + std::to_string(sim.cols()));
    }
  }
  std::vector<size_t> ranks(sim.rows(), 0);  // 0 = miss at every k
  for (size_t r = 0; r < sim.rows(); ++r) {
    if (truth[r] >= sim.cols()) {
      throw InputError("top-k: truth index " + std::to_string(truth[r]) + " out of range for query " +
                       std::to_string(r));
    }
    auto row = sim.row(r);
    if (row[truth[r]] == SimilarityMatrix::kMissing) continue;
    ranks[r] = candidate_rank(row, truth[r]);
  }
  RetrievalReport report;
  report.direction = direction;
  report.n_queries = sim.rows();
  report.n_candidates = sim.cols();
  for (int k : ks) {
    size_t hits = 0;
    for (size_t rank : ranks) hits += (rank != 0 && rank <= static_cast<size_t>(k)) ? 1 : 0;
    report.top_k_accuracy[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(sim.rows());
  }
  return report;
}

namespace {

RetrievalReport clamped_topk(const SimilarityMatrix& sim, std::span<const size_t> truth,
                             std::span<const int> requested, RetrievalDirection direction) {
  std::vector<std::string> notes;
  auto ks = clamp_ks(requested, sim.cols(), notes);
  auto computed = topk_accuracy(sim, truth, ks, direction);
  RetrievalReport report = computed;
  report.top_k_accuracy.clear();
  for (size_t i = 0; i < ks.size(); ++i) report.top_k_accuracy[requested[i]] = computed.top_k_accuracy[ks[i]];
  report.notes = std::move(notes);
  return report;
}

}  // namespace

RetrievalReport eval_t2v(std::span<const CaptionPair> pairs, EmbeddingProvider& provider,
                         const RetrievalOptions& options) {
  return caption_retrieval(pairs, provider, options, RetrievalDirection::kT2V);
}

RetrievalReport eval_v2t(std::span<const CaptionPair> pairs, EmbeddingProvider& provider,
                         const RetrievalOptions& options) {
  return caption_retrieval(pairs, provider, options, RetrievalDirection::kV2T);
}

RetrievalReport eval_action(std::span<const ActionPair> pairs, const LabelSet& labels,
                            EmbeddingProvider& provider, const RetrievalOptions& options) {
  if (pairs.empty()) throw InputError("action recognition: no evaluation pairs");
  if (labels.labels.empty()) throw InputError("action recognition: empty label set");
  std::vector<std::string> responses;
  std::vector<size_t> truth;
  for (const auto& p : pairs) {
    auto idx = labels.index_of(p.ground_truth.label);
    if (!idx) {
      throw InputError("action recognition: item " + p.ground_truth.item_id + " has label \"" +
                       p.ground_truth.label + "\" outside the label set");
    }
    truth.push_back(*idx);
    responses.push_back(p.prediction.response);
  }
  auto response_vecs = embed_batch(responses, provider, options.embed);
  auto label_vecs = embed_batch(labels.labels, provider, options.embed);
  auto sim = similarity_matrix(response_vecs, label_vecs);

  auto report = clamped_topk(sim, truth, options.ks, RetrievalDirection::kAction);
  for (const auto& v : response_vecs) report.zero_vectors += v.zero ? 1 : 0;
  for (const auto& v : label_vecs) report.zero_vectors += v.zero ? 1 : 0;
  return report;
}

nlohmann::ordered_json to_json(const RetrievalReport& report) {
  nlohmann::ordered_json acc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.top_k_accuracy) acc[std::to_string(k)] = v;
  return {{"direction", std::string(to_string(report.direction))},
          {"top_k_accuracy", acc},
          {"n_queries", report.n_queries},
          {"n_candidates", report.n_candidates},
          {"zero_vectors", report.zero_vectors},
          {"notes", report.notes}};
}

}  // namespace vleval
