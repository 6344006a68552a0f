#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>

#include "vleval/retrieval.hpp"

namespace vleval {

// Precomputed vectors keyed by SHA-256 of the exact text, one record per
// line: {"text_sha256": hex, "vector": [numbers...]}. Lookups of unknown
// texts raise InputError.
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path);

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string identity() const override { return identity_; }
  size_t size() const { return vectors_.size(); }

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::string identity_;
};

// POST {"input": [...], "model": ...} and read data[i].embedding.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string api_key, std::string model_name = {},
                        int timeout_seconds = 60);

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string identity() const override;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::string model_name_;
  int timeout_seconds_;
};

// Feature-hashed bag of tokens with signed buckets. Deterministic and offline.
class HashingEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(size_t dim = 256) : dim_(dim) {}

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string identity() const override { return "hashing-bow/" + std::to_string(dim_); }

 private:
  size_t dim_;
};

class FunctionEmbeddingProvider : public EmbeddingProvider {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;

  explicit FunctionEmbeddingProvider(Fn fn, std::string identity = "function-embedder")
      : fn_(std::move(fn)), identity_(std::move(identity)) {}

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(fn_(t));
    return out;
  }
  std::string identity() const override { return identity_; }

 private:
  Fn fn_;
  std::string identity_;
};

// Serialises vectors in the precomputed-file format.
std::string embedding_file_line(std::string_view text, std::span<const double> vector);

}  // namespace vleval
