#include "vleval/retrieval_providers.hpp"

#include <httplib.h>

#include "http_util.hpp"
#include "vleval/errors.hpp"
#include "vleval/hashing.hpp"
#include "vleval/jsonl.hpp"
#include "vleval/ngram_metrics.hpp"

namespace vleval {

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path)
    : identity_("file:" + sha256_file_hex(path).substr(0, 16)) {
  const auto src = path.string();
  for (const auto& line : read_jsonl(path)) {
    auto key = require_string(line, "text_sha256", src);
    auto it = line.value.find("vector");
    if (it == line.value.end() || !it->is_array() || it->empty()) {
      throw InputError(src + ":" + std::to_string(line.line_number) +
                       ": \"vector\" must be a non-empty list of numbers");
    }
    std::vector<double> values;
    for (const auto& x : *it) {
      if (!x.is_number()) {
        throw InputError(src + ":" + std::to_string(line.line_number) + ": non-numeric vector entry");
      }
      values.push_back(x.get<double>());
    }
    if (!vectors_.emplace(key, std::move(values)).second) {
      throw InputError(src + ":" + std::to_string(line.line_number) + ": duplicate text_sha256 " + key);
    }
  }
}

std::vector<std::vector<double>> FileEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = vectors_.find(sha256_hex(t));
    if (it == vectors_.end()) {
      throw InputError("precomputed embeddings have no vector for text \"" + t + "\"");
    }
    out.push_back(it->second);
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::string api_key,
                                             std::string model_name, int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_name_(std::move(model_name)),
      timeout_seconds_(timeout_seconds) {
  detail::split_url(endpoint_);
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
  const auto url = detail::split_url(endpoint_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  nlohmann::json body = {{"input", std::vector<std::string>(texts.begin(), texts.end())}};
  if (!model_name_.empty()) body["model"] = model_name_;
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("embedding endpoint " + endpoint_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ProviderError("embedding endpoint " + endpoint_ + " returned HTTP " + std::to_string(res->status));
  }
  auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded()) throw ProviderError("embedding endpoint returned a non-JSON body");
  std::vector<std::vector<double>> out;
  try {
    for (const auto& item : reply.at("data")) {
      out.push_back(item.at("embedding").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("embedding endpoint reply lacks data[].embedding");
  }
  if (out.size() != texts.size()) {
    throw ProviderError("embedding endpoint returned " + std::to_string(out.size()) + " vectors for " +
                        std::to_string(texts.size()) + " inputs");
  }
  return out;
}

std::string HttpEmbeddingProvider::identity() const {
  return "http:" + endpoint_ + (model_name_.empty() ? "" : "#" + model_name_);
}

std::vector<std::vector<double>> HashingEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    for (const auto& token : tokenize(t)) {
      const auto h = sha256_hex(token);
      const auto bucket = std::stoull(h.substr(0, 15), nullptr, 16) % dim_;
      v[bucket] += (h[15] >= '8') ? -1.0 : 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string embedding_file_line(std::string_view text, std::span<const double> vector) {
  nlohmann::ordered_json j = {{"text_sha256", sha256_hex(text)},
                              {"vector", std::vector<double>(vector.begin(), vector.end())}};
  return j.dump();
}

}  // namespace vleval
