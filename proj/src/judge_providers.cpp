#include "vleval/judge_providers.hpp"

#include <httplib.h>

#include "http_util.hpp"
#include "vleval/errors.hpp"
#include "vleval/hashing.hpp"

namespace vleval {

HttpJudgeProvider::HttpJudgeProvider(std::string endpoint, std::string api_key, int timeout_seconds)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  detail::split_url(endpoint_);
}

std::string HttpJudgeProvider::complete(const ChatRequest& request) {
  const auto url = detail::split_url(endpoint_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(url.path, headers, to_json(request).dump(), "application/json");
  if (!res) {
    throw ProviderError("judge endpoint " + endpoint_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ProviderError("judge endpoint " + endpoint_ + " returned HTTP " + std::to_string(res->status));
  }
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw ProviderError("judge endpoint returned a non-JSON body");
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("judge endpoint reply lacks choices[0].message.content");
  }
}

std::string HttpJudgeProvider::identity() const { return "http:" + endpoint_; }

std::string HashMockJudgeProvider::complete(const ChatRequest& request) {
  const std::string digest = sha256_hex(to_json(request).dump());
  auto nibble = [&](size_t i) {
    char c = digest[i];
    return c <= '9' ? c - '0' : c - 'a' + 10;
  };
  // The caption template opens with this sentence; QA prompts never do.
  bool caption = false;
  for (const auto& m : request.messages) {
    if (m.role == "user") {
      caption = m.content.rfind("Grade a predicted caption", 0) == 0;
      break;
    }
  }
  if (caption) {
    return "{\"precision\": " + std::to_string(1 + nibble(0) % 5) +
           ", \"coverage\": " + std::to_string(1 + nibble(1) % 5) + "}";
  }
  const bool correct = nibble(0) % 2 == 0;
  const int score = correct ? 3 + nibble(1) % 3 : 1 + nibble(1) % 3;
  return std::string("{\"correct\": \"") + (correct ? "yes" : "no") +
         "\", \"score\": " + std::to_string(score) + "}";
}

}  // namespace vleval
