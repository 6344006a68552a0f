#pragma once

#include <atomic>
#include <functional>
#include <string>

#include "vleval/judge.hpp"

namespace vleval {

// Chat-completion client: POST {model, temperature, messages} and read
// choices[0].message.content from the reply.
class HttpJudgeProvider : public JudgeProvider {
 public:
  // `endpoint` is a full URL such as https://api.example.com/v1/chat/completions.
  HttpJudgeProvider(std::string endpoint, std::string api_key, int timeout_seconds = 60);

  std::string complete(const ChatRequest& request) override;
  std::string identity() const override;

 private:
  std::string endpoint_;
  std::string api_key_;
  int timeout_seconds_;
};

// Deterministic offline judge. Every reply is a pure function of the request
// bytes, so runs against it are reproducible.
class HashMockJudgeProvider : public JudgeProvider {
 public:
  std::string complete(const ChatRequest& request) override;
  std::string identity() const override { return "mock-hash-judge/v1"; }
};

// Wraps a callable; used by tests to script replies and failures.
class FunctionJudgeProvider : public JudgeProvider {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;

  explicit FunctionJudgeProvider(Fn fn, std::string identity = "function-judge")
      : fn_(std::move(fn)), identity_(std::move(identity)) {}

  std::string complete(const ChatRequest& request) override {
    ++calls_;
    return fn_(request);
  }
  std::string identity() const override { return identity_; }
  size_t calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::string identity_;
  std::atomic<size_t> calls_{0};
};

}  // namespace vleval
