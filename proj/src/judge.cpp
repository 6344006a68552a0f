#include "vleval/judge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "vleval/errors.hpp"
#include "vleval/hashing.hpp"
#include "vleval/jsonl.hpp"
#include "vleval/templates.hpp"

namespace vleval {

namespace {

constexpr std::string_view kQaReminder =
    "Your previous reply could not be read. Reply with exactly one line of JSON and nothing else, "
    "with \"correct\" set to \"yes\" or \"no\" and \"score\" set to an integer from 1 to 5, "
    "for example {\"correct\": \"yes\", \"score\": 4}";

constexpr std::string_view kCaptionReminder =
    "Your previous reply could not be read. Reply with exactly one line of JSON and nothing else, "
    "with \"precision\" and \"coverage\" each set to an integer from 1 to 5, "
    "for example {\"precision\": 3, \"coverage\": 4}";

// Shortest run of '#' (at least five) that occurs in none of the texts, so
// embedded content can never close its own block.
std::string choose_fence(std::initializer_list<std::string_view> texts) {
  std::string fence = "#####";
  auto clashes = [&] {
    return std::any_of(texts.begin(), texts.end(),
                       [&](std::string_view t) { return t.find(fence) != std::string_view::npos; });
  };
  while (clashes()) fence += '#';
  return fence;
}

// Single-pass "{{name}}" substitution; substituted text is never rescanned.
std::string render_template(std::string_view tpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> vars) {
  std::string out;
  size_t pos = 0;
  while (pos < tpl.size()) {
    size_t open = tpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    size_t close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    out.append(tpl.substr(pos, open - pos));
    std::string_view name = tpl.substr(open + 2, close - open - 2);
    auto it = std::find_if(vars.begin(), vars.end(), [&](const auto& v) { return v.first == name; });
    if (it == vars.end()) {
      out.append(tpl.substr(open, close + 2 - open));
    } else {
      out.append(it->second);
    }
    pos = close + 2;
  }
  return out;
}

// End index (exclusive) of the brace-balanced span starting at `open`, or npos.
size_t balanced_end(std::string_view s, size_t open) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<nlohmann::json> first_object(std::string_view reply) {
  for (size_t open = reply.find('{'); open != std::string_view::npos;
       open = reply.find('{', open + 1)) {
    size_t end = balanced_end(reply, open);
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(reply.substr(open, end - open), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

std::string lower_trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Integer score in 1..5, or an error message.
std::optional<int> score_field(const nlohmann::json& obj, const char* key, std::string& error) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    error = std::string("missing key \"") + key + "\"";
    return std::nullopt;
  }
  long long value = 0;
  if (it->is_number_integer()) {
    value = it->get<long long>();
  } else if (it->is_number_float() && std::isfinite(it->get<double>()) &&
             it->get<double>() == std::floor(it->get<double>())) {
    value = static_cast<long long>(it->get<double>());
  } else {
    error = std::string("\"") + key + "\" is not an integer";
    return std::nullopt;
  }
  if (value < 1 || value > 5) {
    error = std::string("\"") + key + "\" = " + std::to_string(value) + " outside 1..5";
    return std::nullopt;
  }
  return static_cast<int>(value);
}

bool scores_fit_task(const JudgeVerdict& v, JudgeTask task) {
  if (!v.valid) return !v.correct && !v.match && !v.precision && !v.coverage;
  auto in_range = [](const std::optional<int>& s) { return s && *s >= 1 && *s <= 5; };
  if (task == JudgeTask::kQa) {
    return v.correct.has_value() && in_range(v.match) && !v.precision && !v.coverage;
  }
  return in_range(v.precision) && in_range(v.coverage) && !v.correct && !v.match;
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

JudgeVerdict verdict_from_json(const nlohmann::json& j) {
  JudgeVerdict v;
  v.item_id = j.at("item_id").get<std::string>();
  v.correct = optional_from<bool>(j, "correct");
  v.match = optional_from<int>(j, "match");
  v.precision = optional_from<int>(j, "precision");
  v.coverage = optional_from<int>(j, "coverage");
  v.raw_reply = j.at("raw_reply").get<std::string>();
  v.attempts = j.at("attempts").get<int>();
  v.valid = j.at("valid").get<bool>();
  return v;
}

std::string call_provider(JudgeProvider& provider, const ChatRequest& request,
                          const JudgeConfig& config, std::atomic<size_t>& calls,
                          const std::string& item_id) {
  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    try {
      ++calls;
      return provider.complete(request);
    } catch (const ProviderError& e) {
      last_error = e.what();
    }
    if (attempt < config.max_attempts && config.retry_backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config.retry_backoff_ms * attempt));
    }
  }
  throw ProviderError("judge provider failed for item \"" + item_id + "\" after " +
                      std::to_string(config.max_attempts) + " attempts: " + last_error);
}

JudgeVerdict judge_one(const JudgePrompt& prompt, const JudgeConfig& config, JudgeProvider& provider,
                       std::atomic<size_t>& calls) {
  ChatRequest request{config.model_name, config.temperature,
                      {{"system", prompt.system_text}, {"user", prompt.user_text}}};
  JudgeVerdict verdict;
  verdict.item_id = prompt.item_id;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    std::string reply = call_provider(provider, request, config, calls, prompt.item_id);
    auto outcome = parse_verdict(reply, prompt.task);
    verdict.attempts = attempt;
    verdict.raw_reply = reply;
    if (outcome.ok()) {
      verdict.correct = outcome.scores->correct;
      verdict.match = outcome.scores->match;
      verdict.precision = outcome.scores->precision;
      verdict.coverage = outcome.scores->coverage;
      verdict.valid = true;
      return verdict;
    }
    request.messages.push_back({"assistant", std::move(reply)});
    request.messages.push_back({"user", std::string(format_reminder(prompt.task))});
  }
  verdict.valid = false;
  return verdict;
}

}  // namespace

std::string_view to_string(JudgeTask task) { return task == JudgeTask::kQa ? "qa" : "caption"; }

std::optional<JudgeTask> parse_judge_task(std::string_view name) {
  if (name == "qa") return JudgeTask::kQa;
  if (name == "caption") return JudgeTask::kCaption;
  return std::nullopt;
}

std::string_view judge_template_version() { return templates::kVersion; }

JudgePrompt build_qa_prompt(const QaItem& item, const PredictionRecord& prediction) {
  const std::string fence = choose_fence({item.question, item.answer, prediction.response});
  JudgePrompt prompt;
  prompt.task = JudgeTask::kQa;
  prompt.item_id = item.item_id;
  prompt.system_text = std::string(templates::kSystem);
  prompt.user_text = render_template(templates::kQa, {{"fence", fence},
                                                      {"question", item.question},
                                                      {"answer", item.answer},
                                                      {"prediction", prediction.response}});
  return prompt;
}

JudgePrompt build_caption_prompt(const CaptionItem& item, const PredictionRecord& prediction) {
  std::string all_refs;
  for (const auto& r : item.references) all_refs += r + "\n";
  const std::string fence = choose_fence({all_refs, prediction.response});
  std::string refs;
  for (size_t i = 0; i < item.references.size(); ++i) {
    if (i > 0) refs += '\n';
    refs += "[" + std::to_string(i + 1) + "] " + item.references[i];
  }
  JudgePrompt prompt;
  prompt.task = JudgeTask::kCaption;
  prompt.item_id = item.item_id;
  prompt.system_text = std::string(templates::kSystem);
  prompt.user_text = render_template(
      templates::kCaption, {{"fence", fence}, {"references", refs}, {"prediction", prediction.response}});
  return prompt;
}

std::string_view format_reminder(JudgeTask task) {
  return task == JudgeTask::kQa ? kQaReminder : kCaptionReminder;
}

ParseOutcome parse_verdict(std::string_view raw_reply, JudgeTask task) {
  ParseOutcome out;
  auto obj = first_object(raw_reply);
  if (!obj) {
    out.error = "no JSON object in reply";
    return out;
  }
  VerdictScores scores;
  if (task == JudgeTask::kQa) {
    auto it = obj->find("correct");
    if (it == obj->end()) {
      out.error = "missing key \"correct\"";
      return out;
    }
    if (it->is_boolean()) {
      scores.correct = it->get<bool>();
    } else if (it->is_string()) {
      auto s = lower_trim(it->get<std::string>());
      if (s == "yes" || s == "true") {
        scores.correct = true;
      } else if (s == "no" || s == "false") {
        scores.correct = false;
      }
    }
    if (!scores.correct) {
      out.error = "\"correct\" must be \"yes\" or \"no\"";
      return out;
    }
    scores.match = score_field(*obj, "score", out.error);
    if (!scores.match) return out;
  } else {
    scores.precision = score_field(*obj, "precision", out.error);
    if (!scores.precision) return out;
    scores.coverage = score_field(*obj, "coverage", out.error);
    if (!scores.coverage) return out;
  }
  out.scores = scores;
  return out;
}

void validate(const JudgeConfig& config) {
  if (!(config.temperature >= 0.0)) throw ConfigError("judge temperature must be >= 0");
  if (config.max_attempts < 1) throw ConfigError("judge max_attempts must be >= 1");
  if (config.parallelism < 1) throw ConfigError("judge parallelism must be >= 1");
}

nlohmann::ordered_json to_json(const ChatRequest& request) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"model", request.model}, {"temperature", request.temperature}, {"messages", messages}};
}

JudgeReport summarize(JudgeTask task, std::span<const JudgeVerdict> verdicts) {
  JudgeReport report;
  report.task = task;
  report.n_items = verdicts.size();
  long long correct = 0, match = 0, precision = 0, coverage = 0;
  for (const auto& v : verdicts) {
    if (!v.valid) continue;
    ++report.n_valid;
    if (task == JudgeTask::kQa) {
      correct += v.correct.value_or(false) ? 1 : 0;
      match += v.match.value_or(0);
    } else {
      precision += v.precision.value_or(0);
      coverage += v.coverage.value_or(0);
    }
  }
  if (report.n_valid == 0) return report;
  const auto n = static_cast<double>(report.n_valid);
  if (task == JudgeTask::kQa) {
    report.accuracy = 100.0 * static_cast<double>(correct) / n;
    report.mean_match = static_cast<double>(match) / n;
  } else {
    report.mean_precision = static_cast<double>(precision) / n;
    report.mean_coverage = static_cast<double>(coverage) / n;
  }
  return report;
}

VerdictCache::VerdictCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string VerdictCache::key(std::string_view model_name, const JudgePrompt& prompt) {
  std::string material;
  material.append(model_name).push_back('\0');
  material.append(to_string(prompt.task)).push_back('\0');
  material.append(prompt.system_text).push_back('\0');
  material.append(prompt.user_text);
  return sha256_hex(material);
}

std::filesystem::path VerdictCache::path_for(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<JudgeVerdict> VerdictCache::get(const std::string& key, JudgeTask task) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    if (j.at("key").get<std::string>() != key) return std::nullopt;
    if (j.at("task").get<std::string>() != to_string(task)) return std::nullopt;
    auto v = verdict_from_json(j.at("verdict"));
    if (v.attempts < 1 || !scores_fit_task(v, task)) return std::nullopt;
    // The stored reply must still parse to the stored scores.
    if (v.valid) {
      auto reparsed = parse_verdict(v.raw_reply, task);
      if (!reparsed.ok() || reparsed.scores->correct != v.correct ||
          reparsed.scores->match != v.match || reparsed.scores->precision != v.precision ||
          reparsed.scores->coverage != v.coverage) {
        return std::nullopt;
      }
    }
    return v;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void VerdictCache::put(const std::string& key, JudgeTask task, const JudgeVerdict& verdict) const {
  nlohmann::ordered_json j = {{"key", key},
                              {"task", std::string(to_string(task))},
                              {"raw_reply", verdict.raw_reply},
                              {"verdict", to_json(verdict)}};
  write_file_atomic(path_for(key), j.dump(2) + "\n");
}

JudgeRun evaluate(std::span<const JudgePrompt> prompts, const JudgeConfig& config,
                  JudgeProvider& provider) {
  validate(config);
  std::optional<VerdictCache> cache;
  if (!config.cache_dir.empty()) cache.emplace(config.cache_dir);

  JudgeRun run;
  run.verdicts.resize(prompts.size());
  std::atomic<size_t> next{0}, calls{0}, hits{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (!abort) {
      const size_t i = next++;
      if (i >= prompts.size()) return;
      const auto& prompt = prompts[i];
      try {
        std::string key;
        if (cache) {
          key = VerdictCache::key(config.model_name, prompt);
          if (auto cached = cache->get(key, prompt.task)) {
            cached->item_id = prompt.item_id;
            run.verdicts[i] = std::move(*cached);
            ++hits;
            continue;
          }
        }
        auto verdict = judge_one(prompt, config, provider, calls);
        if (cache) cache->put(key, prompt.task, verdict);
        run.verdicts[i] = std::move(verdict);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };

  const size_t threads =
      std::min<size_t>(static_cast<size_t>(config.parallelism), std::max<size_t>(1, prompts.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  run.provider_calls = calls;
  run.cache_hits = hits;
  const JudgeTask task = prompts.empty() ? JudgeTask::kQa : prompts.front().task;
  run.report = summarize(task, run.verdicts);
  return run;
}

JudgeRun evaluate(std::span<const QaPair> pairs, const JudgeConfig& config, JudgeProvider& provider) {
  std::vector<JudgePrompt> prompts;
  prompts.reserve(pairs.size());
  for (const auto& p : pairs) prompts.push_back(build_qa_prompt(p.ground_truth, p.prediction));
  auto run = evaluate(std::span<const JudgePrompt>(prompts), config, provider);
  run.report.task = JudgeTask::kQa;
  return run;
}

JudgeRun evaluate(std::span<const CaptionPair> pairs, const JudgeConfig& config,
                  JudgeProvider& provider) {
  std::vector<JudgePrompt> prompts;
  prompts.reserve(pairs.size());
  for (const auto& p : pairs) prompts.push_back(build_caption_prompt(p.ground_truth, p.prediction));
  auto run = evaluate(std::span<const JudgePrompt>(prompts), config, provider);
  run.report = summarize(JudgeTask::kCaption, run.verdicts);
  return run;
}

nlohmann::ordered_json to_json(const JudgeVerdict& verdict) {
  return {{"item_id", verdict.item_id},
          {"correct", optional_json(verdict.correct)},
          {"match", optional_json(verdict.match)},
          {"precision", optional_json(verdict.precision)},
          {"coverage", optional_json(verdict.coverage)},
          {"raw_reply", verdict.raw_reply},
          {"attempts", verdict.attempts},
          {"valid", verdict.valid}};
}

nlohmann::ordered_json to_json(const JudgeReport& report) {
  return {{"task", std::string(to_string(report.task))},
          {"n_items", report.n_items},
          {"n_valid", report.n_valid},
          {"accuracy", optional_json(report.accuracy)},
          {"mean_match", optional_json(report.mean_match)},
          {"mean_precision", optional_json(report.mean_precision)},
          {"mean_coverage", optional_json(report.mean_coverage)}};
}

std::string verdicts_to_jsonl(std::span<const JudgeVerdict> verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    out += to_json(v).dump();
    out += '\n';
  }
  return out;
}

std::vector<JudgeVerdict> load_verdicts(const std::filesystem::path& path) {
  std::vector<JudgeVerdict> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(verdict_from_json(line.value));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line.line_number) +
                       ": malformed verdict: " + e.what());
    }
  }
  return out;
}

}  // namespace vleval
