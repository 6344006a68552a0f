#include "vleval/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "vleval/agreement.hpp"
#include "vleval/corpus.hpp"
#include "vleval/errors.hpp"
#include "vleval/hashing.hpp"
#include "vleval/judge_providers.hpp"
#include "vleval/jsonl.hpp"
#include "vleval/ngram_metrics.hpp"
#include "vleval/retrieval_providers.hpp"

namespace vleval {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

template <typename Item>
struct Slice {
  std::string model_id;
  JoinResult<Item> joined;
};

template <typename Item>
struct LoadedSet {
  const DatasetSpec* spec = nullptr;
  Dataset<Item> dataset;
  LabelSet labels;  // action datasets only
  std::vector<Slice<Item>> slices;  // one per model, sorted by model id
};

struct LoadedHuman {
  const AgreementSpec* spec = nullptr;
  std::vector<HumanScoreRecord> records;
};

std::string artifact_stem(std::string_view model, std::string_view dataset) {
  return std::string(model) + "__" + std::string(dataset);
}

size_t count_empty(std::span<const PredictionRecord> records) {
  size_t n = 0;
  for (const auto& r : records) {
    if (r.response.find_first_not_of(" \t\r\n") == std::string::npos) ++n;
  }
  return n;
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

class Pipeline {
 public:
  Pipeline(const RunConfig& config, std::ostream& log, PipelineProviders injected)
      : config_(config), log_(log), injected_(injected) {}

  PipelineResult run() {
    const auto started = std::chrono::steady_clock::now();
    const auto started_at = utc_now();
    try {
      load();
      make_providers();
    } catch (const std::exception& e) {
      result_.exit_code = kExitValidation;
      result_.errors.push_back(e.what());
      return std::move(result_);
    }

    fs::create_directories(config_.output_dir);
    for (auto task : config_.tasks) {
      ojson entry = {{"task", to_string(task)}};
      if (failed_) {
        entry["status"] = "skipped";
        tasks_.push_back(std::move(entry));
        continue;
      }
      log_ << "[" << to_string(task) << "] running\n";
      outputs_.clear();
      counts_ = ojson::object();
      try {
        run_task(task);
        entry["status"] = "ok";
      } catch (const std::exception& e) {
        failed_ = true;
        entry["status"] = "failed";
        entry["error"] = e.what();
        result_.errors.push_back(std::string(to_string(task)) + ": " + e.what());
        log_ << "[" << to_string(task) << "] failed: " << e.what() << "\n";
      }
      entry["counts"] = counts_;
      entry["outputs"] = outputs_;
      tasks_.push_back(std::move(entry));
    }

    ojson tables = ojson::array();
    try {
      write_reports_and_tables(tables);
    } catch (const std::exception& e) {
      failed_ = true;
      result_.errors.push_back(std::string("report: ") + e.what());
    }

    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    ojson manifest = build_manifest(tables);
    result_.manifest_sha256 = manifest_hash(manifest);
    manifest["manifest_sha256"] = result_.manifest_sha256;
    manifest["runtime"] = {{"started_at", started_at},
                           {"elapsed_ms", elapsed.count()},
                           {"judge_provider_calls", result_.judge_calls},
                           {"judge_cache_hits", result_.judge_cache_hits}};
    write_file_atomic(config_.output_dir / "manifest.json", manifest.dump(2) + "\n");
    result_.manifest = std::move(manifest);
    result_.exit_code = failed_ ? kExitRuntime : kExitOk;
    return std::move(result_);
  }

 private:
  bool wants(TaskName t) const {
    return std::find(config_.tasks.begin(), config_.tasks.end(), t) != config_.tasks.end();
  }

  void record_input(std::string role, const std::string& id, const std::string& text, const fs::path& path) {
    // Configs built in memory may lack the as-written text; fall back to the path.
    inputs_.push_back({{"role", std::move(role)},
                       {"id", id},
                       {"path", text.empty() ? path.generic_string() : text},
                       {"sha256", sha256_file_hex(path)}});
  }

  template <typename Item>
  void join_all(LoadedSet<Item>& set) {
    const auto& id = set.dataset.dataset_id;
    for (const auto& model : models_for_dataset(predictions_, id)) {
      auto selected = select_predictions(predictions_, model, id);
      set.slices.push_back({model, join(set.dataset, std::span<const PredictionRecord>(selected),
                                        config_.join_policy)});
    }
    if (set.slices.empty()) log_ << "note: no predictions for dataset " << id << "\n";
  }

  void load() {
    for (size_t i = 0; i < config_.predictions.size(); ++i) {
      auto set = load_predictions(config_.predictions[i]);
      const auto& text = i < config_.predictions_text.size() ? config_.predictions_text[i] : std::string();
      record_input("predictions", "", text, config_.predictions[i]);
      predictions_.insert(predictions_.end(), set.records.begin(), set.records.end());
    }
    for (const auto& spec : config_.datasets) {
      record_input("dataset", spec.id, spec.path_text, spec.path);
      switch (spec.kind) {
        case DatasetKind::kQa: {
          LoadedSet<QaItem> set{&spec, {spec.id, load_qa_items(spec.path)}, {}, {}};
          join_all(set);
          qa_.push_back(std::move(set));
          break;
        }
        case DatasetKind::kCaption: {
          LoadedSet<CaptionItem> set{&spec, {spec.id, load_caption_items(spec.path)}, {}, {}};
          join_all(set);
          caption_.push_back(std::move(set));
          break;
        }
        case DatasetKind::kAction: {
          record_input("labels", spec.id, spec.labels_text, spec.labels);
          auto labels = load_label_set(spec.labels);
          LoadedSet<ActionItem> set{&spec, {spec.id, load_action_items(spec.path, labels)}, labels, {}};
          join_all(set);
          action_.push_back(std::move(set));
          break;
        }
        case DatasetKind::kLabels:
          throw ConfigError("dataset " + spec.id + ": labels are not a dataset kind");
      }
    }
    if (wants(TaskName::kAgreement)) {
      for (const auto& spec : config_.agreement) {
        record_input("human_scores", spec.dataset_id, spec.human_scores_text, spec.human_scores);
        human_.push_back({&spec, load_human_scores(spec.human_scores)});
      }
    }
    if (!config_.embedding.vectors.empty() && config_.embedding.provider == "file") {
      record_input("embeddings", "", config_.embedding.vectors_text, config_.embedding.vectors);
    }
  }

  void make_providers() {
    if (wants(TaskName::kQaJudge) || wants(TaskName::kCaptionJudge)) {
      judge_config_ = config_.judge.config;
      if (judge_config_.cache_dir.empty()) judge_config_.cache_dir = config_.output_dir / "cache";
      validate(judge_config_);
      if (injected_.judge) {
        judge_ = injected_.judge;
      } else if (config_.judge.provider == "http") {
        owned_judge_ = std::make_unique<HttpJudgeProvider>(
            judge_config_.provider_endpoint, env_or_empty(config_.judge.api_key_env), config_.judge.timeout_seconds);
        judge_ = owned_judge_.get();
      } else {
        owned_judge_ = std::make_unique<HashMockJudgeProvider>();
        judge_ = owned_judge_.get();
      }
    }
    if (wants(TaskName::kT2V) || wants(TaskName::kV2T) || wants(TaskName::kAction)) {
      const auto& e = config_.embedding;
      if (injected_.embedding) {
        embedder_ = injected_.embedding;
      } else if (e.provider == "http") {
        owned_embedder_ = std::make_unique<HttpEmbeddingProvider>(e.endpoint, env_or_empty(e.api_key_env),
                                                                  e.model_name, e.timeout_seconds);
        embedder_ = owned_embedder_.get();
      } else if (e.provider == "hashing") {
        owned_embedder_ = std::make_unique<HashingEmbeddingProvider>(e.hashing_dim);
        embedder_ = owned_embedder_.get();
      } else {
        owned_embedder_ = std::make_unique<FileEmbeddingProvider>(e.vectors);
        embedder_ = owned_embedder_.get();
      }
    }
  }

  void write_output(const fs::path& relative, const std::string& content) {
    write_file_atomic(config_.output_dir / relative, content);
    outputs_.push_back({{"path", relative.generic_string()}, {"sha256", sha256_hex(content)}});
  }

  void add_count(const std::string& key, int64_t n) {
    counts_[key] = counts_.value(key, int64_t{0}) + n;
  }

  MetricReport base_report(std::string model, ReportTask task, std::string dataset, const JoinSummary& join) {
    MetricReport r;
    r.model_id = std::move(model);
    r.task = task;
    r.dataset_id = std::move(dataset);
    r.counts["n_missing"] = static_cast<int64_t>(join.missing_ids.size());
    r.counts["n_extra"] = static_cast<int64_t>(join.extra_ids.size());
    return r;
  }

  void add_report(MetricReport r) {
    validate(r);
    result_.reports.push_back(std::move(r));
  }

  template <typename Item>
  void judge_task(std::vector<LoadedSet<Item>>& sets, TaskName task, ReportTask report_task) {
    for (auto& set : sets) {
      for (auto& slice : set.slices) {
        const auto& pairs = slice.joined.pairs;
        auto run = evaluate(std::span<const EvalPair<Item>>(pairs), judge_config_, *judge_);
        result_.judge_calls += run.provider_calls;
        result_.judge_cache_hits += run.cache_hits;
        const auto stem = artifact_stem(slice.model_id, set.dataset.dataset_id);
        write_output(fs::path("verdicts") / (stem + "__" + std::string(to_string(task)) + ".jsonl"),
                     verdicts_to_jsonl(run.verdicts));

        auto r = base_report(slice.model_id, report_task, set.dataset.dataset_id, slice.joined.summary);
        const auto& s = run.report;
        if (report_task == ReportTask::kQa) {
          if (s.accuracy) r.metrics["acc"] = *s.accuracy;
          if (s.mean_match) r.metrics["mat"] = *s.mean_match;
        } else {
          if (s.mean_precision) r.metrics["prec"] = *s.mean_precision;
          if (s.mean_coverage) r.metrics["cov"] = *s.mean_coverage;
        }
        r.counts["n_items"] = static_cast<int64_t>(s.n_items);
        r.counts["n_valid"] = static_cast<int64_t>(s.n_valid);
        r.counts["n_empty_responses"] = static_cast<int64_t>(empty_in(pairs));
        r.provenance["judge_model"] = judge_config_.model_name;
        r.provenance["judge_provider"] = judge_->identity();
        r.provenance["template_version"] = std::string(judge_template_version());
        add_count("items", static_cast<int64_t>(s.n_items));
        add_count("invalid_verdicts", static_cast<int64_t>(s.n_items - s.n_valid));
        verdicts_[{set.dataset.dataset_id, slice.model_id}] = std::move(run.verdicts);
        add_report(std::move(r));
      }
    }
  }

  template <typename Item>
  static size_t empty_in(const std::vector<EvalPair<Item>>& pairs) {
    std::vector<PredictionRecord> preds;
    preds.reserve(pairs.size());
    for (const auto& p : pairs) preds.push_back(p.prediction);
    return count_empty(preds);
  }

  void ngram_task() {
    const BleuOptions bleu_options{config_.bleu_add_one_smoothing};
    for (auto& set : caption_) {
      for (auto& slice : set.slices) {
        const auto& pairs = slice.joined.pairs;
        std::map<std::string, TokenSequence> candidates;
        std::map<std::string, std::vector<TokenSequence>> references;
        for (const auto& p : pairs) {
          candidates.emplace(p.ground_truth.item_id, tokenize(p.prediction.response));
          std::vector<TokenSequence> refs;
          for (const auto& ref : p.ground_truth.references) refs.push_back(tokenize(ref));
          references.emplace(p.ground_truth.item_id, std::move(refs));
        }
        auto cider = cider_d(candidates, references);

        std::vector<BleuSegment> segments;
        std::string dump;
        double rouge_sum = 0.0, meteor_sum = 0.0;
        for (const auto& p : pairs) {
          const auto& id = p.ground_truth.item_id;
          const auto& cand = candidates.at(id);
          const auto& refs = references.at(id);
          segments.push_back({&cand, refs});
          const double b = bleu4(cand, refs, bleu_options);
          const double rl = rouge_l(cand, refs);
          const double m = meteor_lite(cand, refs);
          rouge_sum += rl;
          meteor_sum += m;
          ojson line = {{"item_id", id},           {"bleu4", b},   {"rouge_l", rl},
                        {"meteor", m},             {"cider_d", cider.per_item.at(id)}};
          dump += line.dump() + "\n";
        }
        const auto stem = artifact_stem(slice.model_id, set.dataset.dataset_id);
        write_output(fs::path("ngram") / (stem + ".jsonl"), dump);

        auto r = base_report(slice.model_id, ReportTask::kNgram, set.dataset.dataset_id, slice.joined.summary);
        r.counts["n_items"] = static_cast<int64_t>(pairs.size());
        r.counts["n_empty_responses"] = static_cast<int64_t>(empty_in(pairs));
        if (!pairs.empty()) {
          const double n = static_cast<double>(pairs.size());
          const double scale = config_.ngram_percent_scale ? 100.0 : 1.0;
          r.metrics["C"] = scale * cider.mean;
          r.metrics["B4"] = scale * corpus_bleu4(segments, bleu_options);
          r.metrics["M"] = scale * meteor_sum / n;
          r.metrics["R"] = scale * rouge_sum / n;
        }
        r.provenance["bleu"] = config_.bleu_add_one_smoothing ? "corpus/add-one" : "corpus";
        add_count("items", static_cast<int64_t>(pairs.size()));
        add_report(std::move(r));
      }
    }
  }

  RetrievalOptions retrieval_options() const {
    RetrievalOptions o;
    o.ks = config_.ks;
    o.gallery_size = config_.gallery_size;
    o.seed = config_.gallery_seed;
    o.embed = config_.embedding.options;
    return o;
  }

  void finish_retrieval(const RetrievalReport& rep, const std::string& model, const std::string& dataset,
                        ReportTask task, const JoinSummary& join) {
    const auto name = std::string(to_string(rep.direction));
    write_output(fs::path("retrieval") / (artifact_stem(model, dataset) + "__" + name + ".json"),
                 to_json(rep).dump(2) + "\n");
    auto r = base_report(model, task, dataset, join);
    for (int k : {1, 5}) {
      auto it = rep.top_k_accuracy.find(k);
      if (it != rep.top_k_accuracy.end()) r.metrics["acc" + std::to_string(k)] = it->second;
    }
    r.counts["n_queries"] = static_cast<int64_t>(rep.n_queries);
    r.counts["n_candidates"] = static_cast<int64_t>(rep.n_candidates);
    r.counts["zero_vectors"] = static_cast<int64_t>(rep.zero_vectors);
    r.provenance["embedding_provider"] = embedder_->identity();
    add_count("queries", static_cast<int64_t>(rep.n_queries));
    add_count("zero_vectors", static_cast<int64_t>(rep.zero_vectors));
    add_report(std::move(r));
  }

  void caption_retrieval_task(RetrievalDirection direction) {
    const auto options = retrieval_options();
    for (auto& set : caption_) {
      for (auto& slice : set.slices) {
        std::span<const CaptionPair> pairs(slice.joined.pairs);
        auto rep = direction == RetrievalDirection::kT2V ? eval_t2v(pairs, *embedder_, options)
                                                         : eval_v2t(pairs, *embedder_, options);
        finish_retrieval(rep, slice.model_id, set.dataset.dataset_id,
                         direction == RetrievalDirection::kT2V ? ReportTask::kT2V : ReportTask::kV2T,
                         slice.joined.summary);
      }
    }
  }

  void action_task() {
    const auto options = retrieval_options();
    for (auto& set : action_) {
      for (auto& slice : set.slices) {
        auto rep = eval_action(std::span<const ActionPair>(slice.joined.pairs), set.labels, *embedder_, options);
        finish_retrieval(rep, slice.model_id, set.dataset.dataset_id, ReportTask::kAction, slice.joined.summary);
      }
    }
  }

  void agreement_task() {
    for (const auto& human : human_) {
      const auto& spec = *human.spec;
      auto it = verdicts_.find({spec.dataset_id, spec.model_id});
      if (it == verdicts_.end()) {
        throw InputError("agreement: no judge verdicts for model " + spec.model_id + " on dataset " +
                         spec.dataset_id);
      }
      const bool qa = std::any_of(qa_.begin(), qa_.end(),
                                  [&](const auto& s) { return s.dataset.dataset_id == spec.dataset_id; });
      const auto metrics = qa ? std::vector<HumanMetric>{HumanMetric::kCorrectness, HumanMetric::kMatch}
                              : std::vector<HumanMetric>{HumanMetric::kPrecision, HumanMetric::kCoverage};
      for (auto metric : metrics) {
        auto paired = pair_scores(it->second, human.records, metric);
        if (paired.pairs.empty()) continue;
        auto report = analyze(paired.pairs, metric);
        const auto bins = bins_for(metric);
        auto matrix = confusion(paired.pairs, bins);
        ojson doc = {{"model_id", spec.model_id},
                     {"dataset_id", spec.dataset_id},
                     {"report", to_json(report)},
                     {"confusion", to_json(matrix)},
                     {"unmatched_judge", paired.unmatched_judge},
                     {"unmatched_human", paired.unmatched_human},
                     {"invalid_verdicts", paired.invalid_verdicts}};
        const auto stem = artifact_stem(spec.model_id, spec.dataset_id) + "__" + std::string(to_string(metric));
        write_output(fs::path("agreement") / (stem + ".json"), doc.dump(2) + "\n");
        write_output(fs::path("agreement") / (stem + ".txt"), render_confusion(matrix, metric));
        add_count("pairs", static_cast<int64_t>(report.n_pairs));
      }
    }
  }

  void run_task(TaskName task) {
    switch (task) {
      case TaskName::kQaJudge: judge_task(qa_, task, ReportTask::kQa); break;
      case TaskName::kCaptionJudge: judge_task(caption_, task, ReportTask::kCaption); break;
      case TaskName::kNgram: ngram_task(); break;
      case TaskName::kT2V: caption_retrieval_task(RetrievalDirection::kT2V); break;
      case TaskName::kV2T: caption_retrieval_task(RetrievalDirection::kV2T); break;
      case TaskName::kAction: action_task(); break;
      case TaskName::kAgreement: agreement_task(); break;
    }
  }

  void write_reports_and_tables(ojson& tables) {
    const auto jsonl = metric_reports_to_jsonl(result_.reports);
    write_file_atomic(config_.output_dir / "reports.jsonl", jsonl);
    tables.push_back({{"path", "reports.jsonl"}, {"sha256", sha256_hex(jsonl)}});
    const auto aggregated = aggregate(result_.reports);
    const std::pair<const char*, RenderFormat> formats[] = {
        {"tables/report.md", RenderFormat::kMarkdown},
        {"tables/report.csv", RenderFormat::kCsv},
        {"tables/report.json", RenderFormat::kStructured}};
    for (const auto& [path, format] : formats) {
      const auto text = render(aggregated, format);
      write_file_atomic(config_.output_dir / path, text);
      tables.push_back({{"path", path}, {"sha256", sha256_hex(text)}});
    }
  }

  ojson build_manifest(const ojson& tables) const {
    // Output locations and worker counts do not affect results.
    auto hashed = config_.raw;
    hashed.erase("output_dir");
    hashed.erase("cache_dir");
    for (const char* section : {"judge", "embedding"}) {
      if (hashed.contains(section) && hashed[section].is_object()) hashed[section].erase("parallelism");
    }
    ojson providers = ojson::object();
    if (judge_) {
      providers["judge"] = judge_->identity();
      providers["judge_model"] = judge_config_.model_name;
    }
    if (embedder_) providers["embedding"] = embedder_->identity();
    ojson settings = {{"join_policy", to_string(config_.join_policy)},
                      {"gallery_seed", config_.gallery_seed},
                      {"ks", config_.ks},
                      {"bleu_add_one_smoothing", config_.bleu_add_one_smoothing},
                      {"ngram_percent_scale", config_.ngram_percent_scale}};
    settings["gallery_size"] = config_.gallery_size ? ojson(*config_.gallery_size) : ojson(nullptr);
    return {{"tool", "vleval"},
            {"template_version", judge_template_version()},
            {"config_sha256", sha256_hex(hashed.dump())},
            {"settings", settings},
            {"inputs", inputs_},
            {"providers", providers},
            {"tasks", tasks_},
            {"tables", tables},
            {"status", failed_ ? "failed" : "ok"}};
  }

  const RunConfig& config_;
  std::ostream& log_;
  PipelineProviders injected_;
  PipelineResult result_;

  std::vector<PredictionRecord> predictions_;
  std::vector<LoadedSet<QaItem>> qa_;
  std::vector<LoadedSet<CaptionItem>> caption_;
  std::vector<LoadedSet<ActionItem>> action_;
  std::vector<LoadedHuman> human_;

  JudgeConfig judge_config_;
  JudgeProvider* judge_ = nullptr;
  std::unique_ptr<JudgeProvider> owned_judge_;
  EmbeddingProvider* embedder_ = nullptr;
  std::unique_ptr<EmbeddingProvider> owned_embedder_;

  std::map<std::pair<std::string, std::string>, std::vector<JudgeVerdict>> verdicts_;
  ojson inputs_ = ojson::array();
  ojson tasks_ = ojson::array();
  ojson outputs_ = ojson::array();
  ojson counts_ = ojson::object();
  bool failed_ = false;
};

}  // namespace

std::string manifest_hash(const nlohmann::ordered_json& manifest) {
  auto copy = manifest;
  copy.erase("runtime");
  copy.erase("manifest_sha256");
  return sha256_hex(copy.dump());
}

PipelineResult run_pipeline(const RunConfig& config, std::ostream& log, PipelineProviders providers) {
  return Pipeline(config, log, providers).run();
}

}  // namespace vleval
