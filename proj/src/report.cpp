#include "vleval/report.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "vleval/errors.hpp"
#include "vleval/jsonl.hpp"

namespace vleval {

namespace {

constexpr std::array<ReportTask, 6> kTaskOrder = {ReportTask::kQa,  ReportTask::kCaption,
                                                  ReportTask::kT2V, ReportTask::kV2T,
                                                  ReportTask::kAction, ReportTask::kNgram};

constexpr std::string_view kAbsentMarkdown = "–";

std::string_view block_title(ReportTask task) {
  switch (task) {
    case ReportTask::kQa: return "VideoQA";
    case ReportTask::kCaption: return "V-Caption";
    case ReportTask::kT2V: return "T2V Rtv.";
    case ReportTask::kV2T: return "V2T Rtv.";
    case ReportTask::kAction: return "Act Recog";
    case ReportTask::kNgram: return "Caption n-gram";
  }
  return "?";
}

bool judge_task(ReportTask task) { return task == ReportTask::kQa || task == ReportTask::kCaption; }

std::string normalized_id(std::string_view id) {
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string cell(const std::optional<double>& v, std::string_view metric, std::string_view absent) {
  return v ? format_half_up(*v, render_decimals(metric)) : std::string(absent);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

void render_markdown(const ModelTable& table, std::string& out) {
  out += "### " + md_escape(table.model_id) + "\n\n";
  for (const auto& block : table.blocks) {
    out += "| " + std::string(block_title(block.task)) + " |";
    for (const auto& c : block.columns) out += " " + c + " |";
    out += "\n| --- |";
    for (size_t i = 0; i < block.columns.size(); ++i) out += " ---: |";
    out += '\n';
    for (const auto& row : block.rows) {
      out += "| " + md_escape(row.dataset_id) + " |";
      for (size_t i = 0; i < block.columns.size(); ++i) {
        out += " " + cell(row.values[i], block.columns[i], kAbsentMarkdown) + " |";
      }
      out += '\n';
    }
    out += block.average_excludes_absent ? "| *Average*† |" : "| *Average* |";
    for (size_t i = 0; i < block.columns.size(); ++i) {
      out += " " + cell(block.average[i], block.columns[i], kAbsentMarkdown) + " |";
    }
    out += "\n\n";
    if (block.average_excludes_absent) out += "† Average over present cells only.\n\n";
  }
}

void render_csv(const ModelTable& table, std::string& out) {
  auto emit = [&](const TaskBlock& block, std::string_view dataset,
                  const std::vector<std::optional<double>>& values) {
    for (size_t i = 0; i < block.columns.size(); ++i) {
      out += csv_field(table.model_id) + "," + std::string(to_string(block.task)) + "," +
             csv_field(dataset) + "," + block.columns[i] + "," + cell(values[i], block.columns[i], "") +
             "\n";
    }
  };
  for (const auto& block : table.blocks) {
    for (const auto& row : block.rows) emit(block, row.dataset_id, row.values);
    emit(block, "Average", block.average);
  }
}

nlohmann::ordered_json structured(const ModelTable& table) {
  auto values_json = [](const TaskBlock& block, const std::vector<std::optional<double>>& values) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (size_t i = 0; i < block.columns.size(); ++i) {
      if (values[i]) {
        j[block.columns[i]] = std::stod(format_half_up(*values[i], render_decimals(block.columns[i])));
      } else {
        j[block.columns[i]] = nullptr;
      }
    }
    return j;
  };
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const auto& block : table.blocks) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : block.rows) {
      rows.push_back({{"dataset", row.dataset_id}, {"values", values_json(block, row.values)}});
    }
    blocks.push_back({{"task", std::string(to_string(block.task))},
                      {"columns", block.columns},
                      {"rows", rows},
                      {"average", values_json(block, block.average)},
                      {"average_excludes_absent", block.average_excludes_absent}});
  }
  return {{"model_id", table.model_id}, {"blocks", blocks}};
}

}  // namespace

std::string_view to_string(ReportTask task) {
  switch (task) {
    case ReportTask::kQa: return "qa";
    case ReportTask::kCaption: return "caption";
    case ReportTask::kT2V: return "t2v";
    case ReportTask::kV2T: return "v2t";
    case ReportTask::kAction: return "action";
    case ReportTask::kNgram: return "ngram";
  }
  return "?";
}

std::optional<ReportTask> parse_report_task(std::string_view name) {
  for (auto t : kTaskOrder) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

const std::vector<std::string>& metric_registry(ReportTask task) {
  static const std::vector<std::string> qa{"acc", "mat"};
  static const std::vector<std::string> caption{"prec", "cov"};
  static const std::vector<std::string> topk{"acc1", "acc5"};
  static const std::vector<std::string> ngram{"C", "B4", "M", "R"};
  switch (task) {
    case ReportTask::kQa: return qa;
    case ReportTask::kCaption: return caption;
    case ReportTask::kNgram: return ngram;
    default: return topk;
  }
}

int render_decimals(std::string_view metric) {
  if (metric == "mat" || metric == "prec" || metric == "cov") return 2;
  return 1;
}

void validate(const MetricReport& report) {
  const auto& registry = metric_registry(report.task);
  for (const auto& [name, value] : report.metrics) {
    if (std::find(registry.begin(), registry.end(), name) == registry.end()) {
      throw InputError("metric report (" + report.model_id + ", " + std::string(to_string(report.task)) +
                       ", " + report.dataset_id + "): metric \"" + name + "\" is not registered for this task");
    }
    if (!std::isfinite(value)) {
      throw InputError("metric report (" + report.model_id + ", " + report.dataset_id + "): metric \"" +
                       name + "\" is not finite");
    }
  }
  if (judge_task(report.task)) {
    for (const char* key : {"judge_model", "judge_provider", "template_version"}) {
      if (!report.provenance.count(key)) {
        throw InputError("metric report (" + report.model_id + ", " + report.dataset_id +
                         "): judge-derived metrics need provenance \"" + key + "\"");
      }
    }
  }
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& name : metric_registry(report.task)) {
    auto it = report.metrics.find(name);
    if (it != report.metrics.end()) metrics[name] = it->second;
  }
  return {{"model_id", report.model_id},
          {"task", std::string(to_string(report.task))},
          {"dataset_id", report.dataset_id},
          {"metrics", metrics},
          {"counts", report.counts},
          {"provenance", report.provenance}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.model_id = j.at("model_id").get<std::string>();
  auto task = parse_report_task(j.at("task").get<std::string>());
  if (!task) throw InputError("unknown report task \"" + j.at("task").get<std::string>() + "\"");
  r.task = *task;
  r.dataset_id = j.at("dataset_id").get<std::string>();
  for (const auto& [k, v] : j.at("metrics").items()) {
    if (!v.is_null()) r.metrics[k] = v.get<double>();
  }
  if (j.contains("counts")) r.counts = j.at("counts").get<std::map<std::string, int64_t>>();
  if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
  return r;
}

std::vector<MetricReport> load_metric_reports(const std::filesystem::path& path) {
  std::vector<MetricReport> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(metric_report_from_json(line.value));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line.line_number) +
                       ": malformed metric report: " + e.what());
    }
  }
  return out;
}

std::string metric_reports_to_jsonl(std::span<const MetricReport> reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

size_t canonical_dataset_rank(std::string_view dataset_id) {
  static const std::vector<std::vector<std::string_view>> kCanonical = {
      {"msvd"}, {"msrvtt"}, {"tgif"}, {"activitynet", "anet"}, {"kinetics400", "k400"},
      {"hmdb51", "hmdb"}, {"ucf101", "ucf"}};
  const auto id = normalized_id(dataset_id);
  for (size_t i = 0; i < kCanonical.size(); ++i) {
    for (auto prefix : kCanonical[i]) {
      if (id.rfind(prefix, 0) == 0) return i;
    }
  }
  return kCanonical.size();
}

std::vector<ModelTable> aggregate(std::span<const MetricReport> reports) {
  using Key = std::tuple<std::string, ReportTask, std::string>;
  std::map<Key, const MetricReport*> unique;
  for (const auto& r : reports) {
    validate(r);
    Key key{r.model_id, r.task, r.dataset_id};
    auto [it, inserted] = unique.emplace(key, &r);
    if (!inserted && it->second->metrics != r.metrics) {
      throw InputError("conflicting metric reports for (" + r.model_id + ", " +
                       std::string(to_string(r.task)) + ", " + r.dataset_id + ")");
    }
  }

  std::vector<ModelTable> tables;
  for (const auto& [key, report] : unique) {
    const auto& [model, task, dataset] = key;
    if (tables.empty() || tables.back().model_id != model) tables.push_back({model, {}});
    auto& blocks = tables.back().blocks;
    if (blocks.empty() || blocks.back().task != task) {
      TaskBlock block;
      block.task = task;
      block.columns = metric_registry(task);
      blocks.push_back(std::move(block));
    }
    TableRow row{dataset, {}};
    for (const auto& col : blocks.back().columns) {
      auto it = report->metrics.find(col);
      row.values.push_back(it == report->metrics.end() ? std::nullopt : std::optional<double>(it->second));
    }
    blocks.back().rows.push_back(std::move(row));
  }

  for (auto& table : tables) {
    for (auto& block : table.blocks) {
      std::stable_sort(block.rows.begin(), block.rows.end(), [](const TableRow& a, const TableRow& b) {
        auto ra = canonical_dataset_rank(a.dataset_id);
        auto rb = canonical_dataset_rank(b.dataset_id);
        return ra != rb ? ra < rb : a.dataset_id < b.dataset_id;
      });
      block.average.assign(block.columns.size(), std::nullopt);
      for (size_t c = 0; c < block.columns.size(); ++c) {
        double sum = 0.0;
        size_t n = 0;
        for (const auto& row : block.rows) {
          if (row.values[c]) {
            sum += *row.values[c];
            ++n;
          } else {
            block.average_excludes_absent = true;
          }
        }
        if (n > 0) block.average[c] = sum / static_cast<double>(n);
      }
    }
  }
  return tables;
}

std::optional<RenderFormat> parse_render_format(std::string_view name) {
  if (name == "csv") return RenderFormat::kCsv;
  if (name == "markdown" || name == "md") return RenderFormat::kMarkdown;
  if (name == "structured" || name == "json") return RenderFormat::kStructured;
  return std::nullopt;
}

std::string format_half_up(double value, int decimals) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  const bool negative = value < 0;
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals + 6, std::fabs(value));
  std::string s(buf);
  const auto dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, static_cast<size_t>(decimals));
  const bool round_up = s[dot + 1 + static_cast<size_t>(decimals)] >= '5';
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[static_cast<size_t>(i)] == '9') digits[static_cast<size_t>(i--)] = '0';
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[static_cast<size_t>(i)];
    }
  }
  std::string out = decimals > 0 ? digits.substr(0, digits.size() - static_cast<size_t>(decimals)) + "." +
                                       digits.substr(digits.size() - static_cast<size_t>(decimals))
                                 : digits;
  const bool all_zero = out.find_first_not_of("0.") == std::string::npos;
  return (negative && !all_zero) ? "-" + out : out;
}

std::string render(std::span<const ModelTable> tables, RenderFormat format) {
  std::string out;
  switch (format) {
    case RenderFormat::kMarkdown:
      for (const auto& t : tables) render_markdown(t, out);
      break;
    case RenderFormat::kCsv:
      out = "model_id,task,dataset,metric,value\n";
      for (const auto& t : tables) render_csv(t, out);
      break;
    case RenderFormat::kStructured: {
      nlohmann::ordered_json models = nlohmann::ordered_json::array();
      for (const auto& t : tables) models.push_back(structured(t));
      out = nlohmann::ordered_json{{"models", models}}.dump(2) + "\n";
      break;
    }
  }
  return out;
}

std::string render(const ModelTable& table, RenderFormat format) {
  return render(std::span<const ModelTable>(&table, 1), format);
}

}  // namespace vleval
