#pragma once

// Per-(model, task, dataset) metric records, their aggregation into one table
// per model with an Average row per task block, and text rendering.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vleval {

enum class ReportTask { kQa, kCaption, kT2V, kV2T, kAction, kNgram };

std::string_view to_string(ReportTask task);
std::optional<ReportTask> parse_report_task(std::string_view name);

// Column names allowed for each task, in display order:
//   qa: acc mat | caption: prec cov | t2v, v2t, action: acc1 acc5 | ngram: C B4 M R
const std::vector<std::string>& metric_registry(ReportTask task);

// Digits after the decimal point used when rendering a metric column.
int render_decimals(std::string_view metric);

struct MetricReport {
  std::string model_id;
  ReportTask task = ReportTask::kQa;
  std::string dataset_id;
  std::map<std::string, double> metrics;  // absent key = absent cell
  std::map<std::string, std::string> provenance;
  std::map<std::string, int64_t> counts;

  bool operator==(const MetricReport&) const = default;
};

// Checks metric names against the registry and, for judge tasks, that
// provenance names the judge model, provider and template version.
void validate(const MetricReport& report);

nlohmann::ordered_json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);
std::vector<MetricReport> load_metric_reports(const std::filesystem::path& path);
std::string metric_reports_to_jsonl(std::span<const MetricReport> reports);

struct TableRow {
  std::string dataset_id;
  std::vector<std::optional<double>> values;  // one per block column
};

struct TaskBlock {
  ReportTask task = ReportTask::kQa;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  // Unweighted mean of the present values in each column, unrounded.
  std::vector<std::optional<double>> average;
  bool average_excludes_absent = false;
};

struct ModelTable {
  std::string model_id;
  std::vector<TaskBlock> blocks;  // task order
};

// Groups by model (sorted) and task, orders datasets canonically (MSVD,
// MSRVTT, TGIF, ActivityNet, Kinetics-400, HMDB51, UCF101, then others by
// id). Identical duplicate reports collapse; conflicting ones raise InputError.
std::vector<ModelTable> aggregate(std::span<const MetricReport> reports);

// Position of a dataset id in the canonical order; unknown ids share the
// last rank.
size_t canonical_dataset_rank(std::string_view dataset_id);

enum class RenderFormat { kCsv, kMarkdown, kStructured };

std::optional<RenderFormat> parse_render_format(std::string_view name);

// Decimal half-up rounding of `value` to `decimals` places. The value is
// first printed with six guard digits so binary representation error in
// means such as 48.75 cannot flip the result.
std::string format_half_up(double value, int decimals);

std::string render(std::span<const ModelTable> tables, RenderFormat format);
std::string render(const ModelTable& table, RenderFormat format);

}  // namespace vleval
