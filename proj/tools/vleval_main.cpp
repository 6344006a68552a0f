#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vleval/agreement.hpp"
#include "vleval/errors.hpp"
#include "vleval/jsonl.hpp"
#include "vleval/pipeline.hpp"
#include "vleval/report.hpp"
#include "vleval/run_config.hpp"

namespace {

using namespace vleval;

void print_diagnostics(const std::string& source, const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << source << ": " << format_diagnostic(d) << "\n";
}

int cmd_validate(const std::string& path) {
  auto parsed = load_run_config(path);
  if (!parsed.config) {
    print_diagnostics(path, parsed.diagnostics);
    return kExitValidation;
  }
  std::cout << path << ": ok (" << parsed.config->tasks.size() << " tasks, " << parsed.config->datasets.size()
            << " datasets)\n";
  return kExitOk;
}

int cmd_run(const std::string& path, const ConfigOverrides& overrides, bool quiet) {
  auto parsed = load_run_config(path);
  if (!parsed.config) {
    print_diagnostics(path, parsed.diagnostics);
    return kExitValidation;
  }
  auto config = std::move(*parsed.config);
  if (auto diags = apply_overrides(config, overrides); !diags.empty()) {
    print_diagnostics("flags", diags);
    return kExitValidation;
  }
  std::ostringstream sink;
  auto result = run_pipeline(config, quiet ? static_cast<std::ostream&>(sink) : std::cerr);
  for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
  if (!result.manifest_sha256.empty()) {
    std::cout << "manifest " << result.manifest_sha256 << "\n";
    std::cout << "judge calls " << result.judge_calls << ", cache hits " << result.judge_cache_hits << "\n";
  }
  return result.exit_code;
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(output, text);
  }
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& format_name, const std::string& output) {
  auto format = parse_render_format(format_name);
  if (!format) {
    std::cerr << "unknown format \"" << format_name << "\" (expected md, csv or json)\n";
    return kExitValidation;
  }
  std::vector<MetricReport> reports;
  for (const auto& in : inputs) {
    auto loaded = load_metric_reports(in);
    reports.insert(reports.end(), loaded.begin(), loaded.end());
  }
  emit(render(aggregate(reports), *format), output);
  return kExitOk;
}

int cmd_agreement(const std::string& verdicts_path, const std::string& human_path, const std::string& metric_name,
                  const std::string& format, const std::string& output) {
  auto metric = parse_human_metric(metric_name);
  if (!metric) {
    std::cerr << "unknown metric \"" << metric_name << "\" (expected correctness, match, precision or coverage)\n";
    return kExitValidation;
  }
  auto verdicts = load_verdicts(verdicts_path);
  auto human = load_human_scores(human_path);
  auto paired = pair_scores(verdicts, human, *metric);
  auto report = analyze(paired.pairs, *metric);
  auto matrix = confusion(paired.pairs, bins_for(*metric));
  if (format == "json") {
    nlohmann::ordered_json doc = {{"report", to_json(report)}, {"confusion", to_json(matrix)}};
    emit(doc.dump(2) + "\n", output);
    return kExitOk;
  }
  std::ostringstream out;
  out << render_confusion(matrix, *metric);
  out << "pairs: " << report.n_pairs << "\n";
  out << "exact agreement: " << format_half_up(report.exact_agreement_rate, 1) << "%\n";
  if (report.within_one_rate) out << "within one: " << format_half_up(*report.within_one_rate, 1) << "%\n";
  out << "monotone: " << (report.monotone ? "yes" : "no") << "\n";
  for (auto [a, b] : report.violations) out << "  violation: judge " << a << " -> " << b << "\n";
  emit(out.str(), output);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate video-language model outputs: judge scoring, n-gram metrics, retrieval and agreement."};
  app.require_subcommand(1);

  std::string config_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a run configuration without evaluating");
  validate_cmd->add_option("config", config_path, "Run configuration (JSON)")->required();

  std::string run_config;
  ConfigOverrides overrides;
  std::string output_dir, cache_dir, join_policy;
  int parallelism = 0;
  uint64_t seed = 0;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "Execute the tasks of a run configuration");
  run_cmd->add_option("config", run_config, "Run configuration (JSON)")->required();
  auto* out_opt = run_cmd->add_option("--output-dir", output_dir, "Override output_dir");
  auto* cache_opt = run_cmd->add_option("--cache-dir", cache_dir, "Override the judge cache directory");
  auto* par_opt = run_cmd->add_option("--parallelism", parallelism, "Override judge and embedding parallelism");
  auto* join_opt = run_cmd->add_option("--join-policy", join_policy, "strict or intersect")
                       ->check(CLI::IsMember({"strict", "intersect"}));
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the gallery sampling seed");
  run_cmd->add_flag("-q,--quiet", quiet, "Suppress progress output");

  std::vector<std::string> report_inputs;
  std::string report_format = "md", report_output;
  auto* report_cmd = app.add_subcommand("report", "Re-render tables from reports.jsonl files");
  report_cmd->add_option("reports", report_inputs, "reports.jsonl files")->required();
  report_cmd->add_option("-f,--format", report_format, "md, csv or json");
  report_cmd->add_option("-o,--output", report_output, "Write to a file instead of stdout");

  std::string verdicts_path, human_path, metric_name, agreement_format = "text", agreement_output;
  auto* agreement_cmd = app.add_subcommand("agreement", "Compare judge verdicts with human scores");
  agreement_cmd->add_option("--verdicts", verdicts_path, "Verdict dump (JSONL)")->required();
  agreement_cmd->add_option("--human", human_path, "Human score file (JSONL)")->required();
  agreement_cmd->add_option("--metric", metric_name, "correctness, match, precision or coverage")->required();
  agreement_cmd->add_option("-f,--format", agreement_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));
  agreement_cmd->add_option("-o,--output", agreement_output, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate_cmd) return cmd_validate(config_path);
    if (*run_cmd) {
      if (*out_opt) overrides.output_dir = output_dir;
      if (*cache_opt) overrides.cache_dir = cache_dir;
      if (*par_opt) overrides.parallelism = parallelism;
      if (*join_opt) overrides.join_policy = parse_join_policy(join_policy);
      if (*seed_opt) overrides.gallery_seed = seed;
      return cmd_run(run_config, overrides, quiet);
    }
    if (*report_cmd) return cmd_report(report_inputs, report_format, report_output);
    if (*agreement_cmd) {
      return cmd_agreement(verdicts_path, human_path, metric_name, agreement_format, agreement_output);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
