// numberline: command-line front end for the probing toolkit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "numberline/corpus.hpp"
#include "numberline/dataset.hpp"
#include "numberline/errors.hpp"
#include "numberline/metrics.hpp"
#include "numberline/report.hpp"
#include "numberline/sweep.hpp"
#include "numberline/synth.hpp"

namespace fs = std::filesystem;
using namespace numberline;

namespace {

struct AnalyzeArgs {
  std::string dataset;
  std::string method = "pca";
  int components = 1;
  int runs = 1;
  std::uint64_t seed = 42;
  int samples_per_group = 0;
  int bins = 4;
  double tau = kDefaultBetaTolerance;
  double min_rho = 0.5;
  unsigned threads = 0;
  std::string label;
  std::string out = "numberline-out";
};

SweepConfig to_config(const AnalyzeArgs& a) {
  SweepConfig config;
  config.method = parse_projection_method(a.method);
  config.components = a.components;
  config.runs = a.runs;
  config.seed = a.seed;
  if (a.samples_per_group > 0) config.samples_per_group = a.samples_per_group;
  config.realworld_bins = a.bins;
  config.analysis.beta_tolerance = a.tau;
  config.analysis.min_reliable_rho = a.min_rho;
  config.threads = a.threads;
  return config;
}

void add_analysis_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--method", a.method, "Projection method")
      ->check(CLI::IsMember({"pca", "pls"}))
      ->capture_default_str();
  cmd->add_option("--components", a.components, "Projection dimension")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed for resampling runs")->capture_default_str();
  cmd->add_option("--samples-per-group", a.samples_per_group,
                  "Rows kept per group in each resampling run (default: 80% of the smallest group)");
  cmd->add_option("--bins", a.bins, "Group count for real-world values")->capture_default_str();
  cmd->add_option("--tau", a.tau, "Tolerance around beta = 1 for the logarithmic regime")
      ->capture_default_str();
  cmd->add_option("--min-rho", a.min_rho, "Spearman rho below which beta is reported as NA")
      ->capture_default_str();
  cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
}

int run_analyze(const AnalyzeArgs& a) {
  const auto dataset = read_dataset(a.dataset);
  const auto config = to_config(a);
  const auto report = run_sweep(dataset, config);
  const fs::path out(a.out);

  write_sweep_json(report, out / "sweep.json");
  const LabeledSweep labeled{a.label.empty() ? report.model_name : a.label, report};
  write_report_files(labeled, out);
  write_text_file(out / "scatter.txt", emit_scatter(dataset, report.best(), config.realworld_bins));

  const auto& best = report.best();
  std::cout << fmt::format("best layer {}: rho={} beta={} {}={} regime={}\n", report.best_layer,
                           format_metric(best.rho), format_metric(best.beta),
                           config.method == ProjectionMethod::pca ? "sigma2" : "R2",
                           format_metric(best.quality),
                           best.regime ? to_string(best.regime->regime) : "NA");
  return 0;
}

int run_report(const std::string& sweep_path, const std::string& out, const std::string& label) {
  const auto report = read_sweep_json(sweep_path);
  write_report_files(LabeledSweep{label.empty() ? report.model_name : label, report}, out);
  return 0;
}

int run_fit_sri(const std::string& series_path, const std::string& variant, double tau) {
  std::ifstream in(series_path);
  if (!in) throw IoError(fmt::format("cannot open {}", series_path));
  std::vector<double> series;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(line.substr(first), &used);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, line));
    }
    if (line.find_first_not_of(" \t\r", first + used) != std::string::npos) {
      throw ParseError(fmt::format("line {}: trailing characters in '{}'", line_no, line));
    }
    series.push_back(value);
  }

  const auto fit = fit_sri(series, parse_sri_variant(variant));
  nlohmann::json doc{{"alpha", fit.alpha},
                     {"beta", fit.beta},
                     {"residual", fit.residual},
                     {"variant", to_string(fit.variant)},
                     {"converged", fit.converged},
                     {"negative_diffs", fit.negative_diffs},
                     {"regime", to_string(classify_beta(fit.beta, tau).regime)}};
  if (fit.variant == SriVariant::direct) doc["offset"] = fit.offset;
  std::cout << doc.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numberline: probe how hidden representations lay out numerical magnitudes"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Per-layer sweep over a dataset directory");
  analyze_cmd->add_option("dataset", analyze.dataset, "Dataset directory")->required();
  add_analysis_options(analyze_cmd, analyze);
  analyze_cmd->add_option("--runs", analyze.runs, "Resampling runs (>1 adds mean ± std)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  analyze_cmd->add_option("--label", analyze.label, "Row label in the summary table");
  analyze_cmd->add_option("--out", analyze.out, "Output directory")->capture_default_str();

  std::string sweep_path, report_out = "numberline-report", report_label;
  auto* report_cmd = app.add_subcommand("report", "Re-render tables and curves from sweep.json");
  report_cmd->add_option("sweep", sweep_path, "sweep.json")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Output directory")->capture_default_str();
  report_cmd->add_option("--label", report_label, "Row label in the summary table");

  std::string series_path, variant = "differences";
  double fit_tau = kDefaultBetaTolerance;
  auto* fit_cmd = app.add_subcommand("fit-sri", "Fit the scaling rate index to a series");
  fit_cmd->add_option("series", series_path, "Text file with one number per line")->required();
  fit_cmd->add_option("--variant", variant, "differences or direct")
      ->check(CLI::IsMember({"differences", "direct"}))
      ->capture_default_str();
  fit_cmd->add_option("--tau", fit_tau, "Logarithmic-regime tolerance")->capture_default_str();

  SynthSpec synth;
  std::string law = "log10", synth_out;
  auto* synth_cmd = app.add_subcommand("generate-synthetic", "Write a synthetic dataset");
  synth_cmd->add_option("--law", law, "Encoding law")
      ->check(CLI::IsMember({"log10", "linear", "reciprocal", "shuffled"}))
      ->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "Hidden dimension")->capture_default_str();
  synth_cmd->add_option("--layers", synth.layers, "Layer count")->capture_default_str();
  synth_cmd->add_option("--signal-layer", synth.signal_layer, "Layer carrying the signal")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_sigma, "Noise sigma at the signal layer")
      ->capture_default_str();
  synth_cmd->add_option("--distractor", synth.distractor_sigma, "Noise sigma elsewhere")
      ->capture_default_str();
  synth_cmd->add_option("--groups", synth.groups.max_group, "Number of magnitude groups K")
      ->capture_default_str();
  synth_cmd->add_option("--per-group", synth.groups.samples_per_group, "Samples per group k")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();

  int groups = 6, per_group = 20, context = 3;
  std::uint64_t prompt_seed = 42;
  bool pooled = false;
  std::string prompts_out, letters_profile, realworld_csv,
      prompt_template = "What is the population of [entity]?";
  auto* prompts_cmd = app.add_subcommand("make-prompts", "Write a prompt file (NDJSON)");
  prompts_cmd->add_option("--groups", groups, "Number of magnitude groups K")
      ->capture_default_str();
  prompts_cmd->add_option("--per-group", per_group, "Samples per group k")->capture_default_str();
  prompts_cmd->add_option("--context", context, "In-context v=v pairs")->capture_default_str();
  prompts_cmd->add_option("--seed", prompt_seed, "Seed")->capture_default_str();
  prompts_cmd->add_flag("--pooled-context", pooled, "Draw context values from all groups");
  prompts_cmd->add_option("--letters", letters_profile,
                          "Letters control: length profile such as 1:20,2:20,3:20");
  prompts_cmd->add_option("--realworld", realworld_csv, "CSV with header entity,value");
  prompts_cmd->add_option("--template", prompt_template, "Real-world prompt template")
      ->capture_default_str();
  prompts_cmd->add_option("--out", prompts_out, "Output NDJSON file")->required();

  std::string ablate_root, axis = "samples_per_group", grid_text;
  AnalyzeArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Metric changes across a parameter grid");
  ablate_cmd->add_option("dataset", ablate_root,
                         "Dataset directory (context_count: parent of c<N>/ sub-datasets)")
      ->required();
  ablate_cmd->add_option("--axis", axis, "samples_per_group or context_count")
      ->check(CLI::IsMember({"samples_per_group", "context_count"}))
      ->capture_default_str();
  ablate_cmd->add_option("--grid", grid_text, "Comma-separated grid values")->required();
  add_analysis_options(ablate_cmd, ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze_cmd) return run_analyze(analyze);
    if (*report_cmd) return run_report(sweep_path, report_out, report_label);
    if (*fit_cmd) return run_fit_sri(series_path, variant, fit_tau);
    if (*synth_cmd) {
      synth.law = parse_synth_law(law);
      write_dataset(generate(synth), synth_out);
      return 0;
    }
    if (*prompts_cmd) {
      std::vector<PromptRecord> prompts;
      if (!realworld_csv.empty()) {
        prompts = load_realworld(realworld_csv, prompt_template);
      } else if (!letters_profile.empty()) {
        const auto profile = parse_length_profile(letters_profile);
        const auto corpus = make_letters_corpus(LetterSpec::identity(prompt_seed), profile);
        prompts = make_letters_prompts(corpus, context, prompt_seed);
      } else {
        const auto samples = sample_numbers(GroupSpec{groups, per_group, prompt_seed});
        prompts = make_prompts(samples, context, prompt_seed,
                               pooled ? ContextSource::pooled : ContextSource::same_group);
      }
      write_prompts_ndjson(prompts, fs::path(prompts_out));
      return 0;
    }
    if (*ablate_cmd) {
      std::vector<int> grid;
      for (const auto& item : CLI::detail::split(grid_text, ',')) grid.push_back(std::stoi(item));
      const auto rows = run_ablation(ablate_root, parse_ablation_axis(axis), grid,
                                     to_config(ablate));
      std::cout << fmt::format("{} best_layer rho beta quality\n", axis);
      for (const auto& r : rows) {
        std::cout << fmt::format("{} {} {} {} {}\n", r.grid_value, r.best_layer,
                                 format_metric(r.rho),
                                 format_metric(r.beta_reliable ? r.beta : kNaN),
                                 format_metric(r.quality));
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "numberline: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numberline: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
