#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "numberline/dataset.hpp"
#include "numberline/sweep.hpp"

namespace numberline {

struct LabeledSweep {
  std::string label;
  SweepReport report;
};

struct SummaryTables {
  std::string csv;
  std::string markdown;
};

// "NA" for non-finite values, otherwise fixed-point with `decimals` places.
std::string format_metric(double value, int decimals = 4);

// One row per labelled sweep at its best layer. beta is NA when unreliable.
// Std columns (CSV) and "x.xx ± y.yy" cells (Markdown) appear iff some sweep
// has runs > 1.
SummaryTables emit_summary(std::span<const LabeledSweep> reports);

// Header `layer quality rho beta flags`, one whitespace-delimited row per
// layer.
std::string emit_layer_curves(const SweepReport& report);

struct CurveRow {
  std::size_t layer = 0;
  double quality = kNaN;
  double rho = kNaN;
  double beta = kNaN;
  std::string flags;
};
std::vector<CurveRow> parse_layer_curves(const std::string& text);

// Header `log10_value score group_index`, one row per echo-ok sample at the
// report's layer; log10_value is NA for non-positive values.
std::string emit_scatter(const ActivationDataset& dataset, const LayerReport& report,
                         int realworld_bins = 4);

nlohmann::json sweep_to_json(const SweepReport& report);
SweepReport sweep_from_json(const nlohmann::json& doc);

void write_sweep_json(const SweepReport& report, const std::filesystem::path& path);
SweepReport read_sweep_json(const std::filesystem::path& path);

// summary.csv, summary.md and layer_curves.txt under `dir`.
void write_report_files(const LabeledSweep& sweep, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace numberline
