#include "numberline/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "numberline/errors.hpp"

namespace numberline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_metric(double value, int decimals) {
  if (!std::isfinite(value)) return "NA";
  auto text = fmt::format("{:.{}f}", value, decimals);
  // Avoid "-0.0000" so equal reports never differ by the sign of zero.
  if (text.find_first_not_of("-0.") == std::string::npos && text.front() == '-') text.erase(0, 1);
  return text;
}

namespace {

std::string flags_text(const LayerReport& r) {
  std::string out;
  for (const auto flag : kAllLayerFlags) {
    if (!r.has(flag)) continue;
    if (!out.empty()) out += ',';
    out += to_string(flag);
  }
  return out.empty() ? "-" : out;
}

std::string quality_symbol(std::span<const LabeledSweep> reports) {
  bool pca = false;
  bool pls = false;
  for (const auto& r : reports) {
    (r.report.config.method == ProjectionMethod::pca ? pca : pls) = true;
  }
  if (pca && !pls) return "σ²";
  if (pls && !pca) return "R²";
  return "Quality";
}

struct Cell {
  double value = kNaN;
  double std = kNaN;
};

}  // namespace

SummaryTables emit_summary(std::span<const LabeledSweep> reports) {
  bool with_std = false;
  for (const auto& r : reports) with_std = with_std || r.report.config.runs > 1;

  SummaryTables out;
  out.csv = with_std ? "model,group_kind,method,layer,rho,rho_std,beta,beta_std,quality,quality_std\n"
                     : "model,group_kind,method,layer,rho,beta,quality\n";
  const auto q = quality_symbol(reports);
  if (with_std) {
    out.markdown = fmt::format("| Model | Group | Layer | ρ ± std | β ± std | {} ± std |\n", q);
  } else {
    out.markdown = fmt::format("| Model | Group | Layer | ρ | β | {} |\n", q);
  }
  out.markdown += "|---|---|---|---|---|---|\n";

  for (const auto& [label, report] : reports) {
    const auto& best = report.best();
    Cell rho{best.rho};
    Cell beta{best.beta_reliable() ? best.beta : kNaN};
    Cell quality{best.quality};
    if (report.aggregated) {
      const auto& agg = report.aggregated->at(report.best_layer);
      rho = {agg.rho.mean, agg.rho.std};
      if (best.beta_reliable()) beta = {agg.beta.mean, agg.beta.std};
      quality = {agg.quality.mean, agg.quality.std};
    }

    const auto kind = to_string(report.kind);
    const auto method = to_string(report.config.method);
    if (with_std) {
      out.csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", label, kind, method,
                             report.best_layer, format_metric(rho.value),
                             format_metric(rho.std), format_metric(beta.value),
                             format_metric(beta.std), format_metric(quality.value),
                             format_metric(quality.std));
      const auto pm = [](const Cell& c) {
        if (!std::isfinite(c.value)) return std::string("NA");
        return fmt::format("{} ± {}", format_metric(c.value, 2), format_metric(c.std, 2));
      };
      out.markdown += fmt::format("| {} | {} | {} | {} | {} | {} |\n", label, kind,
                                  report.best_layer, pm(rho), pm(beta), pm(quality));
    } else {
      out.csv += fmt::format("{},{},{},{},{},{},{}\n", label, kind, method, report.best_layer,
                             format_metric(rho.value), format_metric(beta.value),
                             format_metric(quality.value));
      out.markdown += fmt::format("| {} | {} | {} | {} | {} | {} |\n", label, kind,
                                  report.best_layer, format_metric(rho.value, 2),
                                  format_metric(beta.value, 2), format_metric(quality.value, 2));
    }
  }
  return out;
}

std::string emit_layer_curves(const SweepReport& report) {
  std::string out = "layer quality rho beta flags\n";
  for (const auto& r : report.per_layer) {
    out += fmt::format("{} {} {} {} {}\n", r.layer, format_metric(r.quality),
                       format_metric(r.rho),
                       format_metric(r.beta_reliable() ? r.beta : kNaN), flags_text(r));
  }
  return out;
}

std::vector<CurveRow> parse_layer_curves(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "layer quality rho beta flags") {
    throw ParseError("layer curve file has an unexpected header");
  }
  const auto number = [](const std::string& token) {
    return token == "NA" ? kNaN : std::stod(token);
  };
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    CurveRow row;
    std::string quality, rho, beta;
    if (!(fields >> row.layer >> quality >> rho >> beta >> row.flags)) {
      throw ParseError(fmt::format("malformed layer curve row '{}'", line));
    }
    row.quality = number(quality);
    row.rho = number(rho);
    row.beta = number(beta);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string emit_scatter(const ActivationDataset& dataset, const LayerReport& report,
                         int realworld_bins) {
  std::string out = "log10_value score group_index\n";
  if (std::none_of(dataset.labels().begin(), dataset.labels().end(),
                   [](const Sample& s) { return s.echo_ok; })) {
    return out;
  }
  const auto prepared = prepare_dataset(dataset, realworld_bins);
  const auto outcome = project_layer(prepared, report.layer, report.method, report.components);
  for (std::size_t i = 0; i < prepared.num_samples(); ++i) {
    const auto& s = prepared.labels()[i];
    const auto x =
        s.value > 0 ? fmt::format("{:.10g}", std::log10(static_cast<double>(s.value))) : "NA";
    out += fmt::format("{} {:.10g} {}\n", x, outcome.scores(static_cast<Eigen::Index>(i), 0),
                       s.group_index);
  }
  return out;
}

namespace {

json number_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

double number_from(const json& node) {
  return node.is_null() ? kNaN : node.get<double>();
}

json summary_to_json(const MetricSummary& s) {
  return json{{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)},
              {"count", s.count}};
}

MetricSummary summary_from_json(const json& node) {
  return MetricSummary{number_from(node.at("mean")), number_from(node.at("std")),
                       node.at("count").get<int>()};
}

Regime parse_regime(const std::string& text) {
  if (text == "sublogarithmic") return Regime::sublogarithmic;
  if (text == "logarithmic") return Regime::logarithmic;
  if (text == "superlinear") return Regime::superlinear;
  throw ParseError(fmt::format("unknown regime '{}'", text));
}

LayerFlag parse_flag(const std::string& text) {
  for (const auto flag : kAllLayerFlags) {
    if (to_string(flag) == text) return flag;
  }
  throw ParseError(fmt::format("unknown layer flag '{}'", text));
}

}  // namespace

json sweep_to_json(const SweepReport& report) {
  const auto& c = report.config;
  json config{{"method", to_string(c.method)},
              {"components", c.components},
              {"runs", c.runs},
              {"seed", c.seed},
              {"samples_per_group",
               c.samples_per_group ? json(*c.samples_per_group) : json(nullptr)},
              {"realworld_bins", c.realworld_bins},
              {"beta_tolerance", c.analysis.beta_tolerance},
              {"min_reliable_rho", c.analysis.min_reliable_rho}};

  json layers = json::array();
  for (const auto& r : report.per_layer) {
    json flags = json::array();
    for (const auto flag : kAllLayerFlags) {
      if (r.has(flag)) flags.push_back(to_string(flag));
    }
    layers.push_back(json{
        {"layer", r.layer},
        {"rho", number_or_null(r.rho)},
        {"alpha", number_or_null(r.alpha)},
        {"beta", number_or_null(r.beta)},
        {"beta_direct", number_or_null(r.beta_direct)},
        {"quality", number_or_null(r.quality)},
        {"regime", r.regime ? json(to_string(r.regime->regime)) : json(nullptr)},
        {"beta_reliable", r.beta_reliable()},
        {"flags", flags},
        {"note", r.note},
        {"centers",
         json{{"group_indices", r.centers.group_indices},
              {"centers", r.centers.centers},
              {"counts", r.centers.counts},
              {"dropped_groups", r.centers.dropped_groups}}}});
  }

  json aggregated = nullptr;
  if (report.aggregated) {
    aggregated = json::array();
    for (const auto& a : *report.aggregated) {
      aggregated.push_back(json{{"layer", a.layer},
                                {"rho", summary_to_json(a.rho)},
                                {"alpha", summary_to_json(a.alpha)},
                                {"beta", summary_to_json(a.beta)},
                                {"quality", summary_to_json(a.quality)}});
    }
  }

  return json{{"format_version", kSweepFormatVersion},
              {"model_name", report.model_name},
              {"kind", to_string(report.kind)},
              {"num_samples", report.num_samples},
              {"method", to_string(c.method)},
              {"components", c.components},
              {"runs", c.runs},
              {"config", config},
              {"config_hash", report.config_hash},
              {"best_layer", report.best_layer},
              {"per_layer", layers},
              {"aggregated", aggregated}};
}

SweepReport sweep_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<std::string>() != kSweepFormatVersion) {
      throw SchemaError("unsupported sweep format version");
    }
    SweepReport report;
    report.model_name = doc.at("model_name").get<std::string>();
    report.kind = parse_sample_kind(doc.at("kind").get<std::string>());
    report.num_samples = doc.at("num_samples").get<std::size_t>();
    report.config_hash = doc.at("config_hash").get<std::string>();
    report.best_layer = doc.at("best_layer").get<std::size_t>();

    const auto& c = doc.at("config");
    auto& config = report.config;
    config.method = parse_projection_method(c.at("method").get<std::string>());
    config.components = c.at("components").get<int>();
    config.runs = c.at("runs").get<int>();
    config.seed = c.at("seed").get<std::uint64_t>();
    if (!c.at("samples_per_group").is_null()) {
      config.samples_per_group = c.at("samples_per_group").get<int>();
    }
    config.realworld_bins = c.at("realworld_bins").get<int>();
    config.analysis.beta_tolerance = c.at("beta_tolerance").get<double>();
    config.analysis.min_reliable_rho = c.at("min_reliable_rho").get<double>();

    for (const auto& node : doc.at("per_layer")) {
      LayerReport r;
      r.layer = node.at("layer").get<std::size_t>();
      r.method = config.method;
      r.components = config.components;
      r.rho = number_from(node.at("rho"));
      r.alpha = number_from(node.at("alpha"));
      r.beta = number_from(node.at("beta"));
      r.beta_direct = number_from(node.at("beta_direct"));
      r.quality = number_from(node.at("quality"));
      if (!node.at("regime").is_null()) {
        r.regime = BetaRegime{parse_regime(node.at("regime").get<std::string>()),
                              config.analysis.beta_tolerance};
      }
      for (const auto& flag : node.at("flags")) r.set(parse_flag(flag.get<std::string>()));
      r.note = node.at("note").get<std::string>();
      const auto& centers = node.at("centers");
      r.centers.group_indices = centers.at("group_indices").get<std::vector<int>>();
      r.centers.centers = centers.at("centers").get<std::vector<double>>();
      r.centers.counts = centers.at("counts").get<std::vector<int>>();
      r.centers.dropped_groups = centers.at("dropped_groups").get<std::vector<int>>();
      report.per_layer.push_back(std::move(r));
    }
    if (report.best_layer >= report.per_layer.size()) {
      throw SchemaError("best_layer does not name a reported layer");
    }

    if (!doc.at("aggregated").is_null()) {
      auto& aggregated = report.aggregated.emplace();
      for (const auto& node : doc.at("aggregated")) {
        aggregated.push_back(LayerAggregate{.layer = node.at("layer").get<std::size_t>(),
                                            .rho = summary_from_json(node.at("rho")),
                                            .alpha = summary_from_json(node.at("alpha")),
                                            .beta = summary_from_json(node.at("beta")),
                                            .quality = summary_from_json(node.at("quality"))});
      }
    }
    return report;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed sweep report: {}", e.what()));
  } catch (const ParseError& e) {
    throw SchemaError(fmt::format("malformed sweep report: {}", e.what()));
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", path.parent_path().string(),
                                      ec.message()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot create {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

void write_sweep_json(const SweepReport& report, const fs::path& path) {
  write_text_file(path, sweep_to_json(report).dump(2) + "\n");
}

SweepReport read_sweep_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
  return sweep_from_json(doc);
}

void write_report_files(const LabeledSweep& sweep, const fs::path& dir) {
  const auto tables = emit_summary(std::span(&sweep, 1));
  write_text_file(dir / "summary.csv", tables.csv);
  write_text_file(dir / "summary.md", tables.markdown);
  write_text_file(dir / "layer_curves.txt", emit_layer_curves(sweep.report));
}

}  // namespace numberline
