#include "numberline/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "numberline/corpus.hpp"
#include "numberline/errors.hpp"
#include "numberline/rng.hpp"

namespace numberline {

namespace fs = std::filesystem;

std::string_view to_string(LayerFlag flag) {
  switch (flag) {
    case LayerFlag::degenerate:
      return "degenerate";
    case LayerFlag::negative_diffs:
      return "negative_diffs";
    case LayerFlag::not_converged:
      return "not_converged";
    case LayerFlag::low_rho:
      return "low_rho";
    case LayerFlag::sri_failed:
      return "sri_failed";
  }
  return "degenerate";
}

std::string_view to_string(AblationAxis axis) {
  return axis == AblationAxis::samples_per_group ? "samples_per_group" : "context_count";
}

AblationAxis parse_ablation_axis(std::string_view text) {
  if (text == "samples_per_group") return AblationAxis::samples_per_group;
  if (text == "context_count") return AblationAxis::context_count;
  throw ParseError(fmt::format("unknown ablation axis '{}'", text));
}

Projector make_projector(ProjectionMethod method) {
  if (method == ProjectionMethod::pca) {
    return [](const Eigen::MatrixXd& x, const Eigen::VectorXd&, int p) { return fit_pca(x, p); };
  }
  return [](const Eigen::MatrixXd& x, const Eigen::VectorXd& values, int p) {
    return fit_pls(x, values, p);
  };
}

ActivationDataset prepare_dataset(const ActivationDataset& dataset, int realworld_bins) {
  auto filtered = filter_echo(dataset);
  const auto& labels = filtered.labels();
  const bool unassigned = std::any_of(labels.begin(), labels.end(),
                                      [](const Sample& s) { return s.group_index == 0; });
  if (!unassigned) return filtered;
  return with_labels(filtered, quantize_groups(labels, realworld_bins));
}

ProjectionOutcome project_layer(const ActivationDataset& dataset, std::size_t layer,
                                ProjectionMethod method, int components) {
  const auto prepared = filter_echo(dataset);
  const auto values = prepared.values();
  return orient(make_projector(method)(prepared.layer_matrix(layer), values, components), values);
}

LayerReport analyze_layer(const ActivationDataset& dataset, std::size_t layer,
                          ProjectionMethod method, int components,
                          const AnalysisOptions& options) {
  return analyze_layer(dataset, layer, make_projector(method), method, components, options);
}

LayerReport analyze_layer(const ActivationDataset& dataset, std::size_t layer,
                          const Projector& projector, ProjectionMethod method, int components,
                          const AnalysisOptions& options) {
  if (layer >= dataset.num_layers()) {
    throw RangeError(fmt::format("layer {} out of range (L = {})", layer, dataset.num_layers()));
  }
  LayerReport report;
  report.layer = layer;
  report.method = method;
  report.components = components;

  const auto fail = [&](LayerFlag flag, const Error& e) {
    report.set(flag);
    if (report.note.empty()) report.note = e.what();
  };

  const ActivationDataset* view = &dataset;
  std::optional<ActivationDataset> filtered;
  if (!dataset.all_echo_ok()) {
    try {
      filtered.emplace(filter_echo(dataset));
    } catch (const Error& e) {
      fail(LayerFlag::degenerate, e);
      return report;
    }
    view = &*filtered;
  }
  const auto values = view->values();

  ProjectionOutcome outcome;
  try {
    outcome = orient(projector(view->layer_matrix(layer), values, components), values);
    report.quality = outcome.quality;
    report.rho = spearman(values, outcome.scores.col(0));
  } catch (const Error& e) {
    fail(LayerFlag::degenerate, e);
    return report;
  }
  if (std::abs(report.rho) < options.min_reliable_rho) report.set(LayerFlag::low_rho);

  try {
    report.centers = group_centers(outcome.scores.col(0), view->labels());
    const auto fit = fit_sri(report.centers.centers, SriVariant::differences);
    if (!(std::isfinite(fit.alpha) && std::isfinite(fit.beta) && fit.beta > 0.0)) {
      throw DegenerateError(fmt::format("SRI fit diverged (alpha={}, beta={})", fit.alpha,
                                        fit.beta));
    }
    report.regime = classify_beta(fit.beta, options.beta_tolerance);
    report.alpha = fit.alpha;
    report.beta = fit.beta;
    if (fit.negative_diffs) report.set(LayerFlag::negative_diffs);
    if (!fit.converged) report.set(LayerFlag::not_converged);
  } catch (const Error& e) {
    fail(LayerFlag::sri_failed, e);
    return report;
  }
  try {
    const auto direct = fit_sri(report.centers.centers, SriVariant::direct);
    if (std::isfinite(direct.beta) && direct.beta > 0.0) report.beta_direct = direct.beta;
  } catch (const Error&) {
    // The direct fit is a cross-check; its failure leaves beta_direct NaN.
  }
  return report;
}

std::size_t select_best_layer(std::span<const LayerReport> layers) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& r = layers[i];
    if (r.has(LayerFlag::degenerate) || !std::isfinite(r.quality)) continue;
    if (!best || r.quality > layers[*best].quality) best = i;
  }
  if (!best) throw DegenerateError("every layer is degenerate");
  return layers[*best].layer;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", hash);
}

std::string config_fingerprint(const ActivationDataset& dataset, const SweepConfig& config) {
  const auto& m = dataset.manifest();
  return fmt::format(
      "model={};kind={};L={};N={};D={};data_seed={};method={};components={};runs={};seed={};"
      "k={};bins={};tau={:.17g};rho_min={:.17g}",
      m.model_name, to_string(m.kind), m.num_layers, m.num_samples, m.hidden_dim,
      m.created_with_seed, to_string(config.method), config.components, config.runs, config.seed,
      config.samples_per_group ? *config.samples_per_group : -1, config.realworld_bins,
      config.analysis.beta_tolerance, config.analysis.min_reliable_rho);
}

// Layers are independent; results land in their own slot so the output order
// never depends on scheduling.
std::vector<LayerReport> analyze_all_layers(const ActivationDataset& dataset,
                                            const Projector& projector, const SweepConfig& config) {
  const auto count = dataset.num_layers();
  std::vector<LayerReport> reports(count);
  unsigned workers = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(count));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t l = next++; l < count; l = next++) {
      try {
        reports[l] = analyze_layer(dataset, l, projector, config.method, config.components,
                                   config.analysis);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

MetricSummary summarize(const std::vector<double>& samples) {
  MetricSummary out;
  double sum = 0.0;
  for (const double v : samples) {
    if (std::isfinite(v)) {
      sum += v;
      ++out.count;
    }
  }
  if (out.count == 0) return out;
  out.mean = sum / out.count;
  double sq = 0.0;
  for (const double v : samples) {
    if (std::isfinite(v)) sq += (v - out.mean) * (v - out.mean);
  }
  out.std = std::sqrt(sq / out.count);
  return out;
}

}  // namespace

std::vector<std::size_t> subsample_per_group(const ActivationDataset& dataset, int k,
                                             std::uint64_t seed) {
  if (k < 1) throw RangeError("samples per group must be >= 1");
  std::map<int, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < dataset.num_samples(); ++i) {
    by_group[dataset.labels()[i].group_index].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> rows;
  for (auto& [group, members] : by_group) {
    const auto take = std::min(members.size(), static_cast<std::size_t>(k));
    rng.partial_shuffle(std::span(members), take);
    rows.insert(rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

SweepReport run_sweep(const ActivationDataset& dataset, const SweepConfig& config) {
  return run_sweep(dataset, config, make_projector(config.method));
}

SweepReport run_sweep(const ActivationDataset& dataset, const SweepConfig& config,
                      const Projector& projector) {
  if (config.runs < 1) throw RangeError("runs must be >= 1");
  if (config.components < 1 || config.components > 2) {
    throw RangeError("components must be 1 or 2");
  }
  const auto prepared = prepare_dataset(dataset, config.realworld_bins);

  SweepReport report;
  report.model_name = dataset.manifest().model_name;
  report.kind = dataset.manifest().kind;
  report.num_samples = prepared.num_samples();
  report.config = config;
  report.config_hash = fnv1a_hex(config_fingerprint(dataset, config));
  report.per_layer = analyze_all_layers(prepared, projector, config);
  report.best_layer = select_best_layer(report.per_layer);

  if (config.runs > 1) {
    int k = 0;
    if (config.samples_per_group) {
      k = *config.samples_per_group;
    } else {
      std::map<int, int> counts;
      for (const auto& s : prepared.labels()) ++counts[s.group_index];
      int smallest = std::numeric_limits<int>::max();
      for (const auto& [g, c] : counts) smallest = std::min(smallest, c);
      k = std::max(2, (4 * smallest) / 5);
    }

    const auto layers = prepared.num_layers();
    std::vector<std::vector<double>> rho(layers), alpha(layers), beta(layers), quality(layers);
    for (int run = 0; run < config.runs; ++run) {
      const auto rows = subsample_per_group(prepared, k, mix_seed(config.seed, run));
      const auto subset = select_samples(prepared, rows);
      const auto reports = analyze_all_layers(subset, projector, config);
      for (std::size_t l = 0; l < layers; ++l) {
        rho[l].push_back(reports[l].rho);
        alpha[l].push_back(reports[l].alpha);
        beta[l].push_back(reports[l].beta);
        quality[l].push_back(reports[l].quality);
      }
    }
    auto& aggregated = report.aggregated.emplace();
    for (std::size_t l = 0; l < layers; ++l) {
      aggregated.push_back(LayerAggregate{.layer = l,
                                          .rho = summarize(rho[l]),
                                          .alpha = summarize(alpha[l]),
                                          .beta = summarize(beta[l]),
                                          .quality = summarize(quality[l])});
    }
  }
  return report;
}

namespace {

AblationRow summary_row(int grid_value, const SweepReport& sweep) {
  const auto& best = sweep.best();
  return AblationRow{.grid_value = grid_value,
                     .best_layer = sweep.best_layer,
                     .rho = best.rho,
                     .beta = best.beta,
                     .quality = best.quality,
                     .beta_reliable = best.beta_reliable()};
}

}  // namespace

std::vector<AblationRow> ablate_samples_per_group(const ActivationDataset& dataset,
                                                  std::span<const int> grid,
                                                  const SweepConfig& config) {
  if (grid.empty()) throw RangeError("ablation grid is empty");
  const auto prepared = prepare_dataset(dataset, config.realworld_bins);
  std::map<int, int> counts;
  for (const auto& s : prepared.labels()) ++counts[s.group_index];

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int k = grid[i];
    for (const auto& [group, count] : counts) {
      if (k < 1 || k > count) {
        throw RangeError(fmt::format("cannot keep {} samples from group {} (has {})", k, group,
                                     count));
      }
    }
    const auto subset =
        select_samples(prepared, subsample_per_group(prepared, k, mix_seed(config.seed, i)));
    SweepConfig single = config;
    single.runs = 1;
    rows.push_back(summary_row(k, run_sweep(subset, single)));
  }
  return rows;
}

fs::path context_subdir(const fs::path& root, int context_count) {
  return root / fmt::format("c{}", context_count);
}

std::vector<AblationRow> ablate_context_count(const fs::path& root, std::span<const int> grid,
                                              const SweepConfig& config) {
  if (grid.empty()) throw RangeError("ablation grid is empty");
  std::vector<AblationRow> rows;
  for (const int c : grid) {
    const auto dir = context_subdir(root, c);
    if (!fs::is_directory(dir)) {
      throw IoError(fmt::format("missing sub-dataset {} for context count {}", dir.string(), c));
    }
    rows.push_back(summary_row(c, run_sweep(read_dataset(dir), config)));
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const fs::path& root, AblationAxis axis,
                                      std::span<const int> grid, const SweepConfig& config) {
  if (axis == AblationAxis::context_count) return ablate_context_count(root, grid, config);
  return ablate_samples_per_group(read_dataset(root), grid, config);
}

}  // namespace numberline
