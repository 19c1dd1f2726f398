#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numberline/dataset.hpp"
#include "numberline/metrics.hpp"
#include "numberline/projection.hpp"

namespace numberline {

enum class LayerFlag : unsigned {
  degenerate = 1u << 0,      // projection or rank correlation undefined
  negative_diffs = 1u << 1,  // group centers not monotone
  not_converged = 1u << 2,
  low_rho = 1u << 3,         // rho below the reliability threshold
  sri_failed = 1u << 4,      // too few groups or flat centers
};

std::string_view to_string(LayerFlag flag);
inline constexpr LayerFlag kAllLayerFlags[] = {LayerFlag::degenerate, LayerFlag::negative_diffs,
                                               LayerFlag::not_converged, LayerFlag::low_rho,
                                               LayerFlag::sri_failed};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LayerReport {
  std::size_t layer = 0;
  ProjectionMethod method = ProjectionMethod::pca;
  int components = 1;
  double rho = kNaN;
  double alpha = kNaN;
  double beta = kNaN;         // differences fit
  double beta_direct = kNaN;  // direct fit, cross-check only
  double quality = kNaN;
  std::optional<BetaRegime> regime;
  GroupCenters centers;
  unsigned flags = 0;
  std::string note;  // first sub-step failure, if any

  bool has(LayerFlag flag) const { return (flags & static_cast<unsigned>(flag)) != 0; }
  void set(LayerFlag flag) { flags |= static_cast<unsigned>(flag); }
  // beta is reported as NA downstream unless this holds.
  bool beta_reliable() const { return flags == 0 && std::isfinite(beta); }
};

struct AnalysisOptions {
  double beta_tolerance = kDefaultBetaTolerance;
  // |rho| below this marks beta as unreliable.
  double min_reliable_rho = 0.5;
};

using Projector =
    std::function<ProjectionOutcome(const Eigen::MatrixXd& x, const Eigen::VectorXd& values,
                                    int components)>;

Projector make_projector(ProjectionMethod method);

// Echo-filtered, oriented projection of one layer (what analyze_layer and the
// scatter emitter see).
ProjectionOutcome project_layer(const ActivationDataset& dataset, std::size_t layer,
                                ProjectionMethod method, int components);

// Sub-step failures become flags; only an out-of-range layer throws.
LayerReport analyze_layer(const ActivationDataset& dataset, std::size_t layer,
                          ProjectionMethod method, int components,
                          const AnalysisOptions& options = {});
LayerReport analyze_layer(const ActivationDataset& dataset, std::size_t layer,
                          const Projector& projector, ProjectionMethod method, int components,
                          const AnalysisOptions& options = {});

struct SweepConfig {
  ProjectionMethod method = ProjectionMethod::pca;
  int components = 1;
  int runs = 1;
  std::uint64_t seed = 42;
  // Rows kept per group in each resampling run; unset keeps 80% (at least 2).
  std::optional<int> samples_per_group;
  int realworld_bins = 4;
  AnalysisOptions analysis;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct MetricSummary {
  double mean = kNaN;
  double std = kNaN;  // population standard deviation over valid runs
  int count = 0;
};

struct LayerAggregate {
  std::size_t layer = 0;
  MetricSummary rho;
  MetricSummary alpha;
  MetricSummary beta;
  MetricSummary quality;
};

inline constexpr std::string_view kSweepFormatVersion = "numberline-sweep/1";

struct SweepReport {
  std::string model_name;
  SampleKind kind = SampleKind::numbers;
  std::size_t num_samples = 0;  // after the echo filter
  SweepConfig config;
  std::string config_hash;
  std::vector<LayerReport> per_layer;
  std::size_t best_layer = 0;
  std::optional<std::vector<LayerAggregate>> aggregated;  // present iff runs > 1

  const LayerReport& best() const { return per_layer.at(best_layer); }
};

// Echo filter, then group assignment for real-world rows still at group 0.
ActivationDataset prepare_dataset(const ActivationDataset& dataset, int realworld_bins = 4);

// Highest quality among non-degenerate layers; ties go to the lowest index.
// DegenerateError if every layer is degenerate.
std::size_t select_best_layer(std::span<const LayerReport> layers);

SweepReport run_sweep(const ActivationDataset& dataset, const SweepConfig& config);
SweepReport run_sweep(const ActivationDataset& dataset, const SweepConfig& config,
                      const Projector& projector);

// Rows to keep, up to k per group, chosen with `seed` and returned sorted.
std::vector<std::size_t> subsample_per_group(const ActivationDataset& dataset, int k,
                                             std::uint64_t seed);

enum class AblationAxis { samples_per_group, context_count };

std::string_view to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(std::string_view text);

struct AblationRow {
  int grid_value = 0;
  std::size_t best_layer = 0;
  double rho = kNaN;
  double beta = kNaN;
  double quality = kNaN;
  bool beta_reliable = false;
};

// One row per k: keep k rows per group (RangeError when a group is smaller)
// and sweep the result.
std::vector<AblationRow> ablate_samples_per_group(const ActivationDataset& dataset,
                                                  std::span<const int> grid,
                                                  const SweepConfig& config);
// One row per c, read from <root>/c<value>. IoError for a missing sub-dataset.
std::vector<AblationRow> ablate_context_count(const std::filesystem::path& root,
                                              std::span<const int> grid,
                                              const SweepConfig& config);
std::vector<AblationRow> run_ablation(const std::filesystem::path& root, AblationAxis axis,
                                      std::span<const int> grid, const SweepConfig& config);

std::filesystem::path context_subdir(const std::filesystem::path& root, int context_count);

}  // namespace numberline
