#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace numberline {

enum class SampleKind { numbers, letters, realworld };

std::string_view to_string(SampleKind kind);
// Throws ParseError on unknown names.
SampleKind parse_sample_kind(std::string_view text);

struct Sample {
  std::size_t sample_id = 0;
  // Numeric magnitude, base-26 surrogate for letters, or real-world answer.
  std::int64_t value = 0;
  // 1-based magnitude group; 0 means "not yet assigned" (real-world rows
  // before quantize_groups).
  int group_index = 0;
  SampleKind kind = SampleKind::numbers;
  bool echo_ok = true;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Only f32 / little-endian / layer-major storage exists; the manifest still
// records the three fields so readers can reject anything else.
struct DatasetManifest {
  std::string model_name;
  std::size_t num_layers = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_samples = 0;
  SampleKind kind = SampleKind::numbers;
  std::uint64_t created_with_seed = 0;

  std::size_t tensor_elements() const { return num_layers * num_samples * hidden_dim; }
  std::size_t tensor_bytes() const { return tensor_elements() * sizeof(float); }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

using LayerView =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Per-layer hidden states [layer][sample][dim] plus one label per sample.
// Immutable once constructed; construction validates shapes and finiteness.
class ActivationDataset {
 public:
  ActivationDataset(DatasetManifest manifest, std::vector<float> tensor,
                    std::vector<Sample> labels);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<Sample>& labels() const { return labels_; }
  std::span<const float> tensor() const { return tensor_; }

  std::size_t num_layers() const { return manifest_.num_layers; }
  std::size_t num_samples() const { return manifest_.num_samples; }
  std::size_t hidden_dim() const { return manifest_.hidden_dim; }

  // N x D view of one layer. Throws RangeError for layer >= L.
  LayerView layer(std::size_t index) const;
  // Same slice widened to double for the numerical routines.
  Eigen::MatrixXd layer_matrix(std::size_t index) const;
  Eigen::VectorXd values() const;

  bool all_echo_ok() const;

  friend bool operator==(const ActivationDataset&, const ActivationDataset&) = default;

 private:
  DatasetManifest manifest_;
  std::vector<float> tensor_;
  std::vector<Sample> labels_;
};

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kActivationsFile = "activations.bin";
inline constexpr std::string_view kLabelsFile = "labels.csv";
inline constexpr std::string_view kLabelsHeader = "sample_id,value,group_index,kind,echo_ok";

// Writes manifest.json, activations.bin and labels.csv into `dir`, creating it
// if needed. SchemaError on inconsistent shapes, IoError on write failure.
void write_dataset(const DatasetManifest& manifest, std::span<const float> tensor,
                   std::span<const Sample> labels, const std::filesystem::path& dir);
void write_dataset(const ActivationDataset& dataset, const std::filesystem::path& dir);

// IoError for missing/unreadable files, SchemaError for structural problems,
// DataError for non-finite activations.
ActivationDataset read_dataset(const std::filesystem::path& dir);

// Keeps echo_ok rows only, in their original order, renumbered 0..N'-1.
// EmptyDatasetError when nothing survives.
ActivationDataset filter_echo(const ActivationDataset& dataset);

// Keeps the given rows (in the given order), renumbered 0..N'-1.
ActivationDataset select_samples(const ActivationDataset& dataset,
                                 std::span<const std::size_t> rows);

// Replaces the label table; the tensor is shared by value.
ActivationDataset with_labels(const ActivationDataset& dataset, std::vector<Sample> labels);

}  // namespace numberline
