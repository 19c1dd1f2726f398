#include "numberline/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "numberline/corpus.hpp"
#include "numberline/errors.hpp"

namespace numberline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::numbers:
      return "numbers";
    case SampleKind::letters:
      return "letters";
    case SampleKind::realworld:
      return "realworld";
  }
  return "numbers";
}

SampleKind parse_sample_kind(std::string_view text) {
  if (text == "numbers") return SampleKind::numbers;
  if (text == "letters") return SampleKind::letters;
  if (text == "realworld") return SampleKind::realworld;
  throw ParseError(fmt::format("unknown sample kind '{}'", text));
}

namespace {

void validate_labels(const DatasetManifest& manifest, const std::vector<Sample>& labels) {
  if (labels.size() != manifest.num_samples) {
    throw SchemaError(fmt::format("manifest declares {} samples but {} labels were given",
                                  manifest.num_samples, labels.size()));
  }
  std::vector<bool> seen(labels.size(), false);
  for (const auto& s : labels) {
    if (s.sample_id >= labels.size()) {
      throw SchemaError(fmt::format("sample_id {} outside 0..{}", s.sample_id, labels.size() - 1));
    }
    if (seen[s.sample_id]) throw SchemaError(fmt::format("duplicate sample_id {}", s.sample_id));
    seen[s.sample_id] = true;
    if (s.kind != manifest.kind) {
      throw SchemaError(fmt::format("sample {} has kind {} but manifest kind is {}", s.sample_id,
                                    to_string(s.kind), to_string(manifest.kind)));
    }
    if (s.group_index < 0 || s.group_index > kMaxGroup ||
        (s.group_index == 0 && s.kind != SampleKind::realworld)) {
      throw SchemaError(
          fmt::format("sample {} has invalid group_index {}", s.sample_id, s.group_index));
    }
    if (s.kind == SampleKind::numbers && !in_group(s.value, s.group_index)) {
      throw SchemaError(fmt::format("sample {} value {} is not a member of G_{}", s.sample_id,
                                    s.value, s.group_index));
    }
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("read failed for {}", path.string()));
  return std::move(buffer).str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot create {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::uint32_t to_little_endian(std::uint32_t word) {
  if constexpr (std::endian::native == std::endian::little) {
    return word;
  } else {
    return ((word & 0xffu) << 24) | ((word & 0xff00u) << 8) | ((word >> 8) & 0xff00u) |
           (word >> 24);
  }
}

json manifest_to_json(const DatasetManifest& m) {
  return json{{"model_name", m.model_name},
              {"num_layers", m.num_layers},
              {"hidden_dim", m.hidden_dim},
              {"num_samples", m.num_samples},
              {"dtype", "f32"},
              {"endianness", "little"},
              {"layout", "layer_major"},
              {"kind", to_string(m.kind)},
              {"created_with_seed", m.created_with_seed}};
}

template <typename T>
T require_field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw SchemaError(fmt::format("manifest is missing '{}'", key));
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("manifest field '{}' has the wrong type: {}", key, e.what()));
  }
}

DatasetManifest manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(fmt::format("manifest.json is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw SchemaError("manifest.json must hold an object");

  const auto expect = [&](const char* key, std::string_view wanted) {
    const auto got = require_field<std::string>(doc, key);
    if (got != wanted) {
      throw SchemaError(fmt::format("unsupported {} '{}' (expected '{}')", key, got, wanted));
    }
  };
  expect("dtype", "f32");
  expect("endianness", "little");
  expect("layout", "layer_major");

  const auto positive = [&](const char* key) {
    const auto& field = doc.contains(key) ? doc.at(key) : json();
    if (!field.is_number_integer() || field.get<std::int64_t>() < 1) {
      throw SchemaError(fmt::format("manifest field '{}' must be a positive integer", key));
    }
    return static_cast<std::size_t>(field.get<std::int64_t>());
  };

  DatasetManifest m;
  m.model_name = require_field<std::string>(doc, "model_name");
  m.num_layers = positive("num_layers");
  m.hidden_dim = positive("hidden_dim");
  m.num_samples = positive("num_samples");
  try {
    m.kind = parse_sample_kind(require_field<std::string>(doc, "kind"));
  } catch (const ParseError& e) {
    throw SchemaError(e.what());
  }
  const auto& seed = doc.contains("created_with_seed") ? doc.at("created_with_seed") : json();
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw SchemaError("manifest field 'created_with_seed' must be an unsigned integer");
  }
  m.created_with_seed = seed.get<std::uint64_t>();
  return m;
}

std::string labels_to_csv(std::span<const Sample> labels) {
  std::string out(kLabelsHeader);
  out += '\n';
  for (const auto& s : labels) {
    out += fmt::format("{},{},{},{},{}\n", s.sample_id, s.value, s.group_index, to_string(s.kind),
                       s.echo_ok ? "true" : "false");
  }
  return out;
}

template <typename T>
T parse_integer_field(std::string_view field, std::size_t line_no, const char* name) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw SchemaError(fmt::format("labels.csv line {}: bad {} '{}'", line_no, name, field));
  }
  return value;
}

std::vector<Sample> labels_from_csv(const std::string& text) {
  std::vector<Sample> labels;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kLabelsHeader) {
        throw SchemaError(fmt::format("labels.csv header must be '{}'", kLabelsHeader));
      }
      continue;
    }
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 5) {
      throw SchemaError(fmt::format("labels.csv line {}: expected 5 fields, got {}", line_no,
                                    fields.size()));
    }

    Sample s;
    s.sample_id = parse_integer_field<std::size_t>(fields[0], line_no, "sample_id");
    s.value = parse_integer_field<std::int64_t>(fields[1], line_no, "value");
    s.group_index = parse_integer_field<int>(fields[2], line_no, "group_index");
    try {
      s.kind = parse_sample_kind(fields[3]);
    } catch (const ParseError&) {
      throw SchemaError(fmt::format("labels.csv line {}: bad kind '{}'", line_no, fields[3]));
    }
    if (fields[4] == "true") {
      s.echo_ok = true;
    } else if (fields[4] == "false") {
      s.echo_ok = false;
    } else {
      throw SchemaError(fmt::format("labels.csv line {}: bad echo_ok '{}'", line_no, fields[4]));
    }
    labels.push_back(s);
  }
  if (line_no == 0) throw SchemaError("labels.csv is empty");
  return labels;
}

}  // namespace

ActivationDataset::ActivationDataset(DatasetManifest manifest, std::vector<float> tensor,
                                     std::vector<Sample> labels)
    : manifest_(std::move(manifest)), tensor_(std::move(tensor)), labels_(std::move(labels)) {
  if (manifest_.num_layers == 0 || manifest_.hidden_dim == 0 || manifest_.num_samples == 0) {
    throw SchemaError("num_layers, hidden_dim and num_samples must all be >= 1");
  }
  if (tensor_.size() != manifest_.tensor_elements()) {
    throw SchemaError(fmt::format("tensor has {} elements, manifest implies {}", tensor_.size(),
                                  manifest_.tensor_elements()));
  }
  validate_labels(manifest_, labels_);
  // Row position must equal sample_id so that tensor row n is label n.
  std::sort(labels_.begin(), labels_.end(),
            [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
  const auto bad = std::find_if(tensor_.begin(), tensor_.end(),
                                [](float v) { return !std::isfinite(v); });
  if (bad != tensor_.end()) {
    const auto offset = static_cast<std::size_t>(bad - tensor_.begin());
    const auto per_layer = manifest_.num_samples * manifest_.hidden_dim;
    throw DataError(fmt::format("non-finite activation at layer {}, sample {}, dim {}",
                                offset / per_layer, (offset % per_layer) / manifest_.hidden_dim,
                                offset % manifest_.hidden_dim));
  }
}

LayerView ActivationDataset::layer(std::size_t index) const {
  if (index >= num_layers()) {
    throw RangeError(fmt::format("layer {} out of range (L = {})", index, num_layers()));
  }
  const auto stride = num_samples() * hidden_dim();
  return LayerView(tensor_.data() + index * stride, static_cast<Eigen::Index>(num_samples()),
                   static_cast<Eigen::Index>(hidden_dim()));
}

Eigen::MatrixXd ActivationDataset::layer_matrix(std::size_t index) const {
  return layer(index).cast<double>();
}

Eigen::VectorXd ActivationDataset::values() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(labels_.size()));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = static_cast<double>(labels_[i].value);
  }
  return v;
}

bool ActivationDataset::all_echo_ok() const {
  return std::all_of(labels_.begin(), labels_.end(), [](const Sample& s) { return s.echo_ok; });
}

void write_dataset(const DatasetManifest& manifest, std::span<const float> tensor,
                   std::span<const Sample> labels, const fs::path& dir) {
  if (tensor.size() != manifest.tensor_elements()) {
    throw SchemaError(fmt::format("tensor has {} elements, manifest implies {}", tensor.size(),
                                  manifest.tensor_elements()));
  }
  validate_labels(manifest, std::vector<Sample>(labels.begin(), labels.end()));

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  write_text(dir / kManifestFile, manifest_to_json(manifest).dump(2) + "\n");

  std::string blob(tensor.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const auto word = to_little_endian(std::bit_cast<std::uint32_t>(tensor[i]));
    std::memcpy(blob.data() + i * sizeof(float), &word, sizeof word);
  }
  write_text(dir / kActivationsFile, blob);
  write_text(dir / kLabelsFile, labels_to_csv(labels));
}

void write_dataset(const ActivationDataset& dataset, const fs::path& dir) {
  write_dataset(dataset.manifest(), dataset.tensor(), dataset.labels(), dir);
}

ActivationDataset read_dataset(const fs::path& dir) {
  for (const auto name : {kManifestFile, kActivationsFile, kLabelsFile}) {
    if (!fs::is_regular_file(dir / name)) {
      throw IoError(fmt::format("{} is missing from {}", name, dir.string()));
    }
  }
  auto manifest = manifest_from_json(read_text(dir / kManifestFile));

  const auto blob = read_text(dir / kActivationsFile);
  if (blob.size() != manifest.tensor_bytes()) {
    throw SchemaError(fmt::format("activations.bin holds {} bytes, expected {} (L*N*D*4)",
                                  blob.size(), manifest.tensor_bytes()));
  }
  std::vector<float> tensor(manifest.tensor_elements());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    std::uint32_t word;
    std::memcpy(&word, blob.data() + i * sizeof(float), sizeof word);
    tensor[i] = std::bit_cast<float>(to_little_endian(word));
  }

  auto labels = labels_from_csv(read_text(dir / kLabelsFile));
  return ActivationDataset(std::move(manifest), std::move(tensor), std::move(labels));
}

ActivationDataset select_samples(const ActivationDataset& dataset,
                                 std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyDatasetError("no samples selected");
  const auto n = dataset.num_samples();
  const auto d = dataset.hidden_dim();
  const auto layers = dataset.num_layers();

  DatasetManifest manifest = dataset.manifest();
  manifest.num_samples = rows.size();
  std::vector<float> tensor(layers * rows.size() * d);
  std::vector<Sample> labels;
  labels.reserve(rows.size());

  const auto source = dataset.tensor();
  for (std::size_t out_row = 0; out_row < rows.size(); ++out_row) {
    const auto row = rows[out_row];
    if (row >= n) throw RangeError(fmt::format("row {} out of range (N = {})", row, n));
    for (std::size_t l = 0; l < layers; ++l) {
      std::copy_n(source.data() + (l * n + row) * d, d,
                  tensor.data() + (l * rows.size() + out_row) * d);
    }
    Sample s = dataset.labels()[row];
    s.sample_id = out_row;
    labels.push_back(s);
  }
  return ActivationDataset(std::move(manifest), std::move(tensor), std::move(labels));
}

ActivationDataset filter_echo(const ActivationDataset& dataset) {
  if (dataset.all_echo_ok()) return dataset;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dataset.num_samples(); ++i) {
    if (dataset.labels()[i].echo_ok) rows.push_back(i);
  }
  if (rows.empty()) throw EmptyDatasetError("no sample passed the echo filter");
  return select_samples(dataset, rows);
}

ActivationDataset with_labels(const ActivationDataset& dataset, std::vector<Sample> labels) {
  return ActivationDataset(dataset.manifest(),
                           std::vector<float>(dataset.tensor().begin(), dataset.tensor().end()),
                           std::move(labels));
}

}  // namespace numberline
