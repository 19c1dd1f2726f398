#include "numberline/synth.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "numberline/errors.hpp"
#include "numberline/rng.hpp"

namespace numberline {

std::string_view to_string(SynthLaw law) {
  switch (law) {
    case SynthLaw::log10:
      return "log10";
    case SynthLaw::linear:
      return "linear";
    case SynthLaw::reciprocal:
      return "reciprocal";
    case SynthLaw::shuffled:
      return "shuffled";
  }
  return "log10";
}

SynthLaw parse_synth_law(std::string_view text) {
  if (text == "log10") return SynthLaw::log10;
  if (text == "linear") return SynthLaw::linear;
  if (text == "reciprocal") return SynthLaw::reciprocal;
  if (text == "shuffled") return SynthLaw::shuffled;
  throw ParseError(fmt::format("unknown synthetic law '{}'", text));
}

double encode_value(SynthLaw law, std::int64_t value) {
  const auto x = static_cast<double>(value);
  switch (law) {
    case SynthLaw::linear:
      return x;
    case SynthLaw::reciprocal:
      return 1.0 - 1.0 / x;
    case SynthLaw::log10:
    case SynthLaw::shuffled:
      return std::log10(x);
  }
  return std::log10(x);
}

ActivationDataset generate(const SynthSpec& spec) {
  if (spec.dim < 1 || spec.layers < 1) throw RangeError("dim and layers must be >= 1");
  if (spec.signal_layer >= spec.layers) {
    throw RangeError(fmt::format("signal_layer {} outside [0, {})", spec.signal_layer,
                                 spec.layers));
  }
  if (!(spec.noise_sigma >= 0.0) || !(spec.distractor_sigma >= 0.0)) {
    throw RangeError("noise levels must be non-negative");
  }

  auto samples = sample_numbers(spec.groups);
  const auto n = samples.size();
  const auto d = spec.dim;

  Rng rng(spec.seed);
  std::vector<double> direction(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (auto& c : direction) c = rng.normal();
    norm = 0.0;
    for (const double c : direction) norm += c * c;
    norm = std::sqrt(norm);
  }
  for (auto& c : direction) c /= norm;

  std::vector<double> code(n);
  for (std::size_t i = 0; i < n; ++i) code[i] = encode_value(spec.law, samples[i].value);
  if (spec.law == SynthLaw::shuffled) rng.shuffle(std::span(code));

  std::vector<float> tensor(spec.layers * n * d);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const bool signal = l == spec.signal_layer;
    const double sigma = signal ? spec.noise_sigma : spec.distractor_sigma;
    for (std::size_t i = 0; i < n; ++i) {
      float* row = tensor.data() + (l * n + i) * d;
      for (std::size_t k = 0; k < d; ++k) {
        const double mean = signal ? code[i] * direction[k] : 0.0;
        // Always draw so every layer's noise is independent of sigma == 0.
        row[k] = static_cast<float>(mean + sigma * rng.normal());
      }
    }
  }

  DatasetManifest manifest{.model_name = fmt::format("synthetic-{}", to_string(spec.law)),
                           .num_layers = spec.layers,
                           .hidden_dim = d,
                           .num_samples = n,
                           .kind = SampleKind::numbers,
                           .created_with_seed = spec.seed};
  return ActivationDataset(std::move(manifest), std::move(tensor), std::move(samples));
}

}  // namespace numberline
