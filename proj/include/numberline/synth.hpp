#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "numberline/corpus.hpp"
#include "numberline/dataset.hpp"

namespace numberline {

enum class SynthLaw { log10, linear, reciprocal, shuffled };

std::string_view to_string(SynthLaw law);
SynthLaw parse_synth_law(std::string_view text);

// Scalar code g(x) the law writes along the signal direction. `shuffled`
// uses log10 before the permutation.
double encode_value(SynthLaw law, std::int64_t value);

struct SynthSpec {
  SynthLaw law = SynthLaw::log10;
  std::size_t dim = 64;
  std::size_t layers = 4;
  std::size_t signal_layer = 2;
  double noise_sigma = 0.01;
  double distractor_sigma = 0.1;
  GroupSpec groups;
  std::uint64_t seed = 42;
};

// Signal layer: g(x) * u + N(0, noise_sigma^2 I) with u a seeded random unit
// vector; every other layer is N(0, distractor_sigma^2 I). RangeError for an
// invalid spec.
ActivationDataset generate(const SynthSpec& spec);

}  // namespace numberline
