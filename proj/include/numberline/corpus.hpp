#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "numberline/dataset.hpp"

namespace numberline {

inline constexpr int kMaxGroup = 15;

// G_1 = {1..20}; G_j = {10^j - 19, ..., 10^j + 20} for 2 <= j <= 15.
// Returned in increasing order. RangeError outside [1, 15].
std::vector<std::int64_t> make_group(int j);
std::size_t group_size(int j);
bool in_group(std::int64_t value, int j);

struct GroupSpec {
  int max_group = 6;
  int samples_per_group = 20;
  std::uint64_t seed = 42;
};

// k distinct values per group 1..K, seeded; RangeError if k exceeds a group.
std::vector<Sample> sample_numbers(const GroupSpec& spec);

struct PromptRecord {
  Sample sample;
  std::string prompt_text;
  int context_count = 0;
};

// "v1=v1, ..., vc=vc, x=" with the v_i drawn without replacement from
// `context_pool` minus x. RangeError if fewer than c candidates remain.
PromptRecord build_prompt(const Sample& x, std::span<const std::int64_t> context_pool, int c,
                          std::uint64_t seed);

enum class ContextSource { same_group, pooled };

// One prompt per sample. Each sample draws its context with a seed derived
// from (seed, sample_id).
std::vector<PromptRecord> make_prompts(std::span<const Sample> samples, int c, std::uint64_t seed,
                                       ContextSource source = ContextSource::same_group);

// Letters control ---------------------------------------------------------

struct LetterSpec {
  // alphabet_map[letter - 'a'] is the digit assigned to that letter.
  std::array<int, 26> alphabet_map{};
  std::uint64_t seed = 42;

  static LetterSpec identity(std::uint64_t seed = 42);
  // Random but fixed bijection derived from `seed`.
  static LetterSpec permuted(std::uint64_t seed);
};

// Big-endian base-26 value. ParseError for empty strings or characters
// outside a-z; RangeError when the value does not fit in int64.
std::int64_t letters_value(std::string_view text, const LetterSpec& spec);

struct LengthBucket {
  int length = 0;
  int count = 0;
};

struct LettersCorpus {
  std::vector<Sample> samples;
  std::vector<std::string> texts;  // parallel to samples
};

// Distinct random strings per length; group_index is the rank of the length
// among the profile's distinct lengths.
LettersCorpus make_letters_corpus(const LetterSpec& spec, std::span<const LengthBucket> profile);

// Letter-sequence prompts, context drawn from the same length group.
std::vector<PromptRecord> make_letters_prompts(const LettersCorpus& corpus, int c,
                                               std::uint64_t seed);

// Parses "1:20,3:5" into length buckets.
std::vector<LengthBucket> parse_length_profile(std::string_view text);

// Real-world tables -------------------------------------------------------

// CSV with header `entity,value`; `[entity]` in the template is substituted.
// Rows come back with kind=realworld and group_index 0.
std::vector<PromptRecord> load_realworld(const std::filesystem::path& csv_path,
                                         std::string_view prompt_template);

// group = 1 + floor(bins * (v - min) / (max - min + 1)), clamped to [1, bins].
std::vector<Sample> quantize_groups(std::span<const Sample> samples, int bins = 4);

// NDJSON prompt files -------------------------------------------------------

void write_prompts_ndjson(std::span<const PromptRecord> prompts, std::ostream& out);
void write_prompts_ndjson(std::span<const PromptRecord> prompts,
                          const std::filesystem::path& path);
std::vector<PromptRecord> read_prompts_ndjson(std::istream& in);

}  // namespace numberline
