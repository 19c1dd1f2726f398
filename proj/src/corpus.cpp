#include "numberline/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "numberline/errors.hpp"
#include "numberline/rng.hpp"

namespace numberline {

namespace {

std::int64_t pow10(int j) {
  std::int64_t p = 1;
  for (int i = 0; i < j; ++i) p *= 10;
  return p;
}

void check_group_index(int j) {
  if (j < 1 || j > kMaxGroup) {
    throw RangeError(fmt::format("group index {} outside [1, {}]", j, kMaxGroup));
  }
}

// splitmix64 finalizer; decorrelates per-sample seeds derived from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string render_prompt(std::span<const std::string> context, std::string_view probe) {
  std::string text;
  for (const auto& v : context) {
    text += fmt::format("{}={}, ", v, v);
  }
  text += probe;
  text += '=';
  return text;
}

}  // namespace

std::size_t group_size(int j) {
  check_group_index(j);
  return j == 1 ? 20 : 40;
}

std::vector<std::int64_t> make_group(int j) {
  check_group_index(j);
  std::vector<std::int64_t> group(group_size(j));
  const std::int64_t first = j == 1 ? 1 : pow10(j) - 19;
  std::iota(group.begin(), group.end(), first);
  return group;
}

bool in_group(std::int64_t value, int j) {
  if (j < 1 || j > kMaxGroup) return false;
  if (j == 1) return value >= 1 && value <= 20;
  const auto center = pow10(j);
  return value >= center - 19 && value <= center + 20;
}

std::vector<Sample> sample_numbers(const GroupSpec& spec) {
  if (spec.max_group < 1 || spec.max_group > kMaxGroup) {
    throw RangeError(fmt::format("max_group {} outside [1, {}]", spec.max_group, kMaxGroup));
  }
  if (spec.samples_per_group < 1) throw RangeError("samples_per_group must be >= 1");

  Rng rng(spec.seed);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(spec.max_group * spec.samples_per_group));
  for (int j = 1; j <= spec.max_group; ++j) {
    auto group = make_group(j);
    const auto k = static_cast<std::size_t>(spec.samples_per_group);
    if (k > group.size()) {
      throw RangeError(fmt::format("cannot draw {} distinct values from G_{} (size {})", k, j,
                                   group.size()));
    }
    rng.partial_shuffle(std::span(group), k);
    for (std::size_t i = 0; i < k; ++i) {
      samples.push_back(Sample{.sample_id = samples.size(),
                               .value = group[i],
                               .group_index = j,
                               .kind = SampleKind::numbers,
                               .echo_ok = true});
    }
  }
  return samples;
}

PromptRecord build_prompt(const Sample& x, std::span<const std::int64_t> context_pool, int c,
                          std::uint64_t seed) {
  if (c < 0) throw RangeError("context count must be >= 0");
  std::vector<std::int64_t> candidates;
  for (const auto v : context_pool) {
    if (v != x.value && std::find(candidates.begin(), candidates.end(), v) == candidates.end()) {
      candidates.push_back(v);
    }
  }
  const auto count = static_cast<std::size_t>(c);
  if (candidates.size() < count) {
    throw RangeError(fmt::format("context pool offers {} values other than {}, need {}",
                                 candidates.size(), x.value, c));
  }
  Rng rng(seed);
  rng.partial_shuffle(std::span(candidates), count);

  std::vector<std::string> context;
  for (std::size_t i = 0; i < count; ++i) context.push_back(std::to_string(candidates[i]));
  return PromptRecord{x, render_prompt(context, std::to_string(x.value)), c};
}

std::vector<PromptRecord> make_prompts(std::span<const Sample> samples, int c, std::uint64_t seed,
                                       ContextSource source) {
  std::vector<std::int64_t> pooled;
  if (source == ContextSource::pooled) {
    std::set<int> groups;
    for (const auto& s : samples) groups.insert(s.group_index);
    for (const int j : groups) {
      const auto g = make_group(j);
      pooled.insert(pooled.end(), g.begin(), g.end());
    }
  }
  std::vector<PromptRecord> prompts;
  prompts.reserve(samples.size());
  for (const auto& s : samples) {
    const auto pool = source == ContextSource::pooled ? pooled : make_group(s.group_index);
    prompts.push_back(build_prompt(s, pool, c, mix_seed(seed, s.sample_id)));
  }
  return prompts;
}

LetterSpec LetterSpec::identity(std::uint64_t seed) {
  LetterSpec spec;
  std::iota(spec.alphabet_map.begin(), spec.alphabet_map.end(), 0);
  spec.seed = seed;
  return spec;
}

LetterSpec LetterSpec::permuted(std::uint64_t seed) {
  LetterSpec spec = identity(seed);
  Rng rng(mix_seed(seed, 26));
  rng.shuffle(std::span<int>(spec.alphabet_map));
  return spec;
}

std::int64_t letters_value(std::string_view text, const LetterSpec& spec) {
  if (text.empty()) throw ParseError("letter sequence is empty");
  std::int64_t value = 0;
  for (const char ch : text) {
    if (ch < 'a' || ch > 'z') {
      throw ParseError(fmt::format("invalid character '{}' in letter sequence", ch));
    }
    const std::int64_t digit = spec.alphabet_map[static_cast<std::size_t>(ch - 'a')];
    if (__builtin_mul_overflow(value, std::int64_t{26}, &value) ||
        __builtin_add_overflow(value, digit, &value)) {
      throw RangeError(fmt::format("'{}' does not fit in a signed 64-bit value", text));
    }
  }
  return value;
}

LettersCorpus make_letters_corpus(const LetterSpec& spec, std::span<const LengthBucket> profile) {
  std::set<int> lengths;
  for (const auto& bucket : profile) {
    if (bucket.length < 1) throw RangeError("letter sequence length must be >= 1");
    if (bucket.count < 1) throw RangeError("letter bucket count must be >= 1");
    lengths.insert(bucket.length);
  }
  if (lengths.size() > static_cast<std::size_t>(kMaxGroup)) {
    throw RangeError(fmt::format("at most {} distinct lengths are supported", kMaxGroup));
  }
  std::map<int, int> group_of_length;
  for (const int len : lengths) {
    group_of_length.emplace(len, static_cast<int>(group_of_length.size()) + 1);
  }

  Rng rng(spec.seed);
  LettersCorpus corpus;
  std::map<int, std::set<std::string>> used;
  for (const auto& bucket : profile) {
    // 26^len distinct strings exist; only small lengths can run out.
    double available = 1.0;
    for (int i = 0; i < bucket.length && available < 1e18; ++i) available *= 26.0;
    auto& taken = used[bucket.length];
    if (static_cast<double>(taken.size() + static_cast<std::size_t>(bucket.count)) > available) {
      throw RangeError(fmt::format("cannot draw {} distinct strings of length {}", bucket.count,
                                   bucket.length));
    }
    for (int n = 0; n < bucket.count;) {
      std::string text(static_cast<std::size_t>(bucket.length), 'a');
      for (auto& ch : text) ch = static_cast<char>('a' + rng.uniform_index(26));
      if (!taken.insert(text).second) continue;
      corpus.samples.push_back(Sample{.sample_id = corpus.samples.size(),
                                      .value = letters_value(text, spec),
                                      .group_index = group_of_length.at(bucket.length),
                                      .kind = SampleKind::letters,
                                      .echo_ok = true});
      corpus.texts.push_back(std::move(text));
      ++n;
    }
  }
  return corpus;
}

std::vector<PromptRecord> make_letters_prompts(const LettersCorpus& corpus, int c,
                                               std::uint64_t seed) {
  if (c < 0) throw RangeError("context count must be >= 0");
  std::vector<PromptRecord> prompts;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto& s = corpus.samples[i];
    std::vector<std::string> candidates;
    for (std::size_t j = 0; j < corpus.samples.size(); ++j) {
      if (j != i && corpus.samples[j].group_index == s.group_index) {
        candidates.push_back(corpus.texts[j]);
      }
    }
    if (candidates.size() < static_cast<std::size_t>(c)) {
      throw RangeError(fmt::format("length group {} offers {} context strings, need {}",
                                   s.group_index, candidates.size(), c));
    }
    Rng rng(mix_seed(seed, s.sample_id));
    rng.partial_shuffle(std::span(candidates), static_cast<std::size_t>(c));
    candidates.resize(static_cast<std::size_t>(c));
    prompts.push_back(PromptRecord{s, render_prompt(candidates, corpus.texts[i]), c});
  }
  return prompts;
}

std::vector<LengthBucket> parse_length_profile(std::string_view text) {
  std::vector<LengthBucket> profile;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto colon = item.find(':');
    LengthBucket bucket;
    const auto parse = [&](std::string_view part, int& out) {
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
      if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
        throw ParseError(fmt::format("bad length profile entry '{}'", item));
      }
    };
    if (colon == std::string_view::npos) {
      throw ParseError(fmt::format("bad length profile entry '{}'", item));
    }
    parse(item.substr(0, colon), bucket.length);
    parse(item.substr(colon + 1), bucket.count);
    profile.push_back(bucket);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  return profile;
}

namespace {

// RFC 4180 fields: commas separate, double quotes may wrap a field and ""
// escapes a quote inside one.
std::vector<std::string> split_csv_row(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"' && fields.back().empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw ParseError(fmt::format("line {}: unterminated quoted field", line_no));
  return fields;
}

}  // namespace

std::vector<PromptRecord> load_realworld(const std::filesystem::path& csv_path,
                                         std::string_view prompt_template) {
  std::ifstream in(csv_path);
  if (!in) throw IoError(fmt::format("cannot open {}", csv_path.string()));

  std::vector<PromptRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line != "entity,value") {
        throw ParseError(fmt::format("{}: header must be 'entity,value'", csv_path.string()));
      }
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv_row(line, line_no);
    if (fields.size() != 2) {
      throw ParseError(
          fmt::format("line {}: expected 2 fields, got {}", line_no, fields.size()));
    }
    std::int64_t value = 0;
    const auto& raw = fields[1];
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size() || raw.empty()) {
      throw ParseError(fmt::format("line {}: value '{}' is not an integer", line_no, raw));
    }

    std::string prompt(prompt_template);
    constexpr std::string_view placeholder = "[entity]";
    for (auto pos = prompt.find(placeholder); pos != std::string::npos;
         pos = prompt.find(placeholder, pos + fields[0].size())) {
      prompt.replace(pos, placeholder.size(), fields[0]);
    }
    Sample s{.sample_id = records.size(),
             .value = value,
             .group_index = 0,
             .kind = SampleKind::realworld,
             .echo_ok = true};
    records.push_back(PromptRecord{s, std::move(prompt), 0});
  }
  return records;
}

std::vector<Sample> quantize_groups(std::span<const Sample> samples, int bins) {
  if (bins < 2) throw RangeError("bins must be >= 2");
  if (bins > kMaxGroup) throw RangeError(fmt::format("bins must be <= {}", kMaxGroup));
  if (samples.empty()) throw DegenerateError("no samples to quantize");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                            [](const Sample& a, const Sample& b) {
                                              return a.value < b.value;
                                            });
  const std::int64_t min = lo->value;
  const std::int64_t max = hi->value;
  if (min == max) throw DegenerateError("all values are equal; cannot form groups");

  // 128-bit arithmetic keeps bins * (v - min) exact for any int64 range.
  __extension__ typedef unsigned __int128 u128;
  const u128 width = static_cast<u128>(static_cast<std::uint64_t>(max) -
                                       static_cast<std::uint64_t>(min)) + 1;
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out) {
    const u128 offset =
        static_cast<u128>(static_cast<std::uint64_t>(s.value) - static_cast<std::uint64_t>(min));
    const auto bin = static_cast<int>(static_cast<u128>(bins) * offset / width);
    s.group_index = std::clamp(1 + bin, 1, bins);
  }
  return out;
}

void write_prompts_ndjson(std::span<const PromptRecord> prompts, std::ostream& out) {
  for (const auto& p : prompts) {
    const nlohmann::json row{{"sample_id", p.sample.sample_id},
                             {"value", p.sample.value},
                             {"group_index", p.sample.group_index},
                             {"kind", to_string(p.sample.kind)},
                             {"prompt_text", p.prompt_text},
                             {"context_count", p.context_count}};
    out << row.dump() << '\n';
  }
  if (!out) throw IoError("failed to write prompt stream");
}

void write_prompts_ndjson(std::span<const PromptRecord> prompts,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot create {}", path.string()));
  write_prompts_ndjson(prompts, out);
}

std::vector<PromptRecord> read_prompts_ndjson(std::istream& in) {
  std::vector<PromptRecord> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      PromptRecord p;
      p.sample.sample_id = row.at("sample_id").get<std::size_t>();
      p.sample.value = row.at("value").get<std::int64_t>();
      p.sample.group_index = row.at("group_index").get<int>();
      p.sample.kind = parse_sample_kind(row.at("kind").get<std::string>());
      p.prompt_text = row.at("prompt_text").get<std::string>();
      p.context_count = row.at("context_count").get<int>();
      prompts.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("prompt line {}: {}", line_no, e.what()));
    }
  }
  return prompts;
}

}  // namespace numberline
