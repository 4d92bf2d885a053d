#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ladder {

/// A translation direction. Codes are ISO-639-1; the full names are what
/// the prompt templates print.
struct Direction {
  std::string src_lang;
  std::string tgt_lang;
  std::string src_name;
  std::string tgt_name;

  /// Validates and builds. Throws InvariantError on equal codes or empty names.
  static Direction make(std::string src_lang, std::string tgt_lang, std::string src_name,
                        std::string tgt_name);

  /// Builds from codes using the built-in language name table.
  static Direction from_codes(std::string_view src_lang, std::string_view tgt_lang);

  /// "zh-en"
  std::string label() const { return src_lang + "-" + tgt_lang; }

  bool operator==(const Direction&) const = default;
};

/// Full English name for an ISO-639-1 code, if known.
std::optional<std::string> language_name(std::string_view code);

struct ParallelPair {
  std::string id;
  std::string source;
  std::string reference;
  Direction direction;

  bool operator==(const ParallelPair&) const = default;
};

enum class SplitName { Train, Dev, Test };

std::string_view to_string(SplitName name);
SplitName parse_split_name(std::string_view name);

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<ParallelPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Throws InvariantError listing ids that appear in more than one split.
void check_disjoint_splits(std::span<const DatasetSplit> splits);

/// (s, i, r) plus bookkeeping. `score` is the quality of `intermediate`
/// against `reference`, normalized to [0, 1].
struct RefinementTriplet {
  std::string id;
  std::string source;
  std::string intermediate;
  std::string reference;
  Direction direction;
  std::optional<double> score;
  std::string scorer;  // label of the metric that produced `score`; empty when unscored
  std::string sampler_tag;

  bool operator==(const RefinementTriplet&) const = default;
};

enum class CorpusFormat { Tsv, Jsonl, PairedText };

CorpusFormat parse_corpus_format(std::string_view name);

struct LoadOptions {
  SplitName split = SplitName::Train;
  /// Prefix for synthesized ids; defaults to the file stem.
  std::string dataset;
};

/// Loads a parallel corpus.
///
/// tsv: `source<TAB>reference` per line, no header.
/// jsonl: objects with "source", "reference" and optional "id".
/// paired-text: `path` is a prefix; reads `{path}.{src_lang}` and
/// `{path}.{tgt_lang}` line by line.
///
/// Missing ids become `{dataset}:{line}`. Any malformed line throws
/// FormatError carrying that line; nothing is skipped.
DatasetSplit load_parallel_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const Direction& direction, const LoadOptions& options = {});

/// Deterministic subset of `n` pairs without replacement. Selected pairs keep
/// their relative order from `split`.
DatasetSplit sample_dev_split(const DatasetSplit& split, std::size_t n, std::uint64_t seed);

/// Pairs each ParallelPair with its sampled intermediate. Throws ItemsError
/// listing every id without a (nonblank) intermediate.
std::vector<RefinementTriplet> attach_intermediates(const DatasetSplit& split,
                                                    const std::map<std::string, std::string>& intermediates,
                                                    std::string_view sampler_tag);

void write_triplets(std::span<const RefinementTriplet> triplets, const std::filesystem::path& path);
std::vector<RefinementTriplet> read_triplets(const std::filesystem::path& path);

}  // namespace ladder
