#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ladder/corpus.hpp"
#include "ladder/llm_client.hpp"
#include "ladder/metrics.hpp"
#include "ladder/prompting.hpp"
#include "ladder/scoring.hpp"

namespace ladder {

/// One test source through the refinement loop: the target model's
/// intermediate translation and the ladder model's refinement of it.
struct RefinementRecord {
  std::string id;
  Direction direction;
  std::string source;
  std::optional<std::string> intermediate;
  std::optional<std::string> refined;  // present iff the refinement call succeeded
  std::optional<std::string> reference;
  std::vector<QualityScore> intermediate_scores;
  std::vector<QualityScore> refined_scores;
  std::string target_tag;
  std::string ladder_tag;
  std::optional<std::string> error;

  bool ok() const noexcept { return refined.has_value(); }
};

std::optional<QualityScore> find_score(std::span<const QualityScore> scores, Metric metric);

struct RefineOptions {
  ExtractionPolicy target_policy;
  ExtractionPolicy ladder_policy;
};

/// i = target(P_D(s)), y = ladder(P_R(s, i)) for every pair. The reference
/// is copied into the record for later scoring but never enters a prompt.
std::vector<RefinementRecord> refine_corpus(const DatasetSplit& split, Generator& target, Generator& ladder,
                                            const PromptPair& prompts, const RefineOptions& options = {});

/// A source whose intermediate translation was produced offline.
struct PrecomputedItem {
  std::string id;
  Direction direction;
  std::string source;
  std::optional<std::string> intermediate;
  std::optional<std::string> reference;
};

/// Reads `source<TAB>intermediate[<TAB>reference]` TSV or triplet-style
/// JSONL where "reference" may be absent. A blank intermediate is kept as
/// missing so it surfaces as a per-item error.
std::vector<PrecomputedItem> read_precomputed(const std::filesystem::path& path, CorpusFormat format,
                                              const Direction& direction, std::string_view dataset = {});

/// Like refine_corpus but without target-model calls.
std::vector<RefinementRecord> precomputed_refine(std::span<const PrecomputedItem> items, Generator& ladder,
                                                 const PromptPair& prompts, const RefineOptions& options = {},
                                                 std::string_view target_tag = "precomputed");

/// Fills intermediate/refined scores for records that have a reference.
void score_records(std::vector<RefinementRecord>& records, std::span<SegmentScorer* const> scorers);

/// texts[0] is the model's own direct translation, texts[k] its refinement
/// of texts[k-1]. A failed step truncates the trace and sets `error`.
struct IterationTrace {
  std::string id;
  Direction direction;
  std::string source;
  std::optional<std::string> reference;
  std::vector<std::string> texts;
  std::vector<std::vector<QualityScore>> scores;  // per text, when a reference exists
  std::optional<std::string> error;

  bool complete(int iterations) const { return !error && texts.size() == static_cast<std::size_t>(iterations) + 1; }
};

std::vector<IterationTrace> self_refine(const DatasetSplit& split, Generator& model, int iterations,
                                        const PromptPair& prompts, std::span<SegmentScorer* const> scorers = {},
                                        const ExtractionPolicy& policy = {});

struct ItemFailure {
  std::size_t index;
  std::string id;
  std::string error;
};

struct WeakTripletResult {
  std::vector<RefinementTriplet> triplets;
  /// Gold references by id, kept for evaluation only.
  std::map<std::string, std::string> gold;
  std::vector<ItemFailure> failures;
};

/// Triplets (s, i, w) where i comes from `intermediate` and the reference w
/// from the weaker `weak_reference` model. Items failing either call yield
/// no triplet.
WeakTripletResult build_weak_triplets(const DatasetSplit& split, Generator& weak_reference, Generator& intermediate,
                                      const PromptPair& prompts, const ExtractionPolicy& weak_policy = {},
                                      const ExtractionPolicy& intermediate_policy = {});

/// Sampling step of triplet construction: P_D through `sampler`, then
/// attach. Failed items are returned instead of thrown.
struct SampledTriplets {
  std::vector<RefinementTriplet> triplets;
  std::vector<ItemFailure> failures;
};

SampledTriplets sample_triplets(const DatasetSplit& split, Generator& sampler, const PromptPair& prompts,
                                const ExtractionPolicy& policy = {});

void write_records(std::span<const RefinementRecord> records, const std::filesystem::path& path);
std::vector<RefinementRecord> read_records(const std::filesystem::path& path);

void write_traces(std::span<const IterationTrace> traces, const std::filesystem::path& path);
std::vector<IterationTrace> read_traces(const std::filesystem::path& path);

}  // namespace ladder
