#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ladder/corpus.hpp"
#include "ladder/prompting.hpp"

namespace ladder {

/// Quality thresholds splitting scored triplets: Easy below `mu`, Medium in
/// [mu, nu), Hard at or above `nu`.
struct ThresholdConfig {
  double mu = 0.75;
  double nu = 0.85;

  static ThresholdConfig make(double mu, double nu);
  /// "HFT1" (0.70, 0.80), "HFT2" (0.75, 0.85), "HFT3" (0.80, 0.90).
  static ThresholdConfig preset(std::string_view name);

  bool operator==(const ThresholdConfig&) const = default;
};

enum class HierarchyLevel { Easy, Medium, Hard };

std::string_view to_string(HierarchyLevel level);

/// The three-way rule on one score.
HierarchyLevel classify(double score, const ThresholdConfig& cfg) noexcept;

struct Partition {
  std::vector<RefinementTriplet> easy;
  std::vector<RefinementTriplet> medium;
  std::vector<RefinementTriplet> hard;
  ThresholdConfig thresholds;

  const std::vector<RefinementTriplet>& bucket(HierarchyLevel level) const;
  std::size_t size() const { return easy.size() + medium.size() + hard.size(); }
};

/// Buckets keep input order. Throws ItemsError naming unscored triplets.
Partition partition(std::span<const RefinementTriplet> triplets, const ThresholdConfig& cfg);

enum class Strategy { Hft, AntiHft, Mixed };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct StagedTriplet {
  HierarchyLevel level;
  RefinementTriplet triplet;
};

struct Stage {
  std::string name;  // "easy", "medium", "hard" or "mixed"
  std::vector<StagedTriplet> items;
};

struct StagePlan {
  Strategy strategy = Strategy::Hft;
  std::vector<Stage> stages;
  std::optional<std::uint64_t> seed;  // mixed only
  ThresholdConfig thresholds;

  std::size_t triplet_count() const;
};

/// hft: [easy, medium, hard]; anti_hft: [hard, medium, easy]; mixed: one
/// stage holding a seeded permutation of everything. Empty buckets stay in
/// the plan as empty stages. Mixed requires a seed.
StagePlan plan_schedule(const Partition& p, Strategy strategy, std::optional<std::uint64_t> seed = std::nullopt);

/// Writes `stage{k}_{name}.jsonl` (k from 1) per stage; each record is the
/// rendered refine prompt paired with the reference as completion.
std::vector<std::filesystem::path> emit_shards(const StagePlan& plan, const PromptTemplate& refine_template,
                                               const std::filesystem::path& out_dir);

/// The plan.json manifest: strategy, seed, thresholds, bucket sizes, and
/// per-stage shard file and count.
nlohmann::json plan_manifest(const StagePlan& plan, const Partition& p,
                             std::span<const std::filesystem::path> shard_paths, bool cumulative);

}  // namespace ladder
