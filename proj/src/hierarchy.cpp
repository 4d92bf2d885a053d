#include "ladder/hierarchy.hpp"

#include <cmath>
#include <fstream>

#include "ladder/error.hpp"
#include "ladder/jsonl.hpp"
#include "ladder/sampling.hpp"

namespace ladder {

using nlohmann::json;
namespace fs = std::filesystem;

ThresholdConfig ThresholdConfig::make(double mu, double nu) {
  if (!(mu > 0.0 && mu < 1.0) || !(nu > 0.0 && nu < 1.0)) {
    throw InvariantError("thresholds must lie in (0, 1)");
  }
  if (!(mu < nu)) throw InvariantError("thresholds need mu < nu");
  return ThresholdConfig{mu, nu};
}

ThresholdConfig ThresholdConfig::preset(std::string_view name) {
  if (name == "HFT1" || name == "hft1") return make(0.70, 0.80);
  if (name == "HFT2" || name == "hft2") return make(0.75, 0.85);
  if (name == "HFT3" || name == "hft3") return make(0.80, 0.90);
  throw InvariantError("unknown threshold preset '" + std::string(name) + "' (expected HFT1, HFT2 or HFT3)");
}

std::string_view to_string(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::Easy: return "easy";
    case HierarchyLevel::Medium: return "medium";
    case HierarchyLevel::Hard: return "hard";
  }
  return "easy";
}

HierarchyLevel classify(double score, const ThresholdConfig& cfg) noexcept {
  if (score < cfg.mu) return HierarchyLevel::Easy;
  if (score < cfg.nu) return HierarchyLevel::Medium;
  return HierarchyLevel::Hard;
}

const std::vector<RefinementTriplet>& Partition::bucket(HierarchyLevel level) const {
  switch (level) {
    case HierarchyLevel::Easy: return easy;
    case HierarchyLevel::Medium: return medium;
    case HierarchyLevel::Hard: return hard;
  }
  return easy;
}

Partition partition(std::span<const RefinementTriplet> triplets, const ThresholdConfig& cfg) {
  std::vector<std::string> bad;
  for (const auto& t : triplets) {
    if (!t.score || std::isnan(*t.score) || *t.score < 0.0 || *t.score > 1.0) bad.push_back(t.id);
  }
  if (!bad.empty()) throw ItemsError("triplets without a score in [0, 1]", std::move(bad));

  Partition p;
  p.thresholds = cfg;
  for (const auto& t : triplets) {
    switch (classify(*t.score, cfg)) {
      case HierarchyLevel::Easy: p.easy.push_back(t); break;
      case HierarchyLevel::Medium: p.medium.push_back(t); break;
      case HierarchyLevel::Hard: p.hard.push_back(t); break;
    }
  }
  return p;
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Hft: return "hft";
    case Strategy::AntiHft: return "anti_hft";
    case Strategy::Mixed: return "mixed";
  }
  return "hft";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "hft") return Strategy::Hft;
  if (name == "anti_hft" || name == "anti-hft") return Strategy::AntiHft;
  if (name == "mixed") return Strategy::Mixed;
  throw InvariantError("unknown strategy '" + std::string(name) + "' (expected hft, anti_hft or mixed)");
}

std::size_t StagePlan::triplet_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.items.size();
  return n;
}

StagePlan plan_schedule(const Partition& p, Strategy strategy, std::optional<std::uint64_t> seed) {
  if (p.size() == 0) throw InvariantError("plan_schedule: all buckets are empty");
  StagePlan plan;
  plan.strategy = strategy;
  plan.thresholds = p.thresholds;

  auto level_stage = [&](HierarchyLevel level) {
    Stage stage{std::string(to_string(level)), {}};
    for (const auto& t : p.bucket(level)) stage.items.push_back(StagedTriplet{level, t});
    return stage;
  };

  switch (strategy) {
    case Strategy::Hft:
      for (auto level : {HierarchyLevel::Easy, HierarchyLevel::Medium, HierarchyLevel::Hard}) {
        plan.stages.push_back(level_stage(level));
      }
      break;
    case Strategy::AntiHft:
      for (auto level : {HierarchyLevel::Hard, HierarchyLevel::Medium, HierarchyLevel::Easy}) {
        plan.stages.push_back(level_stage(level));
      }
      break;
    case Strategy::Mixed: {
      if (!seed) throw InvariantError("plan_schedule: the mixed strategy needs a seed");
      plan.seed = seed;
      std::vector<StagedTriplet> all;
      all.reserve(p.size());
      for (auto level : {HierarchyLevel::Easy, HierarchyLevel::Medium, HierarchyLevel::Hard}) {
        for (const auto& t : p.bucket(level)) all.push_back(StagedTriplet{level, t});
      }
      Stage stage{"mixed", {}};
      stage.items.reserve(all.size());
      for (auto idx : seeded_permutation(all.size(), *seed)) stage.items.push_back(all[idx]);
      plan.stages.push_back(std::move(stage));
      break;
    }
  }
  return plan;
}

std::vector<fs::path> emit_shards(const StagePlan& plan, const PromptTemplate& refine_template,
                                  const fs::path& out_dir) {
  if (plan.stages.empty()) throw InvariantError("emit_shards: plan has no stages");
  if (refine_template.kind() != PromptKind::Refine) throw InvariantError("emit_shards: needs a refine template");
  fs::create_directories(out_dir);
  std::vector<fs::path> paths;
  for (std::size_t k = 0; k < plan.stages.size(); ++k) {
    const auto& stage = plan.stages[k];
    const auto stage_no = k + 1;
    const auto path = out_dir / ("stage" + std::to_string(stage_no) + "_" + stage.name + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write shard " + path.string());
    for (const auto& item : stage.items) {
      const auto& t = item.triplet;
      const auto prompt = render_refine(refine_template, t.source, t.intermediate, t.direction);
      out << dump_compact(json{{"id", t.id},
                               {"stage", stage_no},
                               {"level", std::string(to_string(item.level))},
                               {"prompt", prompt.text},
                               {"completion", t.reference}})
          << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
    paths.push_back(path);
  }
  return paths;
}

json plan_manifest(const StagePlan& plan, const Partition& p, std::span<const fs::path> shard_paths,
                   bool cumulative) {
  json stages = json::array();
  for (std::size_t k = 0; k < plan.stages.size(); ++k) {
    json entry{{"stage", k + 1}, {"name", plan.stages[k].name}, {"count", plan.stages[k].items.size()}};
    if (k < shard_paths.size()) entry["shard"] = shard_paths[k].filename().string();
    stages.push_back(std::move(entry));
  }
  return json{
      {"strategy", std::string(to_string(plan.strategy))},
      {"seed", plan.seed ? json(*plan.seed) : json(nullptr)},
      {"thresholds", json{{"mu", plan.thresholds.mu}, {"nu", plan.thresholds.nu}}},
      {"buckets", json{{"easy", p.easy.size()}, {"medium", p.medium.size()}, {"hard", p.hard.size()}}},
      {"cumulative", cumulative},
      {"total", plan.triplet_count()},
      {"stages", std::move(stages)},
  };
}

}  // namespace ladder
