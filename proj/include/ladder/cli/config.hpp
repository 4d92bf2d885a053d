#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ladder/corpus.hpp"
#include "ladder/error.hpp"
#include "ladder/hierarchy.hpp"
#include "ladder/llm_client.hpp"
#include "ladder/prompting.hpp"
#include "ladder/scoring.hpp"

namespace ladder::cli {

/// Bad or inconsistent run configuration; maps to exit status 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CorpusEntry {
  Direction direction;
  CorpusFormat format = CorpusFormat::Tsv;
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> dev;
  std::optional<std::filesystem::path> test;
  /// Offline intermediates for the test split (skips the target model).
  std::optional<std::filesystem::path> intermediates;
  CorpusFormat intermediates_format = CorpusFormat::Tsv;

  std::optional<std::filesystem::path> split_path(SplitName split) const;
};

struct ScorerSettings {
  std::string kind = "chrf";  // chrf | bleu | neural
  std::optional<NeuralScorerConfig> neural;
  std::optional<std::filesystem::path> cache;
};

struct TrainSettings {
  std::vector<std::string> adapter;  // command prefix; "train --config <file>" is appended
  std::string base_model_id;
  int lora_rank = 16;
  double learning_rate = 1e-4;
  int epochs_per_stage = 1;
  int batch_size = 16;
  int max_seq_len = 512;
};

/// Everything a run needs, resolved and validated. Relative paths are
/// resolved against the config file's directory.
struct RunConfig {
  std::filesystem::path source_path;
  std::filesystem::path base_dir;
  nlohmann::json raw;  // the config as loaded, for run.json

  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;

  std::map<std::string, EndpointConfig> endpoints;
  std::map<std::string, ExtractionPolicy> policies;  // per endpoint
  ExtractionPolicy default_policy;

  std::optional<std::filesystem::path> direct_template;
  std::optional<std::filesystem::path> refine_template;

  std::vector<CorpusEntry> corpora;

  ThresholdConfig thresholds = ThresholdConfig::preset("HFT2");
  std::string thresholds_name = "HFT2";
  Strategy strategy = Strategy::Hft;
  bool cumulative = false;

  ScorerSettings scorer;
  int self_refine_iterations = 2;
  double tie_epsilon = 0.0;
  TrainSettings train;

  const EndpointConfig& endpoint(const std::string& role) const;
  const ExtractionPolicy& policy(const std::string& role) const;
  PromptPair prompts() const;
};

/// Loads a TOML run config, or the "config" block of a previous run.json
/// so that runs can be replayed.
RunConfig load_run_config(const std::filesystem::path& path);

/// Same, from an already-parsed document (TOML converted to JSON).
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           const std::filesystem::path& source_path);

/// TOML document as JSON (tables become objects, arrays stay arrays).
nlohmann::json toml_file_to_json(const std::filesystem::path& path);

}  // namespace ladder::cli
