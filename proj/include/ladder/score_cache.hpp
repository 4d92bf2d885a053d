#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace ladder {

/// Append-only JSONL cache of scores keyed by a content hash over
/// (metric, source, hypothesis, reference). Values are stored in shortest
/// round-trip form so a hit is bit-identical to the original computation.
/// All members are thread-safe.
class ScoreCache {
 public:
  /// In-memory only.
  ScoreCache() = default;
  /// Loads existing entries from `path` and appends new ones to it.
  explicit ScoreCache(std::filesystem::path path);

  static std::string key(std::string_view metric, std::string_view source, std::string_view hypothesis,
                         const std::optional<std::string>& reference);

  std::optional<double> lookup(const std::string& key) const;
  void insert(const std::string& key, std::string_view metric, double value);

  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> entries_;
  std::ofstream out_;
};

}  // namespace ladder
