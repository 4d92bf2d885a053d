#include "ladder/score_cache.hpp"

#include <json.hpp>

#include "ladder/error.hpp"
#include "ladder/hashing.hpp"
#include "ladder/jsonl.hpp"

namespace ladder {

using nlohmann::json;

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    std::ifstream in(*path_, std::ios::binary);
    if (!in) throw IoError("cannot read score cache " + path_->string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto obj = json::parse(line);
        entries_[obj.at("key").get<std::string>()] = obj.at("value").get<double>();
      } catch (const json::exception& e) {
        throw FormatError(path_->string(), line_no, std::string("bad cache entry: ") + e.what());
      }
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
  out_.open(*path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open score cache " + path_->string() + " for append");
}

std::string ScoreCache::key(std::string_view metric, std::string_view source, std::string_view hypothesis,
                            const std::optional<std::string>& reference) {
  // A JSON array is an unambiguous encoding of the tuple.
  const json tuple = json::array({std::string(metric), std::string(source), std::string(hypothesis),
                                  reference ? json(*reference) : json(nullptr)});
  return sha256_hex(dump_compact(tuple));
}

std::optional<double> ScoreCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

void ScoreCache::insert(const std::string& key, std::string_view metric, double value) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.emplace(key, value);
  if (!inserted) return;
  if (out_.is_open()) {
    out_ << dump_compact(json{{"key", key}, {"metric", std::string(metric)}, {"value", value}}) << '\n';
    out_.flush();
  }
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace ladder
