#include "ladder/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ladder/error.hpp"
#include "ladder/jsonl.hpp"
#include "ladder/sampling.hpp"
#include "ladder/text.hpp"

namespace ladder {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 32> kLanguageNames{{
    {"ar", "Arabic"},    {"cs", "Czech"},      {"de", "German"},   {"en", "English"},
    {"es", "Spanish"},   {"et", "Estonian"},   {"fi", "Finnish"},  {"fr", "French"},
    {"gu", "Gujarati"},  {"he", "Hebrew"},     {"hi", "Hindi"},    {"hr", "Croatian"},
    {"is", "Icelandic"}, {"it", "Italian"},    {"ja", "Japanese"}, {"kk", "Kazakh"},
    {"km", "Khmer"},     {"ko", "Korean"},     {"lt", "Lithuanian"}, {"lv", "Latvian"},
    {"nl", "Dutch"},     {"pl", "Polish"},     {"ps", "Pashto"},   {"pt", "Portuguese"},
    {"ro", "Romanian"},  {"ru", "Russian"},    {"sah", "Yakut"},   {"ta", "Tamil"},
    {"tr", "Turkish"},   {"uk", "Ukrainian"},  {"vi", "Vietnamese"}, {"zh", "Chinese"},
}};

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found or unreadable: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void check_text(const fs::path& path, std::size_t line, std::string_view field, std::string_view value) {
  if (text::is_blank(value)) {
    throw FormatError(path.string(), line, std::string(field) + " is empty or whitespace-only");
  }
}

std::string synth_id(const std::string& dataset, std::size_t line) {
  return dataset + ":" + std::to_string(line);
}

}  // namespace

Direction Direction::make(std::string src_lang, std::string tgt_lang, std::string src_name,
                          std::string tgt_name) {
  if (src_lang.empty() || tgt_lang.empty()) throw InvariantError("direction: language codes must be nonempty");
  if (src_lang == tgt_lang) throw InvariantError("direction: source and target language are both '" + src_lang + "'");
  if (text::is_blank(src_name) || text::is_blank(tgt_name)) {
    throw InvariantError("direction: full language names must be nonempty");
  }
  return Direction{std::move(src_lang), std::move(tgt_lang), std::move(src_name), std::move(tgt_name)};
}

Direction Direction::from_codes(std::string_view src_lang, std::string_view tgt_lang) {
  auto src_name = language_name(src_lang);
  auto tgt_name = language_name(tgt_lang);
  if (!src_name) throw InvariantError("unknown language code '" + std::string(src_lang) + "'; give its full name");
  if (!tgt_name) throw InvariantError("unknown language code '" + std::string(tgt_lang) + "'; give its full name");
  return make(std::string(src_lang), std::string(tgt_lang), *src_name, *tgt_name);
}

std::optional<std::string> language_name(std::string_view code) {
  for (const auto& [c, name] : kLanguageNames) {
    if (c == code) return std::string(name);
  }
  return std::nullopt;
}

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::Train: return "train";
    case SplitName::Dev: return "dev";
    case SplitName::Test: return "test";
  }
  return "train";
}

SplitName parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::Train;
  if (name == "dev") return SplitName::Dev;
  if (name == "test") return SplitName::Test;
  throw InvariantError("unknown split name '" + std::string(name) + "'");
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::Tsv;
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "paired-text" || name == "paired_text" || name == "text") return CorpusFormat::PairedText;
  throw InvariantError("unknown corpus format '" + std::string(name) + "' (expected tsv, jsonl or paired-text)");
}

void check_disjoint_splits(std::span<const DatasetSplit> splits) {
  std::unordered_map<std::string, std::size_t> owner;
  std::vector<std::string> dupes;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (const auto& p : splits[s].pairs) {
      auto [it, inserted] = owner.emplace(p.id, s);
      if (!inserted && it->second != s) dupes.push_back(p.id);
    }
  }
  if (!dupes.empty()) throw ItemsError("ids shared between splits", std::move(dupes));
}

DatasetSplit load_parallel_corpus(const fs::path& path, CorpusFormat format, const Direction& direction,
                                  const LoadOptions& options) {
  const std::string dataset = options.dataset.empty() ? path.stem().string() : options.dataset;
  DatasetSplit split;
  split.name = options.split;
  std::unordered_set<std::string> seen;

  auto add = [&](std::size_t line, std::string id, std::string source, std::string reference,
                 const fs::path& where) {
    check_text(where, line, "source", source);
    check_text(where, line, "reference", reference);
    if (!seen.insert(id).second) throw FormatError(where.string(), line, "duplicate id '" + id + "'");
    split.pairs.push_back(ParallelPair{std::move(id), std::move(source), std::move(reference), direction});
  };

  switch (format) {
    case CorpusFormat::Tsv: {
      const auto lines = read_lines(path);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError(path.string(), i + 1, "expected two tab-separated columns");
        if (line.find('\t', tab + 1) != std::string::npos) {
          throw FormatError(path.string(), i + 1, "more than two tab-separated columns");
        }
        add(i + 1, synth_id(dataset, i + 1), line.substr(0, tab), line.substr(tab + 1), path);
      }
      break;
    }
    case CorpusFormat::Jsonl: {
      const auto lines = read_lines(path);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        json obj;
        try {
          obj = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
          throw FormatError(path.string(), i + 1, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw FormatError(path.string(), i + 1, "expected a JSON object");
        for (const char* key : {"source", "reference"}) {
          if (!obj.contains(key) || !obj[key].is_string()) {
            throw FormatError(path.string(), i + 1, std::string("missing string field \"") + key + "\"");
          }
        }
        std::string id = synth_id(dataset, i + 1);
        if (obj.contains("id")) {
          if (!obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
            throw FormatError(path.string(), i + 1, "\"id\" must be a nonempty string");
          }
          id = obj["id"].get<std::string>();
        }
        add(i + 1, std::move(id), obj["source"].get<std::string>(), obj["reference"].get<std::string>(), path);
      }
      break;
    }
    case CorpusFormat::PairedText: {
      const fs::path src_path = path.string() + "." + direction.src_lang;
      const fs::path ref_path = path.string() + "." + direction.tgt_lang;
      const auto src = read_lines(src_path);
      const auto ref = read_lines(ref_path);
      if (src.size() != ref.size()) {
        throw FormatError(ref_path.string(), std::min(src.size(), ref.size()) + 1,
                          "line count mismatch: " + std::to_string(src.size()) + " source vs " +
                              std::to_string(ref.size()) + " reference lines");
      }
      for (std::size_t i = 0; i < src.size(); ++i) {
        check_text(src_path, i + 1, "source", src[i]);
        add(i + 1, synth_id(dataset, i + 1), src[i], ref[i], ref_path);
      }
      break;
    }
  }

  if (split.pairs.empty()) throw EmptyCorpusError("empty corpus: " + path.string());
  return split;
}

DatasetSplit sample_dev_split(const DatasetSplit& split, std::size_t n, std::uint64_t seed) {
  if (n > split.size()) {
    throw InvariantError("cannot sample " + std::to_string(n) + " pairs from a split of " +
                         std::to_string(split.size()));
  }
  auto order = seeded_permutation(split.size(), seed);
  order.resize(n);
  std::sort(order.begin(), order.end());
  DatasetSplit out;
  out.name = SplitName::Dev;
  out.pairs.reserve(n);
  for (auto idx : order) out.pairs.push_back(split.pairs[idx]);
  return out;
}

std::vector<RefinementTriplet> attach_intermediates(const DatasetSplit& split,
                                                    const std::map<std::string, std::string>& intermediates,
                                                    std::string_view sampler_tag) {
  std::vector<std::string> missing;
  for (const auto& p : split.pairs) {
    auto it = intermediates.find(p.id);
    if (it == intermediates.end() || text::is_blank(it->second)) missing.push_back(p.id);
  }
  if (!missing.empty()) throw ItemsError("missing intermediate translation", std::move(missing));

  std::vector<RefinementTriplet> out;
  out.reserve(split.size());
  for (const auto& p : split.pairs) {
    RefinementTriplet t;
    t.id = p.id;
    t.source = p.source;
    t.intermediate = intermediates.at(p.id);
    t.reference = p.reference;
    t.direction = p.direction;
    t.sampler_tag = std::string(sampler_tag);
    out.push_back(std::move(t));
  }
  return out;
}

void write_triplets(std::span<const RefinementTriplet> triplets, const fs::path& path) {
  if (path.has_parent_path() && !fs::is_directory(path.parent_path())) {
    throw IoError("destination directory does not exist: " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : triplets) {
    json obj{
        {"id", t.id},
        {"src_lang", t.direction.src_lang},
        {"tgt_lang", t.direction.tgt_lang},
        {"source", t.source},
        {"intermediate", t.intermediate},
        {"reference", t.reference},
        {"score", t.score ? json(*t.score) : json(nullptr)},
        {"sampler_tag", t.sampler_tag},
        {"src_name", t.direction.src_name},
        {"tgt_name", t.direction.tgt_name},
    };
    if (!t.scorer.empty()) obj["scorer"] = t.scorer;
    out << dump_compact(obj) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<RefinementTriplet> read_triplets(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<RefinementTriplet> out;
  std::unordered_set<std::string> seen;
  const auto where = path.string();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = i + 1;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw FormatError(where, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw FormatError(where, line_no, "expected a JSON object");
    auto str = [&](const char* key, bool required) -> std::string {
      if (!obj.contains(key)) {
        if (required) throw FormatError(where, line_no, std::string("missing field \"") + key + "\"");
        return {};
      }
      if (!obj[key].is_string()) throw FormatError(where, line_no, std::string("\"") + key + "\" must be a string");
      return obj[key].get<std::string>();
    };
    RefinementTriplet t;
    t.id = str("id", true);
    if (t.id.empty()) throw FormatError(where, line_no, "empty id");
    if (!seen.insert(t.id).second) throw FormatError(where, line_no, "duplicate id '" + t.id + "'");
    const auto src_lang = str("src_lang", true);
    const auto tgt_lang = str("tgt_lang", true);
    auto src_name = str("src_name", false);
    auto tgt_name = str("tgt_name", false);
    if (src_name.empty()) src_name = language_name(src_lang).value_or(src_lang);
    if (tgt_name.empty()) tgt_name = language_name(tgt_lang).value_or(tgt_lang);
    try {
      t.direction = Direction::make(src_lang, tgt_lang, src_name, tgt_name);
    } catch (const InvariantError& e) {
      throw FormatError(where, line_no, e.what());
    }
    t.source = str("source", true);
    t.intermediate = str("intermediate", true);
    t.reference = str("reference", true);
    check_text(path, line_no, "source", t.source);
    check_text(path, line_no, "intermediate", t.intermediate);
    check_text(path, line_no, "reference", t.reference);
    t.sampler_tag = str("sampler_tag", true);
    t.scorer = str("scorer", false);
    if (!obj.contains("score")) throw FormatError(where, line_no, "missing field \"score\"");
    const auto& score = obj["score"];
    if (!score.is_null()) {
      if (!score.is_number()) throw FormatError(where, line_no, "\"score\" must be a number or null");
      const double v = score.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError(where, line_no, "\"score\" outside [0, 1]");
      t.score = v;
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ladder
