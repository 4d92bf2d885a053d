#include "ladder/refine.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "ladder/error.hpp"
#include "ladder/jsonl.hpp"
#include "ladder/text.hpp"

namespace ladder {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct StepOutcome {
  std::optional<std::string> text;
  std::string error;
};

// One batched generation over `prompts`, replies run through `policy`.
std::vector<StepOutcome> run_step(Generator& gen, const std::vector<std::string>& prompts,
                                  const ExtractionPolicy& policy, std::string_view who) {
  std::vector<StepOutcome> out(prompts.size());
  if (prompts.empty()) return out;
  const auto results = gen.generate_batch(prompts);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& r = results[i];
    if (!r.ok()) {
      out[i].error = std::string(who) + ": " + (r.error ? r.error->describe() : std::string("no reply"));
      continue;
    }
    try {
      out[i].text = parse_completion(*r.text, policy);
    } catch (const InvariantError& e) {
      out[i].error = std::string(who) + ": " + e.what();
    }
  }
  return out;
}

json scores_json(std::span<const QualityScore> scores) {
  json obj = json::object();
  for (const auto& s : scores) obj[std::string(to_string(s.metric))] = s.value;
  return obj;
}

std::vector<QualityScore> scores_from_json(const json& obj, const std::string& where, std::size_t line) {
  std::vector<QualityScore> out;
  if (obj.is_null()) return out;
  if (!obj.is_object()) throw FormatError(where, line, "scores must be an object");
  for (const auto& [name, value] : obj.items()) {
    if (!value.is_number()) throw FormatError(where, line, "score '" + name + "' is not a number");
    try {
      out.push_back(QualityScore::make(parse_metric(name), value.get<double>()));
    } catch (const InvariantError& e) {
      throw FormatError(where, line, e.what());
    }
  }
  return out;
}

json opt_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> opt_string(const json& obj, const char* key, const std::string& where, std::size_t line) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_string()) throw FormatError(where, line, std::string("\"") + key + "\" must be a string or null");
  return obj[key].get<std::string>();
}

std::string req_string(const json& obj, const char* key, const std::string& where, std::size_t line) {
  auto v = opt_string(obj, key, where, line);
  if (!v) throw FormatError(where, line, std::string("missing field \"") + key + "\"");
  return *v;
}

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

json parse_object_line(const std::string& line, const std::string& where, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(where, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw FormatError(where, line_no, "expected a JSON object");
  return obj;
}

Direction direction_from_json(const json& obj, const std::string& where, std::size_t line) {
  const auto src = req_string(obj, "src_lang", where, line);
  const auto tgt = req_string(obj, "tgt_lang", where, line);
  auto src_name = opt_string(obj, "src_name", where, line).value_or(language_name(src).value_or(src));
  auto tgt_name = opt_string(obj, "tgt_name", where, line).value_or(language_name(tgt).value_or(tgt));
  try {
    return Direction::make(src, tgt, src_name, tgt_name);
  } catch (const InvariantError& e) {
    throw FormatError(where, line, e.what());
  }
}

json direction_json(const Direction& d) {
  return json{{"src_lang", d.src_lang}, {"tgt_lang", d.tgt_lang}, {"src_name", d.src_name}, {"tgt_name", d.tgt_name}};
}

std::vector<QualityScore> score_text(std::span<SegmentScorer* const> scorers, const std::string& source,
                                     const std::string& hypothesis, const std::string& reference,
                                     const Direction& d) {
  std::vector<QualityScore> out;
  const ScoreRequest request{source, hypothesis, reference, d.tgt_lang};
  for (auto* scorer : scorers) out.push_back(scorer->score(request));
  return out;
}

}  // namespace

std::optional<QualityScore> find_score(std::span<const QualityScore> scores, Metric metric) {
  for (const auto& s : scores) {
    if (s.metric == metric) return s;
  }
  return std::nullopt;
}

std::vector<RefinementRecord> refine_corpus(const DatasetSplit& split, Generator& target, Generator& ladder,
                                            const PromptPair& prompts, const RefineOptions& options) {
  std::vector<PrecomputedItem> items;
  items.reserve(split.size());
  std::vector<std::string> direct_prompts;
  direct_prompts.reserve(split.size());
  for (const auto& p : split.pairs) {
    direct_prompts.push_back(render_direct(prompts.direct, p.source, p.direction).text);
    items.push_back(PrecomputedItem{p.id, p.direction, p.source, std::nullopt, p.reference});
  }
  const auto sampled = run_step(target, direct_prompts, options.target_policy, "target");
  std::vector<std::string> target_errors(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].intermediate = sampled[i].text;
    target_errors[i] = sampled[i].error;
  }
  auto records = precomputed_refine(items, ladder, prompts, options, target.tag());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!target_errors[i].empty()) records[i].error = target_errors[i];
  }
  return records;
}

std::vector<RefinementRecord> precomputed_refine(std::span<const PrecomputedItem> items, Generator& ladder,
                                                 const PromptPair& prompts, const RefineOptions& options,
                                                 std::string_view target_tag) {
  std::vector<RefinementRecord> records(items.size());
  std::vector<std::size_t> pending;
  std::vector<std::string> refine_prompts;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    auto& rec = records[i];
    rec.id = item.id;
    rec.direction = item.direction;
    rec.source = item.source;
    rec.reference = item.reference;
    rec.target_tag = std::string(target_tag);
    rec.ladder_tag = ladder.tag();
    if (!item.intermediate || text::is_blank(*item.intermediate)) {
      rec.error = "missing intermediate translation";
      continue;
    }
    rec.intermediate = item.intermediate;
    refine_prompts.push_back(render_refine(prompts.refine, item.source, *item.intermediate, item.direction).text);
    pending.push_back(i);
  }
  const auto refined = run_step(ladder, refine_prompts, options.ladder_policy, "ladder");
  for (std::size_t k = 0; k < pending.size(); ++k) {
    auto& rec = records[pending[k]];
    if (refined[k].text) {
      rec.refined = refined[k].text;
    } else {
      rec.error = refined[k].error;
    }
  }
  return records;
}

std::vector<PrecomputedItem> read_precomputed(const fs::path& path, CorpusFormat format, const Direction& direction,
                                              std::string_view dataset) {
  const std::string name = dataset.empty() ? path.stem().string() : std::string(dataset);
  const std::string where = path.string();
  const auto lines = read_lines(path);
  std::vector<PrecomputedItem> items;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = i + 1;
    PrecomputedItem item;
    item.direction = direction;
    item.id = name + ":" + std::to_string(line_no);
    if (format == CorpusFormat::Tsv) {
      std::vector<std::string> cols;
      std::size_t start = 0;
      while (true) {
        const auto tab = lines[i].find('\t', start);
        cols.push_back(lines[i].substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (cols.size() < 1 || cols.size() > 3) throw FormatError(where, line_no, "expected 1 to 3 tab-separated columns");
      item.source = cols[0];
      if (cols.size() >= 2 && !text::is_blank(cols[1])) item.intermediate = cols[1];
      if (cols.size() == 3 && !text::is_blank(cols[2])) item.reference = cols[2];
    } else if (format == CorpusFormat::Jsonl) {
      const auto obj = parse_object_line(lines[i], where, line_no);
      item.source = req_string(obj, "source", where, line_no);
      if (auto id = opt_string(obj, "id", where, line_no); id && !id->empty()) item.id = *id;
      if (obj.contains("src_lang")) item.direction = direction_from_json(obj, where, line_no);
      if (auto v = opt_string(obj, "intermediate", where, line_no); v && !text::is_blank(*v)) item.intermediate = v;
      if (auto v = opt_string(obj, "reference", where, line_no); v && !text::is_blank(*v)) item.reference = v;
    } else {
      throw InvariantError("precomputed intermediates must be tsv or jsonl");
    }
    if (text::is_blank(item.source)) throw FormatError(where, line_no, "source is empty or whitespace-only");
    if (!seen.insert(item.id).second) throw FormatError(where, line_no, "duplicate id '" + item.id + "'");
    items.push_back(std::move(item));
  }
  if (items.empty()) throw EmptyCorpusError("empty input: " + where);
  return items;
}

void score_records(std::vector<RefinementRecord>& records, std::span<SegmentScorer* const> scorers) {
  for (auto& rec : records) {
    rec.intermediate_scores.clear();
    rec.refined_scores.clear();
    if (!rec.reference || scorers.empty()) continue;
    if (rec.intermediate) {
      rec.intermediate_scores = score_text(scorers, rec.source, *rec.intermediate, *rec.reference, rec.direction);
    }
    if (rec.refined) {
      rec.refined_scores = score_text(scorers, rec.source, *rec.refined, *rec.reference, rec.direction);
    }
  }
}

std::vector<IterationTrace> self_refine(const DatasetSplit& split, Generator& model, int iterations,
                                        const PromptPair& prompts, std::span<SegmentScorer* const> scorers,
                                        const ExtractionPolicy& policy) {
  if (iterations < 1) throw InvariantError("self_refine: iterations must be >= 1");
  std::vector<IterationTrace> traces(split.size());
  std::vector<std::string> batch;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& p = split.pairs[i];
    traces[i].id = p.id;
    traces[i].direction = p.direction;
    traces[i].source = p.source;
    traces[i].reference = p.reference;
    batch.push_back(render_direct(prompts.direct, p.source, p.direction).text);
  }
  std::vector<std::size_t> live(split.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;

  for (int step = 0; step <= iterations && !live.empty(); ++step) {
    if (step > 0) {
      batch.clear();
      for (auto idx : live) {
        const auto& t = traces[idx];
        batch.push_back(render_refine(prompts.refine, t.source, t.texts.back(), t.direction).text);
      }
    }
    const auto outcomes = run_step(model, batch, policy, step == 0 ? "iter0" : "iter" + std::to_string(step));
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < live.size(); ++k) {
      auto& t = traces[live[k]];
      if (!outcomes[k].text) {
        t.error = outcomes[k].error;
        continue;
      }
      t.texts.push_back(*outcomes[k].text);
      next.push_back(live[k]);
    }
    live = std::move(next);
  }

  for (auto& t : traces) {
    if (!t.reference || scorers.empty()) continue;
    for (const auto& text_k : t.texts) t.scores.push_back(score_text(scorers, t.source, text_k, *t.reference, t.direction));
  }
  return traces;
}

WeakTripletResult build_weak_triplets(const DatasetSplit& split, Generator& weak_reference, Generator& intermediate,
                                      const PromptPair& prompts, const ExtractionPolicy& weak_policy,
                                      const ExtractionPolicy& intermediate_policy) {
  std::vector<std::string> direct;
  direct.reserve(split.size());
  for (const auto& p : split.pairs) direct.push_back(render_direct(prompts.direct, p.source, p.direction).text);
  const auto weak = run_step(weak_reference, direct, weak_policy, "weak_reference");
  const auto inter = run_step(intermediate, direct, intermediate_policy, "intermediate");

  WeakTripletResult out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& p = split.pairs[i];
    out.gold.emplace(p.id, p.reference);
    if (!weak[i].text || !inter[i].text) {
      std::string why = weak[i].error;
      if (!inter[i].error.empty()) why += (why.empty() ? "" : "; ") + inter[i].error;
      out.failures.push_back(ItemFailure{i, p.id, why});
      continue;
    }
    RefinementTriplet t;
    t.id = p.id;
    t.source = p.source;
    t.intermediate = *inter[i].text;
    t.reference = *weak[i].text;
    t.direction = p.direction;
    t.sampler_tag = intermediate.tag();
    out.triplets.push_back(std::move(t));
  }
  return out;
}

SampledTriplets sample_triplets(const DatasetSplit& split, Generator& sampler, const PromptPair& prompts,
                                const ExtractionPolicy& policy) {
  std::vector<std::string> direct;
  direct.reserve(split.size());
  for (const auto& p : split.pairs) direct.push_back(render_direct(prompts.direct, p.source, p.direction).text);
  const auto outcomes = run_step(sampler, direct, policy, "sampler");

  SampledTriplets out;
  DatasetSplit ok;
  ok.name = split.name;
  std::map<std::string, std::string> intermediates;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (!outcomes[i].text) {
      out.failures.push_back(ItemFailure{i, split.pairs[i].id, outcomes[i].error});
      continue;
    }
    ok.pairs.push_back(split.pairs[i]);
    intermediates.emplace(split.pairs[i].id, *outcomes[i].text);
  }
  out.triplets = attach_intermediates(ok, intermediates, sampler.tag());
  return out;
}

void write_records(std::span<const RefinementRecord> records, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    json obj{{"id", r.id},
             {"source", r.source},
             {"intermediate", opt_json(r.intermediate)},
             {"refined", opt_json(r.refined)},
             {"reference", opt_json(r.reference)},
             {"scores", json{{"intermediate", scores_json(r.intermediate_scores)},
                             {"refined", scores_json(r.refined_scores)}}},
             {"target_tag", r.target_tag},
             {"ladder_tag", r.ladder_tag},
             {"error", opt_json(r.error)}};
    obj.update(direction_json(r.direction));
    out << dump_compact(obj) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<RefinementRecord> read_records(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  std::vector<RefinementRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = i + 1;
    const auto obj = parse_object_line(lines[i], where, line_no);
    RefinementRecord r;
    r.id = req_string(obj, "id", where, line_no);
    r.direction = direction_from_json(obj, where, line_no);
    r.source = req_string(obj, "source", where, line_no);
    r.intermediate = opt_string(obj, "intermediate", where, line_no);
    r.refined = opt_string(obj, "refined", where, line_no);
    r.reference = opt_string(obj, "reference", where, line_no);
    r.target_tag = opt_string(obj, "target_tag", where, line_no).value_or("");
    r.ladder_tag = opt_string(obj, "ladder_tag", where, line_no).value_or("");
    r.error = opt_string(obj, "error", where, line_no);
    if (obj.contains("scores") && obj["scores"].is_object()) {
      const auto& scores = obj["scores"];
      if (scores.contains("intermediate")) r.intermediate_scores = scores_from_json(scores["intermediate"], where, line_no);
      if (scores.contains("refined")) r.refined_scores = scores_from_json(scores["refined"], where, line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_traces(std::span<const IterationTrace> traces, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : traces) {
    json scores = json::array();
    for (const auto& s : t.scores) scores.push_back(scores_json(s));
    json obj{{"id", t.id},           {"source", t.source}, {"reference", opt_json(t.reference)},
             {"texts", t.texts},     {"scores", scores},   {"error", opt_json(t.error)}};
    obj.update(direction_json(t.direction));
    out << dump_compact(obj) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<IterationTrace> read_traces(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string where = path.string();
  std::vector<IterationTrace> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = i + 1;
    const auto obj = parse_object_line(lines[i], where, line_no);
    IterationTrace t;
    t.id = req_string(obj, "id", where, line_no);
    t.direction = direction_from_json(obj, where, line_no);
    t.source = req_string(obj, "source", where, line_no);
    t.reference = opt_string(obj, "reference", where, line_no);
    t.error = opt_string(obj, "error", where, line_no);
    if (!obj.contains("texts") || !obj["texts"].is_array()) throw FormatError(where, line_no, "missing \"texts\" array");
    for (const auto& v : obj["texts"]) {
      if (!v.is_string()) throw FormatError(where, line_no, "\"texts\" must hold strings");
      t.texts.push_back(v.get<std::string>());
    }
    if (obj.contains("scores") && obj["scores"].is_array()) {
      for (const auto& s : obj["scores"]) t.scores.push_back(scores_from_json(s, where, line_no));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ladder
