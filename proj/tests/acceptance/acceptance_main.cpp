// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <sys/wait.h>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ladder/corpus.hpp"
#include "ladder/hierarchy.hpp"
#include "ladder/llm_client.hpp"
#include "ladder/metrics.hpp"
#include "ladder/refine.hpp"
#include "ladder/report.hpp"
#include "ladder/scoring.hpp"
#include "pipeline.hpp"

using namespace ladder;
using namespace ladder::testing;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Failed {
  std::string why;
};

void expect(bool cond, const std::string& why) {
  if (!cond) throw Failed{why};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failures = 0;

void criterion(const std::string& name, const std::function<std::string()>& body) {
  std::string detail;
  bool ok = false;
  try {
    detail = body();
    ok = true;
  } catch (const Failed& f) {
    detail = f.why;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  if (!ok) ++g_failures;
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")" << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::vector<RefinementTriplet> random_triplets(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto d = Direction::from_codes("de", "en");
  std::vector<RefinementTriplet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RefinementTriplet t;
    t.id = "t" + std::to_string(i);
    t.source = "Quelle " + std::to_string(i);
    t.intermediate = "intermediate " + std::to_string(i);
    t.reference = "reference " + std::to_string(i) + (i % 7 == 0 ? "  with \"quotes\"\tand tabs\n" : "");
    t.direction = d;
    t.score = u(rng);
    t.scorer = "chrf";
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> ids_of(const Stage& s) {
  std::vector<std::string> ids;
  for (const auto& it : s.items) ids.push_back(it.triplet.id);
  return ids;
}

std::string metric_fidelity() {
  const auto t0 = Clock::now();
  std::ifstream pairs_in(std::string(LADDER_FIXTURES) + "/metric_pairs.jsonl");
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_lang;
  for (std::string line; std::getline(pairs_in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    auto& [h, r] = by_lang[j["lang"].get<std::string>()];
    h.push_back(j["hyp"]);
    r.push_back(j["ref"]);
  }
  std::ifstream oracle_in(std::string(LADDER_FIXTURES) + "/metric_oracle.json");
  const auto oracle = json::parse(oracle_in);
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& [lang, expected] : oracle["corpora"].items()) {
    const auto& [h, r] = by_lang.at(lang);
    expect(h.size() == expected["n"].get<std::size_t>(), "fixture size mismatch for " + lang);
    const double bleu = bleu_corpus(h, r, tokenization_for_language(lang)).value;
    const double chrf = chrf_corpus(h, r).value;
    const double db = std::abs(bleu - expected["bleu"].get<double>());
    const double dc = std::abs(chrf - expected["chrf"].get<double>());
    expect(db <= 0.01, lang + " BLEU " + fmt(bleu) + " vs " + fmt(expected["bleu"].get<double>()));
    expect(dc <= 0.01, lang + " chrF " + fmt(chrf) + " vs " + fmt(expected["chrf"].get<double>()));
    worst = std::max({worst, db, dc});
    n += h.size();
  }
  expect(n == 50, "expected 50 fixture pairs, got " + std::to_string(n));
  const double secs = seconds_since(t0);
  expect(secs < 1.0, "took " + fmt(secs) + " s");
  return "50 pairs, max |diff| " + fmt(worst) + ", " + fmt(secs) + " s";
}

std::string partition_correctness() {
  const auto t0 = Clock::now();
  const auto triplets = random_triplets(10000, 2024);
  for (const char* name : {"HFT1", "HFT2", "HFT3"}) {
    const auto cfg = ThresholdConfig::preset(name);
    const auto p = partition(triplets, cfg);
    std::vector<int> naive(triplets.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const double s = *triplets[i].score;
      naive[i] = s < cfg.mu ? 0 : (s < cfg.nu ? 1 : 2);
      index[triplets[i].id] = i;
    }
    std::set<std::string> seen;
    int level = 0;
    for (const auto* bucket : {&p.easy, &p.medium, &p.hard}) {
      for (const auto& t : *bucket) {
        expect(seen.insert(t.id).second, std::string(name) + ": " + t.id + " in two buckets");
        expect(naive[index.at(t.id)] == level, std::string(name) + ": " + t.id + " misplaced");
      }
      ++level;
    }
    expect(seen.size() == triplets.size(), std::string(name) + ": buckets not exhaustive");
  }
  const double secs = seconds_since(t0);
  expect(secs < 1.0, "took " + fmt(secs) + " s");
  return "10^4 scores x 3 presets, " + fmt(secs) + " s";
}

std::string schedule_laws() {
  const auto triplets = random_triplets(3000, 99);
  const auto p = partition(triplets, ThresholdConfig::preset("HFT2"));
  const auto hft = plan_schedule(p, Strategy::Hft);
  const auto anti = plan_schedule(p, Strategy::AntiHft);
  expect(hft.stages.size() == 3 && anti.stages.size() == 3, "expected three stages");
  for (std::size_t k = 0; k < 3; ++k) {
    expect(ids_of(hft.stages[k]) == ids_of(anti.stages[2 - k]), "hft reversed differs from anti_hft at stage " +
                                                                    std::to_string(k + 1));
  }
  const auto m1 = plan_schedule(p, Strategy::Mixed, 11);
  const auto m2 = plan_schedule(p, Strategy::Mixed, 11);
  const auto m3 = plan_schedule(p, Strategy::Mixed, 12);
  expect(m1.stages.size() == 1, "mixed should be one stage");
  expect(ids_of(m1.stages[0]) == ids_of(m2.stages[0]), "mixed not deterministic for a fixed seed");
  expect(ids_of(m1.stages[0]) != ids_of(m3.stages[0]), "mixed ignores the seed");
  auto got = ids_of(m1.stages[0]);
  std::vector<std::string> want;
  for (const auto& t : triplets) want.push_back(t.id);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  expect(got == want, "mixed is not a permutation of the triplets");
  bool threw = false;
  try {
    plan_schedule(p, Strategy::Mixed);
  } catch (const std::exception&) {
    threw = true;
  }
  expect(threw, "mixed without a seed accepted");
  return "3000 triplets";
}

std::string shard_losslessness() {
  const auto triplets = random_triplets(1000, 5);
  const auto p = partition(triplets, ThresholdConfig::preset("HFT1"));
  const auto plan = plan_schedule(p, Strategy::Hft);
  TempDir dir;
  const auto paths = emit_shards(plan, PromptTemplate::default_refine(), dir.path());
  std::map<std::string, std::string> ref;
  for (const auto& t : triplets) ref[t.id] = t.reference;
  std::set<std::string> seen;
  for (const auto& path : paths) {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
      const auto j = json::parse(line);
      const std::string id = j["id"];
      expect(seen.insert(id).second, "duplicate id " + id);
      expect(ref.count(id), "unknown id " + id);
      expect(j["completion"].get<std::string>() == ref[id], "completion differs from reference for " + id);
    }
  }
  expect(seen.size() == triplets.size(), "ids lost: " + std::to_string(triplets.size() - seen.size()));
  return std::to_string(seen.size()) + " records over " + std::to_string(paths.size()) + " shards";
}

int run_ladder(const std::string& config, const std::string& command, const fs::path& log) {
  const std::string cmd = std::string("\"") + LADDER_CLI + "\" --config \"" + config + "\" " + command + " >> \"" +
                          log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string end_to_end() {
  const auto t0 = Clock::now();
  std::string detail;
  for (const auto mode : {RefinerMode::Identity, RefinerMode::Perfect}) {
    const bool perfect = mode == RefinerMode::Perfect;
    TempDir dir;
    const auto train = make_corpus(100);
    const auto test = make_corpus(100, 1000);
    write_file(dir / "data/train.tsv", train.tsv());
    write_file(dir / "data/test.tsv", test.tsv());
    MockServer server;
    server.on_chat(scripted_translator({train, test}, mode));
    const auto config = (dir / "run.toml").string();
    write_file(config, pipeline_config(server.chat_url()));
    const auto log = dir / "log.txt";
    for (const char* cmd : {"build-triplets", "score", "plan", "refine", "eval", "report"}) {
      const int rc = run_ladder(config, cmd, log);
      expect(rc == 0, std::string(cmd) + " exited " + std::to_string(rc) + ": " + read_file(log));
    }
    const auto out = dir / "out";
    const auto stats = read_json(out / "report/delta_stats.json")["directions"]["de-en"]["metrics"];
    const auto metrics = read_json(out / "eval/metrics.json")["de-en"];
    expect(metrics["refined"]["n"] == 100, "eval saw " + metrics["refined"]["n"].dump() + " items");
    if (!perfect) {
      for (const char* m : {"bleu", "chrf"}) {
        expect(stats[m]["delta_mean"].get<double>() == 0.0, std::string("identity refiner moved ") + m);
        expect(stats[m]["delta_std"].get<double>() == 0.0, std::string("identity refiner spread ") + m);
        expect(stats[m]["unchanged_frac"].get<double>() == 1.0, std::string("identity refiner changed ") + m);
      }
      expect(metrics["refined"]["bleu"] == metrics["intermediate"]["bleu"], "identity changed corpus BLEU");
    } else {
      const double want = static_cast<double>(test.imperfect()) / 100.0;
      expect(metrics["refined"]["bleu"].get<double>() == 100.0,
             "refined BLEU " + metrics["refined"]["bleu"].dump());
      expect(stats["bleu"]["improved_frac"].get<double>() == want,
             "improved_frac " + stats["bleu"]["improved_frac"].dump() + " vs " + fmt(want));
      detail = "improved_frac " + fmt(want);
    }
  }
  const double secs = seconds_since(t0);
  expect(secs < 60.0, "took " + fmt(secs) + " s");
  return "100 pairs, identity and perfect refiners, " + detail + ", " + fmt(secs) + " s";
}

std::string analytics() {
  const std::vector<double> orig{10, 20, 30, 40, 50, 60};
  const std::vector<double> ref{11, 23, 30, 38, 55, 66};  // deltas 1 3 0 -2 5 6
  const auto s = improvement_stats(orig, ref);
  const double mean = 13.0 / 6.0;
  double var = 0.0;
  for (double d : {1.0, 3.0, 0.0, -2.0, 5.0, 6.0}) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / 6.0);
  expect(std::abs(s.delta_mean - mean) <= 1e-12, "mean " + fmt(s.delta_mean));
  expect(std::abs(s.delta_std - sd) <= 1e-12, "std " + fmt(s.delta_std));
  expect(s.improved_frac == 4.0 / 6.0 && s.degraded_frac == 1.0 / 6.0 && s.unchanged_frac == 1.0 / 6.0,
         "class fractions");

  const auto triplets = random_triplets(500, 3);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<RefinementRecord> records;
  std::vector<double> o;
  std::vector<double> r;
  for (const auto& t : triplets) {
    RefinementRecord rec;
    rec.id = t.id;
    rec.direction = t.direction;
    rec.source = t.source;
    rec.intermediate = t.intermediate;
    rec.refined = t.intermediate;
    rec.reference = t.reference;
    const double a = std::round(*t.score * 1000.0) / 10.0;
    const double b = std::clamp(a + (pick(rng) - 1) * 2.5, 0.0, 100.0);
    rec.intermediate_scores.push_back(QualityScore::make(Metric::Bleu, a));
    rec.refined_scores.push_back(QualityScore::make(Metric::Bleu, b));
    records.push_back(rec);
    o.push_back(a);
    r.push_back(b);
  }
  const auto st = improvement_stats(o, r, 0.0, "bleu");
  const double total = st.improved_frac + st.degraded_frac + st.unchanged_frac;
  expect(std::abs(total - 1.0) <= 1e-12, "fractions sum to " + fmt(total));
  const auto rows = export_scatter(records, Metric::Bleu);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& row : rows) ++counts[static_cast<int>(row.cls)];
  const double n = static_cast<double>(rows.size());
  expect(rows.size() == st.n, "scatter rows " + std::to_string(rows.size()));
  expect(counts[0] / n == st.improved_frac && counts[1] / n == st.degraded_frac && counts[2] / n == st.unchanged_frac,
         "scatter proportions differ from DeltaStats");
  return "closed form to 1e-12, 500-record scatter";
}

std::string concurrency() {
  MockServer server;
  server.set_delay(std::chrono::milliseconds(5));
  server.on_chat([](const std::string& prompt, int) { return chat_reply("out:" + prompt); });
  EndpointConfig cfg;
  cfg.base_url = server.chat_url();
  cfg.model_name = "mock";
  cfg.max_in_flight = 6;
  cfg.retries = 0;
  ChatClient client(cfg);
  std::vector<std::string> prompts;
  for (int i = 0; i < 200; ++i) prompts.push_back("prompt " + std::to_string(i));
  const auto results = client.generate_batch(prompts);
  expect(results.size() == 200, "got " + std::to_string(results.size()) + " results");
  for (std::size_t i = 0; i < results.size(); ++i) {
    expect(results[i].ok() && *results[i].text == "out:" + prompts[i], "result " + std::to_string(i) + " out of order");
  }
  expect(server.requests() == 200, "server saw " + std::to_string(server.requests()) + " requests");
  expect(server.peak_in_flight() <= cfg.max_in_flight, "peak " + std::to_string(server.peak_in_flight()));
  return "200 prompts, peak " + std::to_string(server.peak_in_flight()) + " <= " + std::to_string(cfg.max_in_flight);
}

std::string self_refinement() {
  const auto corpus = make_corpus(20, 500);
  MockServer server;
  server.on_chat(scripted_translator({corpus}, RefinerMode::Identity));
  EndpointConfig cfg;
  cfg.base_url = server.chat_url();
  cfg.model_name = "mock";
  cfg.retries = 0;
  ChatClient client(cfg);
  DatasetSplit split;
  split.name = SplitName::Test;
  const auto d = Direction::from_codes("de", "en");
  for (std::size_t i = 0; i < corpus.sources.size(); ++i) {
    split.pairs.push_back({"s" + std::to_string(i), corpus.sources[i], corpus.references[i], d});
  }
  BleuScorer bleu;
  SegmentScorer* scorers[] = {&bleu};
  const auto traces = self_refine(split, client, 2, PromptPair{}, scorers);
  expect(traces.size() == 20, "got " + std::to_string(traces.size()) + " traces");
  for (const auto& t : traces) {
    expect(t.complete(2) && t.texts.size() == 3, t.id + " has length " + std::to_string(t.texts.size()));
    expect(t.texts[1] == t.texts[0] && t.texts[2] == t.texts[1], t.id + " moved at a fixed point");
    for (std::size_t k = 1; k < t.scores.size(); ++k) {
      const auto a = find_score(t.scores[k - 1], Metric::Bleu);
      const auto b = find_score(t.scores[k], Metric::Bleu);
      expect(a && b && a->value == b->value, t.id + " nonzero delta at iteration " + std::to_string(k));
    }
  }
  return "20 traces of length 3, zero delta";
}

}  // namespace

int main() {
  criterion("metric fidelity", metric_fidelity);
  criterion("partition correctness", partition_correctness);
  criterion("schedule laws", schedule_laws);
  criterion("shard losslessness", shard_losslessness);
  criterion("end-to-end mock run", end_to_end);
  criterion("analytics arithmetic", analytics);
  criterion("concurrency contract", concurrency);
  criterion("self-refinement mechanics", self_refinement);
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed") << std::endl;
  return g_failures == 0 ? 0 : 1;
}
