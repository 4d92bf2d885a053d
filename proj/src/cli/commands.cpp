#include "ladder/cli/commands.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "ladder/cli/config.hpp"
#include "ladder/corpus.hpp"
#include "ladder/error.hpp"
#include "ladder/hashing.hpp"
#include "ladder/hierarchy.hpp"
#include "ladder/jsonl.hpp"
#include "ladder/llm_client.hpp"
#include "ladder/metrics.hpp"
#include "ladder/refine.hpp"
#include "ladder/report.hpp"
#include "ladder/scoring.hpp"
#include "ladder/text.hpp"

extern char** environ;

namespace ladder::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

struct Failure {
  std::string direction;
  std::string id;
  std::string error;
};

class Session {
 public:
  Session(std::string command, const GlobalOptions& g, std::vector<std::string> args, std::ostream& log)
      : command_(std::move(command)), args_(std::move(args)), log_(log) {
    if (g.config.empty()) throw ConfigError("--config is required");
    cfg_ = load_run_config(g.config);
    if (g.seed) cfg_.seed = g.seed;
    if (!g.out.empty()) {
      out_ = fs::absolute(g.out).lexically_normal();
    } else if (cfg_.out) {
      out_ = *cfg_.out;
    } else {
      throw ConfigError("no output directory: pass --out or set [run] out");
    }
    force_ = g.force;
  }

  RunConfig& cfg() { return cfg_; }
  const fs::path& out() const { return out_; }
  std::ostream& log() { return log_; }

  /// Claims `out/name` for this command's artifacts.
  fs::path claim(const std::string& name) {
    auto dir = out_ / name;
    if (fs::exists(dir) && !fs::is_empty(dir)) {
      if (!force_) throw ConfigError("output directory exists: " + dir.string() + " (pass --force to overwrite)");
      fs::remove_all(dir);
    }
    fs::create_directories(dir);
    dir_ = dir;
    return dir;
  }

  /// Existing input directory written by an earlier command.
  fs::path input(const std::string& name, const std::string& producer) const {
    auto dir = out_ / name;
    if (!fs::is_directory(dir)) throw ConfigError("missing " + dir.string() + "; run `ladder " + producer + "` first");
    return dir;
  }

  void note(const std::string& key, json value) { extra_[key] = std::move(value); }
  void fail(Failure f) { failures_.push_back(std::move(f)); }
  const std::vector<Failure>& failures() const { return failures_; }

  /// Writes run.json (and failures.jsonl when items failed); returns the exit code.
  int finish() {
    if (!dir_.empty()) {
      if (!failures_.empty()) {
        std::ofstream f(dir_ / "failures.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& x : failures_) {
          f << dump_compact(json{{"direction", x.direction}, {"id", x.id}, {"error", x.error}}) << "\n";
        }
      }
      std::ofstream f(dir_ / "run.json", std::ios::binary | std::ios::trunc);
      f << dump_pretty(run_json()) << "\n";
      if (!f) throw IoError("cannot write " + (dir_ / "run.json").string());
    }
    if (!failures_.empty()) {
      log_ << command_ << ": " << failures_.size() << " item(s) failed; see " << (dir_ / "failures.jsonl").string()
           << "\n";
      return kExitPartial;
    }
    return kExitOk;
  }

 private:
  json run_json() const {
    json config = cfg_.raw;
    // Keys never leave the process.
    if (config.contains("endpoints")) {
      for (auto& [_, ep] : config["endpoints"].items()) {
        if (ep.is_object() && ep.contains("api_key")) ep["api_key"] = "<redacted>";
      }
    }
    if (config.contains("scorer") && config["scorer"].is_object() && config["scorer"].contains("api_key")) {
      config["scorer"]["api_key"] = "<redacted>";
    }
    json endpoints = json::object();
    for (const auto& [role, ep] : cfg_.endpoints) {
      endpoints[role] = json{{"tag", ep.tag()},
                             {"base_url", ep.base_url},
                             {"model", ep.model_name},
                             {"temperature", ep.temperature},
                             {"max_tokens", ep.max_tokens}};
    }
    json j{{"command", command_},
           {"args", args_},
           {"config_path", cfg_.source_path.string()},
           {"base_dir", cfg_.base_dir.string()},
           {"config", config},
           {"endpoints", endpoints},
           {"seed", cfg_.seed ? json(*cfg_.seed) : json(nullptr)},
           {"item_failures", failures_.size()}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    return j;
  }

  std::string command_;
  std::vector<std::string> args_;
  std::ostream& log_;
  RunConfig cfg_;
  fs::path out_;
  fs::path dir_;
  bool force_ = false;
  json extra_ = json::object();
  std::vector<Failure> failures_;
};

std::unique_ptr<SegmentScorer> make_scorer(const RunConfig& cfg) {
  if (cfg.scorer.kind == "bleu") return std::make_unique<BleuScorer>();
  if (cfg.scorer.kind == "neural") {
    auto cache = cfg.scorer.cache ? std::make_shared<ScoreCache>(*cfg.scorer.cache) : std::make_shared<ScoreCache>();
    return std::make_unique<NeuralScorer>(*cfg.scorer.neural, std::move(cache));
  }
  return std::make_unique<ChrfScorer>();
}

/// Lexical metrics always, plus the neural scorer when configured.
struct EvalScorers {
  BleuScorer bleu;
  ChrfScorer chrf;
  std::unique_ptr<SegmentScorer> neural;
  std::vector<SegmentScorer*> all;

  explicit EvalScorers(const RunConfig& cfg) {
    all = {&bleu, &chrf};
    if (cfg.scorer.kind == "neural") {
      neural = make_scorer(cfg);
      all.push_back(neural.get());
    }
  }
};

DatasetSplit load_split(const CorpusEntry& c, SplitName split) {
  auto path = c.split_path(split);
  if (!path) throw ConfigError("direction " + c.direction.label() + " has no " + std::string(to_string(split)) + " file");
  LoadOptions opts;
  opts.split = split;
  opts.dataset = c.direction.label() + "." + std::string(to_string(split));
  return load_parallel_corpus(*path, c.format, c.direction, opts);
}

std::vector<fs::path> jsonl_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".jsonl" && name != "failures.jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << dump_pretty(j) << "\n";
  if (!f) throw IoError("cannot write " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// --- build-triplets ---------------------------------------------------------

struct BuildOptions {
  bool weak = false;
  std::string split = "train";
  std::optional<std::size_t> sample;
};

int cmd_build_triplets(Session& s, const BuildOptions& o) {
  auto& cfg = s.cfg();
  if (cfg.corpora.empty()) throw ConfigError("no [[corpus]] configured");
  const auto split_name = parse_split_name(o.split);
  if (split_name == SplitName::Test) throw ConfigError("triplets are never built from the test split");
  if (o.sample && !cfg.seed) throw ConfigError("--sample needs a seed (--seed or [run] seed)");

  const auto prompts = cfg.prompts();
  ChatClient sampler(cfg.endpoint("sampler"));
  std::unique_ptr<ChatClient> weak;
  if (o.weak) weak = std::make_unique<ChatClient>(cfg.endpoint("weak"));

  const auto dir = s.claim("triplets");
  json counts = json::object();
  for (const auto& c : cfg.corpora) {
    if (!c.split_path(split_name)) continue;
    std::vector<DatasetSplit> all;
    for (auto sn : {SplitName::Train, SplitName::Dev, SplitName::Test}) {
      if (c.split_path(sn)) all.push_back(load_split(c, sn));
    }
    check_disjoint_splits(all);
    auto split = *std::find_if(all.begin(), all.end(), [&](const DatasetSplit& d) { return d.name == split_name; });
    if (o.sample) split = sample_dev_split(split, *o.sample, *cfg.seed);

    const auto label = c.direction.label();
    std::vector<RefinementTriplet> triplets;
    std::vector<ItemFailure> failures;
    if (weak) {
      auto r = build_weak_triplets(split, *weak, sampler, prompts, cfg.policy("weak"), cfg.policy("sampler"));
      triplets = std::move(r.triplets);
      failures = std::move(r.failures);
    } else {
      auto r = sample_triplets(split, sampler, prompts, cfg.policy("sampler"));
      triplets = std::move(r.triplets);
      failures = std::move(r.failures);
    }
    for (auto& f : failures) s.fail({label, f.id, f.error});
    write_triplets(triplets, dir / (label + ".jsonl"));
    counts[label] = json{{"pairs", split.size()}, {"triplets", triplets.size()}, {"failed", failures.size()}};
    s.log() << label << ": " << triplets.size() << "/" << split.size() << " triplets\n";
  }
  s.note("split", o.split);
  s.note("weak_references", o.weak);
  s.note("counts", counts);
  return s.finish();
}

// --- score ------------------------------------------------------------------

int cmd_score(Session& s, bool rescore) {
  auto& cfg = s.cfg();
  const auto in_dir = s.input("triplets", "build-triplets");
  auto scorer = make_scorer(cfg);
  const auto dir = s.claim("scored");
  json counts = json::object();
  for (const auto& file : jsonl_files(in_dir)) {
    auto triplets = read_triplets(file);
    if (!rescore) {
      std::vector<std::string> scored;
      for (const auto& t : triplets) {
        if (t.score) scored.push_back(t.id);
      }
      if (!scored.empty()) throw ItemsError("triplets already scored (pass --rescore)", std::move(scored));
    }
    std::vector<ScoreRequest> requests;
    for (const auto& t : triplets) requests.push_back({t.source, t.intermediate, t.reference, t.direction.tgt_lang});
    const auto outcomes = scorer->score_batch(requests);
    std::vector<RefinementTriplet> kept;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      if (!outcomes[i].score) {
        s.fail({triplets[i].direction.label(), triplets[i].id, outcomes[i].error});
        continue;
      }
      triplets[i].score = outcomes[i].score->normalized();
      triplets[i].scorer = scorer->label();
      kept.push_back(std::move(triplets[i]));
    }
    write_triplets(kept, dir / file.filename());
    counts[file.stem().string()] = json{{"scored", kept.size()}, {"failed", triplets.size() - kept.size()}};
    s.log() << file.stem().string() << ": scored " << kept.size() << "/" << triplets.size() << "\n";
  }
  s.note("scorer", scorer->label());
  s.note("counts", counts);
  return s.finish();
}

// --- plan -------------------------------------------------------------------

struct PlanOptions {
  std::string strategy;
  std::string preset;
  std::optional<double> mu;
  std::optional<double> nu;
  std::optional<bool> cumulative;
};

int cmd_plan(Session& s, const PlanOptions& o) {
  auto& cfg = s.cfg();
  if (!o.strategy.empty()) cfg.strategy = parse_strategy(o.strategy);
  if (!o.preset.empty()) {
    cfg.thresholds = ThresholdConfig::preset(o.preset);
    cfg.thresholds_name = o.preset;
  }
  if (o.mu || o.nu) {
    if (!o.mu || !o.nu) throw ConfigError("--mu and --nu go together");
    cfg.thresholds = ThresholdConfig::make(*o.mu, *o.nu);
    cfg.thresholds_name = "custom";
  }
  if (o.cumulative) cfg.cumulative = *o.cumulative;

  const auto in_dir = s.input("scored", "score");
  std::vector<RefinementTriplet> triplets;
  for (const auto& file : jsonl_files(in_dir)) {
    auto part = read_triplets(file);
    triplets.insert(triplets.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::vector<std::string> unscored;
  for (const auto& t : triplets) {
    if (!t.score) unscored.push_back(t.id);
  }
  if (!unscored.empty()) throw ItemsError("unscored triplets; run `ladder score` first", std::move(unscored));
  if (cfg.strategy == Strategy::Mixed && !cfg.seed) throw ConfigError("mixed strategy needs a seed (--seed or [run] seed)");

  const auto p = partition(triplets, cfg.thresholds);
  const auto plan =
      plan_schedule(p, cfg.strategy, cfg.strategy == Strategy::Mixed ? cfg.seed : std::optional<std::uint64_t>{});
  const auto dir = s.claim("plan");
  const auto shards = emit_shards(plan, cfg.prompts().refine, dir);
  auto manifest = plan_manifest(plan, p, shards, cfg.cumulative);
  manifest["preset"] = cfg.thresholds_name;
  write_json_file(dir / "plan.json", manifest);
  s.log() << "easy " << p.easy.size() << ", medium " << p.medium.size() << ", hard " << p.hard.size() << " ("
          << to_string(plan.strategy) << ")\n";
  s.note("strategy", std::string(to_string(plan.strategy)));
  s.note("thresholds", json{{"preset", cfg.thresholds_name}, {"mu", cfg.thresholds.mu}, {"nu", cfg.thresholds.nu}});
  return s.finish();
}

// --- train ------------------------------------------------------------------

std::optional<fs::path> find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return fs::path(name);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::string_view rest(path);
  while (true) {
    const auto colon = rest.find(':');
    const auto dir = rest.substr(0, colon);
    const fs::path candidate = fs::path(dir.empty() ? "." : std::string(dir)) / name;
    if (::access(candidate.c_str(), X_OK) == 0 && !fs::is_directory(candidate)) return candidate;
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

int spawn_and_wait(const std::vector<std::string>& argv) {
  std::vector<char*> cargs;
  for (const auto& a : argv) cargs.push_back(const_cast<char*>(a.c_str()));
  cargs.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, cargs[0], nullptr, nullptr, cargs.data(), environ);
  if (rc != 0) throw Error("cannot start " + argv[0] + ": " + std::strerror(rc));
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error("waitpid failed: " + std::string(std::strerror(errno)));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

/// Checks a stage receipt against what was asked for; returns an error or "".
std::string check_receipt(const json& r, int stage, const std::string& shard_sha, const std::string& config_sha,
                          const json& init_checkpoint) {
  if (!r.is_object()) return "receipt is not an object";
  for (const char* key : {"stage", "shard_sha256", "config_sha256", "init_checkpoint", "final_loss", "steps"}) {
    if (!r.contains(key)) return std::string("receipt lacks \"") + key + "\"";
  }
  if (!r["stage"].is_number_integer() || r["stage"].get<int>() != stage) return "receipt is for another stage";
  if (r["shard_sha256"] != shard_sha) return "receipt shard_sha256 does not match the shard";
  if (r["config_sha256"] != config_sha) return "receipt config_sha256 does not match the stage config";
  if (r["init_checkpoint"] != init_checkpoint) return "receipt init_checkpoint breaks the checkpoint chain";
  if (!r["final_loss"].is_number() || !std::isfinite(r["final_loss"].get<double>())) return "final_loss is not finite";
  if (!r["steps"].is_number_integer() || r["steps"].get<long long>() < 0) return "steps must be a non-negative integer";
  return "";
}

int cmd_train(Session& s) {
  auto& cfg = s.cfg();
  const auto plan_dir = s.input("plan", "plan");
  const auto manifest = read_json_file(plan_dir / "plan.json");
  if (cfg.train.adapter.empty()) {
    throw ConfigError(
        "no trainer adapter configured; install the ladder trainer package and set [train] adapter "
        "(e.g. adapter = [\"ladder-train\"])");
  }
  if (!find_executable(cfg.train.adapter.front())) {
    throw ConfigError("trainer adapter '" + cfg.train.adapter.front() +
                      "' not found on PATH; install the ladder trainer package or fix [train] adapter");
  }
  if (cfg.train.base_model_id.empty()) throw ConfigError("[train] base_model is required");

  const auto dir = s.claim("train");
  const bool cumulative = manifest.value("cumulative", false);
  std::vector<std::string> all_shards;
  for (const auto& st : manifest.at("stages")) {
    all_shards.push_back((plan_dir / st.at("shard").get<std::string>()).string());
  }

  json checkpoint = nullptr;
  json summary = json::array();
  std::size_t seen_items = 0;
  for (const auto& st : manifest.at("stages")) {
    const int k = st.at("stage").get<int>();
    const auto shard = plan_dir / st.at("shard").get<std::string>();
    const auto count = st.at("count").get<std::size_t>();
    seen_items += count;
    if (cumulative ? seen_items == 0 : count == 0) {
      s.log() << "stage " << k << " (" << st.at("name").get<std::string>() << "): empty, skipped\n";
      summary.push_back(json{{"stage", k}, {"status", "skipped"}, {"checkpoint", checkpoint}});
      continue;
    }
    const auto ckpt_dir = dir / "checkpoints" / ("stage" + std::to_string(k));
    const auto receipt_path = dir / ("receipt_stage" + std::to_string(k) + ".json");
    json stage_cfg{{"stage", k},
                   {"name", st.at("name")},
                   {"strategy", manifest.at("strategy")},
                   {"shard", shard.string()},
                   {"stage_shard_paths", std::vector<std::string>(all_shards.begin(), all_shards.begin() + k)},
                   {"cumulative", cumulative},
                   {"init_checkpoint", checkpoint},
                   {"checkpoint_dir", ckpt_dir.string()},
                   {"receipt_path", receipt_path.string()},
                   {"base_model_id", cfg.train.base_model_id},
                   {"lora_rank", cfg.train.lora_rank},
                   {"learning_rate", cfg.train.learning_rate},
                   {"epochs_per_stage", cfg.train.epochs_per_stage},
                   {"batch_size", cfg.train.batch_size},
                   {"max_seq_len", cfg.train.max_seq_len},
                   {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)}};
    const auto stage_path = dir / ("stage" + std::to_string(k) + ".json");
    write_json_file(stage_path, stage_cfg);

    auto argv = cfg.train.adapter;
    argv.insert(argv.end(), {"train", "--config", stage_path.string()});
    s.log() << "stage " << k << " (" << st.at("name").get<std::string>() << "): training on " << count << " items\n";
    const int rc = spawn_and_wait(argv);
    if (rc != 0) {
      throw Error("stage " + std::to_string(k) + " failed: trainer exited with status " + std::to_string(rc) +
                  "; checkpoints of earlier stages are kept under " + (dir / "checkpoints").string());
    }
    if (!fs::exists(receipt_path)) throw Error("stage " + std::to_string(k) + ": trainer wrote no receipt");
    const auto receipt = read_json_file(receipt_path);
    const auto problem = check_receipt(receipt, k, sha256_file(shard), sha256_file(stage_path), checkpoint);
    if (!problem.empty()) throw Error("stage " + std::to_string(k) + ": " + problem);
    checkpoint = ckpt_dir.string();
    summary.push_back(json{{"stage", k},
                           {"status", "trained"},
                           {"checkpoint", checkpoint},
                           {"final_loss", receipt["final_loss"]},
                           {"steps", receipt["steps"]}});
  }
  write_json_file(dir / "summary.json", json{{"stages", summary}, {"final_checkpoint", checkpoint}});
  s.note("adapter", cfg.train.adapter);
  return s.finish();
}

// --- refine -----------------------------------------------------------------

int cmd_refine(Session& s, const std::string& split_opt) {
  auto& cfg = s.cfg();
  if (cfg.corpora.empty()) throw ConfigError("no [[corpus]] configured");
  const auto split_name = parse_split_name(split_opt);
  const auto prompts = cfg.prompts();
  ChatClient ladder(cfg.endpoint("ladder"));
  std::unique_ptr<ChatClient> target;
  EvalScorers scorers(cfg);
  RefineOptions opts{cfg.policy("target"), cfg.policy("ladder")};

  const auto dir = s.claim("refine");
  for (const auto& c : cfg.corpora) {
    const auto label = c.direction.label();
    std::vector<RefinementRecord> records;
    if (c.intermediates) {
      const auto items = read_precomputed(*c.intermediates, c.intermediates_format, c.direction, label + ".test");
      records = precomputed_refine(items, ladder, prompts, opts);
    } else {
      if (!c.split_path(split_name)) continue;
      if (!target) target = std::make_unique<ChatClient>(cfg.endpoint("target"));
      records = refine_corpus(load_split(c, split_name), *target, ladder, prompts, opts);
    }
    score_records(records, scorers.all);
    std::size_t ok = 0;
    for (const auto& r : records) {
      if (r.ok()) {
        ++ok;
      } else {
        s.fail({label, r.id, r.error.value_or("failed")});
      }
    }
    write_records(records, dir / (label + ".jsonl"));
    s.log() << label << ": refined " << ok << "/" << records.size() << "\n";
  }
  json labels = json::array();
  for (auto* sc : scorers.all) labels.push_back(sc->label());
  s.note("scorers", labels);
  return s.finish();
}

// --- self-refine ------------------------------------------------------------

int cmd_self_refine(Session& s, std::optional<int> iterations, const std::string& role, const std::string& split_opt) {
  auto& cfg = s.cfg();
  const int n = iterations.value_or(cfg.self_refine_iterations);
  if (n < 1) throw ConfigError("--iterations must be >= 1");
  const auto split_name = parse_split_name(split_opt);
  const auto prompts = cfg.prompts();
  ChatClient model(cfg.endpoint(role));
  EvalScorers scorers(cfg);

  const auto dir = s.claim("self_refine");
  json summary = json::object();
  for (const auto& c : cfg.corpora) {
    if (!c.split_path(split_name)) continue;
    const auto label = c.direction.label();
    const auto traces = self_refine(load_split(c, split_name), model, n, prompts, scorers.all, cfg.policy(role));
    write_traces(traces, dir / (label + ".jsonl"));

    // Corpus metrics per iteration over traces that completed every step.
    std::vector<std::vector<std::string>> hyps(n + 1);
    std::vector<std::string> refs;
    for (const auto& t : traces) {
      if (!t.complete(n)) {
        s.fail({label, t.id, t.error.value_or("incomplete")});
        continue;
      }
      if (!t.reference) continue;
      refs.push_back(*t.reference);
      for (int k = 0; k <= n; ++k) hyps[k].push_back(t.texts[k]);
    }
    json per_iter = json::array();
    if (!refs.empty()) {
      const auto tok = tokenization_for_language(c.direction.tgt_lang);
      for (int k = 0; k <= n; ++k) {
        per_iter.push_back(json{{"iteration", k},
                                {"bleu", bleu_corpus(hyps[k], refs, tok).value},
                                {"chrf", chrf_corpus(hyps[k], refs).value}});
      }
    }
    summary[label] = json{{"complete", refs.size()}, {"total", traces.size()}, {"iterations", per_iter}};
  }
  write_json_file(dir / "summary.json", summary);
  s.note("iterations", n);
  s.note("model", cfg.endpoint(role).tag());
  return s.finish();
}

// --- eval -------------------------------------------------------------------

struct EvalOptions {
  std::string hyp;
  std::string ref;
  std::string src;
  std::string lang;
};

json metric_report_json(const MetricReport& m, std::size_t n) {
  json j{{"n", n}, {"bleu", m.corpus_bleu}, {"chrf", m.corpus_chrf}};
  if (m.mean_neural) {
    j["neural"] = *m.mean_neural;
    j["neural_scorer"] = m.neural_label;
  }
  return j;
}

int eval_files(std::ostream& out, const EvalOptions& o) {
  if (o.lang.empty()) throw ConfigError("--lang (target language code) is required with --hyp/--ref");
  const auto hyps = read_lines(o.hyp);
  const auto refs = read_lines(o.ref);
  if (hyps.size() != refs.size()) {
    throw ConfigError("line count mismatch: " + std::to_string(hyps.size()) + " hypotheses vs " +
                      std::to_string(refs.size()) + " references");
  }
  std::vector<std::string> srcs;
  if (!o.src.empty()) {
    srcs = read_lines(o.src);
    if (srcs.size() != hyps.size()) throw ConfigError("line count mismatch between --src and --hyp");
  } else {
    srcs.assign(hyps.size(), "");
  }
  const auto m = evaluate(hyps, refs, srcs, o.lang);
  out << dump_pretty(metric_report_json(m, hyps.size())) << "\n";
  return kExitOk;
}

int cmd_eval(Session& s) {
  auto& cfg = s.cfg();
  const auto in_dir = s.input("refine", "refine");
  EvalScorers scorers(cfg);
  const auto dir = s.claim("eval");
  json result = json::object();
  for (const auto& file : jsonl_files(in_dir)) {
    const auto records = read_records(file);
    if (records.empty()) continue;
    std::vector<std::string> inter;
    std::vector<std::string> refined;
    std::vector<std::string> refs;
    std::vector<std::string> srcs;
    for (const auto& r : records) {
      if (!r.ok() || !r.intermediate || !r.reference) continue;
      inter.push_back(*r.intermediate);
      refined.push_back(*r.refined);
      refs.push_back(*r.reference);
      srcs.push_back(r.source);
    }
    const auto label = file.stem().string();
    if (refs.empty()) {
      s.log() << label << ": nothing to evaluate\n";
      continue;
    }
    const auto& lang = records.front().direction.tgt_lang;
    const auto a = evaluate(inter, refs, srcs, lang, scorers.neural.get());
    const auto b = evaluate(refined, refs, srcs, lang, scorers.neural.get());
    result[label] = json{{"model", records.front().target_tag},
                         {"ladder", records.front().ladder_tag},
                         {"skipped", records.size() - refs.size()},
                         {"intermediate", metric_report_json(a, refs.size())},
                         {"refined", metric_report_json(b, refs.size())}};
    s.log() << label << ": BLEU " << format_exact(a.corpus_bleu) << " -> " << format_exact(b.corpus_bleu) << "\n";
  }
  write_json_file(dir / "metrics.json", result);
  return s.finish();
}

// --- report -----------------------------------------------------------------

int cmd_report(Session& s, std::optional<double> eps_override) {
  auto& cfg = s.cfg();
  const double eps = eps_override.value_or(cfg.tie_epsilon);
  if (!(eps >= 0.0)) throw ConfigError("--tie-epsilon must be >= 0");
  const auto in_dir = s.input("refine", "refine");
  const auto dir = s.claim("report");

  json stats = json::object();
  BucketBreakdown rows;
  for (const auto& file : jsonl_files(in_dir)) {
    const auto all = read_records(file);
    std::vector<RefinementRecord> records;
    for (const auto& r : all) {
      if (r.ok() && r.reference && !r.intermediate_scores.empty() && !r.refined_scores.empty()) records.push_back(r);
    }
    const auto label = file.stem().string();
    if (records.empty()) continue;

    json per_metric = json::object();
    BreakdownRow row{records.front().target_tag, label, {}};
    std::vector<std::string> inter;
    std::vector<std::string> refined;
    std::vector<std::string> refs;
    for (const auto& r : records) {
      inter.push_back(*r.intermediate);
      refined.push_back(*r.refined);
      refs.push_back(*r.reference);
    }
    const auto tok = tokenization_for_language(records.front().direction.tgt_lang);
    for (auto metric : {Metric::Bleu, Metric::Chrf, Metric::Neural}) {
      if (!find_score(records.front().intermediate_scores, metric)) continue;
      const auto [orig, ref] = paired_scores(records, metric);
      const auto name = std::string(to_string(metric));
      per_metric[name] = improvement_stats(orig, ref, eps, name).to_json();
      write_scatter_csv(export_scatter(records, metric, eps), dir / ("scatter_" + label + "_" + name + ".csv"));
      switch (metric) {
        case Metric::Bleu:
          row.cells.push_back({"BLEU", bleu_corpus(inter, refs, tok).value, bleu_corpus(refined, refs, tok).value});
          break;
        case Metric::Chrf:
          row.cells.push_back({"chrF", chrf_corpus(inter, refs).value, chrf_corpus(refined, refs).value});
          break;
        case Metric::Neural: {
          double a = 0;
          double b = 0;
          for (std::size_t i = 0; i < orig.size(); ++i) {
            a += orig[i];
            b += ref[i];
          }
          row.cells.push_back({"neural", a / orig.size(), b / orig.size()});
          break;
        }
      }
    }
    stats[label] = json{{"model", row.model},
                        {"n", records.size()},
                        {"excluded", all.size() - records.size()},
                        {"metrics", per_metric}};
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("no scored refinement records under " + in_dir.string());

  // Table rows must share columns; keep the metrics every row has.
  std::set<std::string> common;
  for (const auto& c : rows.front().cells) common.insert(c.label);
  for (const auto& r : rows) {
    std::set<std::string> here;
    for (const auto& c : r.cells) here.insert(c.label);
    std::set<std::string> keep;
    std::set_intersection(common.begin(), common.end(), here.begin(), here.end(), std::inserter(keep, keep.end()));
    common = std::move(keep);
  }
  for (auto& r : rows) {
    std::erase_if(r.cells, [&](const MetricCell& c) { return !common.contains(c.label); });
  }

  write_json_file(dir / "delta_stats.json", json{{"tie_epsilon", eps}, {"directions", stats}});
  write_text_file(dir / "table.txt", render_table(rows, TableFormat::Text, eps));
  write_text_file(dir / "table.md", render_table(rows, TableFormat::Markdown, eps));
  write_text_file(dir / "table.csv", render_table(rows, TableFormat::Csv, eps));
  s.log() << render_table(rows, TableFormat::Text, eps);
  s.note("tie_epsilon", eps);
  return s.finish();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Translation refinement pipeline: triplets, hierarchy, staged training, refinement, reports", "ladder"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("-c,--config", g.config, "Run config (TOML, or a run.json to replay)");
  app.add_option("-o,--out", g.out, "Output directory (overrides [run] out)");
  app.add_flag("-f,--force", g.force, "Overwrite an existing command output directory");
  app.add_option("--seed", g.seed, "Seed for sampling and the mixed schedule");

  BuildOptions build;
  auto* c_build = app.add_subcommand("build-triplets", "Sample intermediate translations into triplets");
  c_build->add_flag("--weak", build.weak, "Use the weak endpoint's outputs as references");
  c_build->add_option("--split", build.split, "train or dev")->capture_default_str();
  c_build->add_option("--sample", build.sample, "Sample N pairs without replacement (seeded)");

  bool rescore = false;
  auto* c_score = app.add_subcommand("score", "Score triplet intermediates against references");
  c_score->add_flag("--rescore", rescore, "Overwrite existing scores");

  PlanOptions plan;
  auto* c_plan = app.add_subcommand("plan", "Partition scored triplets and write staged shards");
  c_plan->add_option("--strategy", plan.strategy, "hft, anti_hft or mixed");
  c_plan->add_option("--preset", plan.preset, "HFT1, HFT2 or HFT3");
  c_plan->add_option("--mu", plan.mu, "Easy/medium threshold");
  c_plan->add_option("--nu", plan.nu, "Medium/hard threshold");
  c_plan->add_option("--cumulative", plan.cumulative, "Train each stage on all shards so far");

  auto* c_train = app.add_subcommand("train", "Run the trainer adapter stage by stage");

  std::string refine_split = "test";
  auto* c_refine = app.add_subcommand("refine", "Translate with the target model, refine with the ladder model");
  c_refine->add_option("--split", refine_split, "Split to refine")->capture_default_str();

  std::optional<int> iterations;
  std::string sr_role = "ladder";
  std::string sr_split = "test";
  auto* c_self = app.add_subcommand("self-refine", "Iteratively refine a model's own translations");
  c_self->add_option("-n,--iterations", iterations, "Refinement steps");
  c_self->add_option("--endpoint", sr_role, "Endpoint role to use")->capture_default_str();
  c_self->add_option("--split", sr_split, "Split to use")->capture_default_str();

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Corpus BLEU/chrF (and neural) of refinement output or plain files");
  c_eval->add_option("--hyp", ev.hyp, "Hypothesis file, one segment per line");
  c_eval->add_option("--ref", ev.ref, "Reference file");
  c_eval->add_option("--src", ev.src, "Source file");
  c_eval->add_option("--lang", ev.lang, "Target language code");

  std::optional<double> eps;
  auto* c_report = app.add_subcommand("report", "Improvement statistics, tables and scatter exports");
  c_report->add_option("--tie-epsilon", eps, "Deltas within this are unchanged");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "ladder: " << e.what() << "\n";
    return kExitError;
  }

  try {
    if (c_eval->parsed() && (!ev.hyp.empty() || !ev.ref.empty())) {
      if (ev.hyp.empty() || ev.ref.empty()) throw ConfigError("--hyp and --ref go together");
      return eval_files(out, ev);
    }
    auto* sub = app.get_subcommands().front();
    Session s(sub->get_name(), g, args, err);
    if (sub == c_build) return cmd_build_triplets(s, build);
    if (sub == c_score) return cmd_score(s, rescore);
    if (sub == c_plan) return cmd_plan(s, plan);
    if (sub == c_train) return cmd_train(s);
    if (sub == c_refine) return cmd_refine(s, refine_split);
    if (sub == c_self) return cmd_self_refine(s, iterations, sr_role, sr_split);
    if (sub == c_eval) return cmd_eval(s);
    if (sub == c_report) return cmd_report(s, eps);
    return kExitError;
  } catch (const std::exception& e) {
    err << "ladder: " << e.what() << "\n";
  }
  return kExitError;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ladder::cli
