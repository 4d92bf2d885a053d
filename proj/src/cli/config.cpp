#include "ladder/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#define TOML_ENABLE_FORMATTERS 1
#include <toml.hpp>

namespace ladder::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + std::string(where));
  }
}

const json* section(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(std::string("[") + name + "] must be a table");
  return &*it;
}

template <typename T>
std::optional<T> get(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + std::string(where));
  }
}

double get_number(const json& obj, const char* key, std::string_view where, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ConfigError("'" + std::string(key) + "' in " + std::string(where) + " must be a number");
  return it->get<double>();
}

int get_int(const json& obj, const char* key, std::string_view where, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) {
    throw ConfigError("'" + std::string(key) + "' in " + std::string(where) + " must be an integer");
  }
  return it->get<int>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

fs::path existing(const fs::path& base, const std::string& p, std::string_view what) {
  auto path = resolve(base, p);
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string());
  return path;
}

ExtractionPolicy read_policy(const json& obj, std::string_view where, const ExtractionPolicy& fallback) {
  ExtractionPolicy p = fallback;
  if (auto v = get<std::string>(obj, "label_pattern", where)) p.label_pattern = *v;
  if (auto v = get<bool>(obj, "strip_quotes", where)) p.strip_quotes = *v;
  return p;
}

EndpointConfig read_endpoint(const std::string& role, const json& obj) {
  const std::string where = "[endpoints." + role + "]";
  check_keys(obj, where,
             {"base_url", "model", "name", "api_key", "max_in_flight", "timeout", "retries", "temperature",
              "max_tokens", "backoff_base_ms", "backoff_cap_ms", "label_pattern", "strip_quotes"});
  EndpointConfig cfg;
  auto url = get<std::string>(obj, "base_url", where);
  auto model = get<std::string>(obj, "model", where);
  if (!url || !model) throw ConfigError(where + " needs base_url and model");
  cfg.base_url = *url;
  cfg.model_name = *model;
  cfg.name = get<std::string>(obj, "name", where).value_or(role);
  cfg.api_key = get<std::string>(obj, "api_key", where);
  cfg.max_in_flight = get_int(obj, "max_in_flight", where, cfg.max_in_flight);
  cfg.timeout_seconds = get_number(obj, "timeout", where, cfg.timeout_seconds);
  cfg.retries = get_int(obj, "retries", where, cfg.retries);
  cfg.temperature = get_number(obj, "temperature", where, cfg.temperature);
  cfg.max_tokens = get_int(obj, "max_tokens", where, cfg.max_tokens);
  cfg.backoff_base = std::chrono::milliseconds(get_int(obj, "backoff_base_ms", where, 500));
  cfg.backoff_cap = std::chrono::milliseconds(get_int(obj, "backoff_cap_ms", where, 30000));
  try {
    cfg.validate();
  } catch (const InvariantError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

CorpusEntry read_corpus(const json& obj, std::size_t index, const fs::path& base) {
  const std::string where = "[[corpus]] #" + std::to_string(index + 1);
  check_keys(obj, where,
             {"src", "tgt", "src_name", "tgt_name", "format", "train", "dev", "test", "intermediates",
              "intermediates_format"});
  auto src = get<std::string>(obj, "src", where);
  auto tgt = get<std::string>(obj, "tgt", where);
  if (!src || !tgt) throw ConfigError(where + " needs src and tgt");
  CorpusEntry e;
  try {
    auto src_name = get<std::string>(obj, "src_name", where);
    auto tgt_name = get<std::string>(obj, "tgt_name", where);
    if (src_name || tgt_name) {
      auto sn = src_name ? *src_name : language_name(*src).value_or("");
      auto tn = tgt_name ? *tgt_name : language_name(*tgt).value_or("");
      e.direction = Direction::make(*src, *tgt, sn, tn);
    } else {
      e.direction = Direction::from_codes(*src, *tgt);
    }
    e.format = parse_corpus_format(get<std::string>(obj, "format", where).value_or("tsv"));
    e.intermediates_format = parse_corpus_format(get<std::string>(obj, "intermediates_format", where).value_or("tsv"));
  } catch (const InvariantError& err) {
    throw ConfigError(where + ": " + err.what());
  }
  if (e.intermediates_format == CorpusFormat::PairedText) {
    throw ConfigError(where + ": intermediates_format must be tsv or jsonl");
  }

  auto split_file = [&](const char* key) -> std::optional<fs::path> {
    auto v = get<std::string>(obj, key, where);
    if (!v) return std::nullopt;
    if (e.format == CorpusFormat::PairedText) {
      // A prefix; the two language files must exist.
      auto prefix = resolve(base, *v);
      for (const auto& lang : {e.direction.src_lang, e.direction.tgt_lang}) {
        fs::path f = prefix;
        f += "." + lang;
        if (!fs::exists(f)) throw ConfigError("corpus file not found: " + f.string());
      }
      return prefix;
    }
    return existing(base, *v, "corpus file");
  };
  e.train = split_file("train");
  e.dev = split_file("dev");
  e.test = split_file("test");
  if (auto v = get<std::string>(obj, "intermediates", where)) e.intermediates = existing(base, *v, "intermediates file");
  return e;
}

}  // namespace

std::optional<fs::path> CorpusEntry::split_path(SplitName split) const {
  switch (split) {
    case SplitName::Train: return train;
    case SplitName::Dev: return dev;
    case SplitName::Test: return test;
  }
  return std::nullopt;
}

const EndpointConfig& RunConfig::endpoint(const std::string& role) const {
  auto it = endpoints.find(role);
  if (it == endpoints.end()) throw ConfigError("no [endpoints." + role + "] configured");
  return it->second;
}

const ExtractionPolicy& RunConfig::policy(const std::string& role) const {
  auto it = policies.find(role);
  return it == policies.end() ? default_policy : it->second;
}

PromptPair RunConfig::prompts() const {
  PromptPair p;
  try {
    if (direct_template) p.direct = PromptTemplate::load(PromptKind::Direct, *direct_template);
    if (refine_template) p.refine = PromptTemplate::load(PromptKind::Refine, *refine_template);
  } catch (const InvariantError& e) {
    throw ConfigError(std::string("prompt template: ") + e.what());
  }
  return p;
}

json toml_file_to_json(const fs::path& path) {
  toml::table tbl;
  try {
    tbl = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  std::ostringstream os;
  os << toml::json_formatter{tbl};
  return json::parse(os.str());
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir, const fs::path& source_path) {
  if (!doc.is_object()) throw ConfigError("config root must be a table");
  check_keys(doc, "config",
             {"run", "endpoints", "scorer", "prompt", "corpus", "hierarchy", "self_refine", "train", "report"});

  RunConfig cfg;
  cfg.source_path = source_path;
  cfg.base_dir = base_dir;
  cfg.raw = doc;

  if (const auto* run = section(doc, "run")) {
    check_keys(*run, "[run]", {"out", "seed"});
    if (auto v = get<std::string>(*run, "out", "[run]")) cfg.out = resolve(base_dir, *v);
    cfg.seed = get<std::uint64_t>(*run, "seed", "[run]");
  }

  if (const auto* prompt = section(doc, "prompt")) {
    check_keys(*prompt, "[prompt]", {"direct", "refine", "label_pattern", "strip_quotes"});
    if (auto v = get<std::string>(*prompt, "direct", "[prompt]")) cfg.direct_template = existing(base_dir, *v, "template");
    if (auto v = get<std::string>(*prompt, "refine", "[prompt]")) cfg.refine_template = existing(base_dir, *v, "template");
    cfg.default_policy = read_policy(*prompt, "[prompt]", cfg.default_policy);
  }

  if (const auto* eps = section(doc, "endpoints")) {
    for (const auto& [role, obj] : eps->items()) {
      if (!obj.is_object()) throw ConfigError("[endpoints." + role + "] must be a table");
      cfg.endpoints.emplace(role, read_endpoint(role, obj));
      cfg.policies.emplace(role, read_policy(obj, "[endpoints." + role + "]", cfg.default_policy));
    }
  }

  if (auto it = doc.find("corpus"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("corpus must be an array of tables ([[corpus]])");
    for (std::size_t i = 0; i < it->size(); ++i) cfg.corpora.push_back(read_corpus((*it)[i], i, base_dir));
    for (std::size_t i = 0; i < cfg.corpora.size(); ++i) {
      for (std::size_t j = i + 1; j < cfg.corpora.size(); ++j) {
        if (cfg.corpora[i].direction.label() == cfg.corpora[j].direction.label()) {
          throw ConfigError("direction " + cfg.corpora[i].direction.label() + " configured twice");
        }
      }
    }
  }

  if (const auto* h = section(doc, "hierarchy")) {
    check_keys(*h, "[hierarchy]", {"preset", "mu", "nu", "strategy", "seed", "cumulative"});
    auto preset = get<std::string>(*h, "preset", "[hierarchy]");
    const bool has_mu = h->contains("mu");
    const bool has_nu = h->contains("nu");
    if (preset && (has_mu || has_nu)) throw ConfigError("[hierarchy]: give either preset or mu/nu, not both");
    if (has_mu != has_nu) throw ConfigError("[hierarchy]: mu and nu go together");
    try {
      if (preset) {
        cfg.thresholds = ThresholdConfig::preset(*preset);
        cfg.thresholds_name = *preset;
      } else if (has_mu) {
        cfg.thresholds = ThresholdConfig::make(get_number(*h, "mu", "[hierarchy]", 0), get_number(*h, "nu", "[hierarchy]", 0));
        cfg.thresholds_name = "custom";
      }
      if (auto s = get<std::string>(*h, "strategy", "[hierarchy]")) cfg.strategy = parse_strategy(*s);
    } catch (const InvariantError& e) {
      throw ConfigError(std::string("[hierarchy]: ") + e.what());
    }
    if (auto s = get<std::uint64_t>(*h, "seed", "[hierarchy]")) cfg.seed = s;
    cfg.cumulative = get<bool>(*h, "cumulative", "[hierarchy]").value_or(false);
  }

  if (const auto* s = section(doc, "scorer")) {
    check_keys(*s, "[scorer]",
               {"kind", "endpoint", "api_key", "reference_free", "cache", "max_in_flight", "timeout", "retries",
                "backoff_base_ms", "backoff_cap_ms"});
    cfg.scorer.kind = get<std::string>(*s, "kind", "[scorer]").value_or("chrf");
    if (cfg.scorer.kind == "comet") cfg.scorer.kind = "neural";
    if (cfg.scorer.kind != "chrf" && cfg.scorer.kind != "bleu" && cfg.scorer.kind != "neural") {
      throw ConfigError("[scorer]: kind must be chrf, bleu or neural");
    }
    if (cfg.scorer.kind == "neural") {
      NeuralScorerConfig n;
      auto endpoint = get<std::string>(*s, "endpoint", "[scorer]");
      if (!endpoint) throw ConfigError("[scorer]: neural scorer needs endpoint");
      n.endpoint = *endpoint;
      n.api_key = get<std::string>(*s, "api_key", "[scorer]");
      n.reference_free = get<bool>(*s, "reference_free", "[scorer]").value_or(false);
      n.max_in_flight = get_int(*s, "max_in_flight", "[scorer]", n.max_in_flight);
      n.timeout_seconds = get_number(*s, "timeout", "[scorer]", n.timeout_seconds);
      n.retries = get_int(*s, "retries", "[scorer]", n.retries);
      n.backoff_base = std::chrono::milliseconds(get_int(*s, "backoff_base_ms", "[scorer]", 500));
      n.backoff_cap = std::chrono::milliseconds(get_int(*s, "backoff_cap_ms", "[scorer]", 30000));
      try {
        n.validate();
      } catch (const InvariantError& e) {
        throw ConfigError(std::string("[scorer]: ") + e.what());
      }
      cfg.scorer.neural = n;
    }
    if (auto v = get<std::string>(*s, "cache", "[scorer]")) cfg.scorer.cache = resolve(base_dir, *v);
  }

  if (const auto* sr = section(doc, "self_refine")) {
    check_keys(*sr, "[self_refine]", {"iterations"});
    cfg.self_refine_iterations = get_int(*sr, "iterations", "[self_refine]", 2);
    if (cfg.self_refine_iterations < 1) throw ConfigError("[self_refine]: iterations must be >= 1");
  }

  if (const auto* r = section(doc, "report")) {
    check_keys(*r, "[report]", {"tie_epsilon"});
    cfg.tie_epsilon = get_number(*r, "tie_epsilon", "[report]", 0.0);
    if (!(cfg.tie_epsilon >= 0.0)) throw ConfigError("[report]: tie_epsilon must be >= 0");
  }

  if (const auto* t = section(doc, "train")) {
    check_keys(*t, "[train]",
               {"adapter", "base_model", "lora_rank", "learning_rate", "epochs_per_stage", "batch_size",
                "max_seq_len"});
    if (auto it = t->find("adapter"); it != t->end()) {
      if (it->is_string()) {
        cfg.train.adapter = {it->get<std::string>()};
      } else if (it->is_array() && !it->empty() &&
                 std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_string(); })) {
        cfg.train.adapter = it->get<std::vector<std::string>>();
      } else {
        throw ConfigError("[train]: adapter must be a command string or a non-empty array of strings");
      }
    }
    cfg.train.base_model_id = get<std::string>(*t, "base_model", "[train]").value_or("");
    cfg.train.lora_rank = get_int(*t, "lora_rank", "[train]", 16);
    cfg.train.learning_rate = get_number(*t, "learning_rate", "[train]", 1e-4);
    cfg.train.epochs_per_stage = get_int(*t, "epochs_per_stage", "[train]", 1);
    cfg.train.batch_size = get_int(*t, "batch_size", "[train]", 16);
    cfg.train.max_seq_len = get_int(*t, "max_seq_len", "[train]", 512);
    if (cfg.train.lora_rank < 1 || cfg.train.epochs_per_stage < 1 || cfg.train.batch_size < 1 ||
        cfg.train.max_seq_len < 1 || !(cfg.train.learning_rate > 0)) {
      throw ConfigError("[train]: hyperparameters must be positive");
    }
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config not found: " + path.string());
  const auto abs = fs::absolute(path).lexically_normal();
  if (abs.extension() == ".json") {
    std::ifstream in(abs, std::ios::binary);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(abs.string() + ": " + e.what());
    }
    // A run.json from an earlier invocation: replay its config block.
    if (!doc.contains("config") || !doc.contains("base_dir")) throw ConfigError(abs.string() + ": not a run.json");
    return parse_run_config(doc["config"], fs::path(doc["base_dir"].get<std::string>()), abs);
  }
  return parse_run_config(toml_file_to_json(abs), abs.parent_path(), abs);
}

}  // namespace ladder::cli
