#include "ladder/scoring.hpp"

#include <cmath>

#include <json.hpp>

#include "ladder/error.hpp"
#include "ladder/llm_client.hpp"
#include "ladder/text.hpp"

namespace ladder {

using nlohmann::json;

namespace {

const std::string& require_reference(const ScoreRequest& request, std::string_view metric) {
  if (!request.reference || text::is_blank(*request.reference)) {
    throw InvariantError(std::string(metric) + " needs a reference");
  }
  return *request.reference;
}

RetrySettings retry_settings(const NeuralScorerConfig& cfg) {
  return RetrySettings{cfg.retries, cfg.timeout_seconds, cfg.backoff_base, cfg.backoff_cap};
}

std::optional<std::string> bearer(const NeuralScorerConfig& cfg) {
  if (cfg.api_key && !cfg.api_key->empty()) return cfg.api_key;
  if (const char* env = std::getenv("LADDER_API_KEY"); env && *env) return std::string(env);
  return std::nullopt;
}

std::string cache_metric(const NeuralScorerConfig& cfg) { return "neural@" + cfg.endpoint; }

QualityScore post_score(JsonPoster& poster, ScoreCache& cache, const NeuralScorerConfig& cfg,
                        std::string_view source, std::string_view hypothesis,
                        const std::optional<std::string>& reference_in) {
  if (text::is_blank(hypothesis)) throw InvariantError("remote_score: empty hypothesis");
  const std::optional<std::string> reference = cfg.reference_free ? std::nullopt : reference_in;
  const auto key = ScoreCache::key(cache_metric(cfg), source, hypothesis, reference);
  if (auto hit = cache.lookup(key)) return QualityScore{Metric::Neural, *hit};

  const json body{{"source", std::string(source)},
                  {"hypothesis", std::string(hypothesis)},
                  {"reference", reference ? json(*reference) : json(nullptr)}};
  auto reply = poster.post("/score", body);
  if (reply.error) throw Error("scorer " + cfg.endpoint + ": " + reply.error->describe());
  const auto& obj = *reply.body;
  if (!obj.is_object() || !obj.contains("score") || !obj["score"].is_number()) {
    throw Error("scorer " + cfg.endpoint + ": response lacks a numeric \"score\"");
  }
  const double value = obj["score"].get<double>();
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvariantError("scorer " + cfg.endpoint + ": score " + obj["score"].dump() + " outside [0, 1]");
  }
  cache.insert(key, cache_metric(cfg), value);
  return QualityScore{Metric::Neural, value};
}

}  // namespace

std::vector<ScoreOutcome> SegmentScorer::score_batch(std::span<const ScoreRequest> requests) {
  std::vector<ScoreOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].score = score(requests[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

QualityScore ChrfScorer::score(const ScoreRequest& request) {
  return chrf_sentence(request.hypothesis, require_reference(request, "chrf"));
}

QualityScore BleuScorer::score(const ScoreRequest& request) {
  return bleu_sentence(request.hypothesis, require_reference(request, "bleu"),
                       tokenization_for_language(request.tgt_lang));
}

void NeuralScorerConfig::validate() const {
  if (endpoint.empty()) throw InvariantError("neural scorer: endpoint is required");
  if (max_in_flight < 1) throw InvariantError("neural scorer: max_in_flight must be >= 1");
  if (!(timeout_seconds > 0.0)) throw InvariantError("neural scorer: timeout must be > 0");
  if (retries < 0) throw InvariantError("neural scorer: retries must be >= 0");
}

class NeuralScorer::Session {
 public:
  explicit Session(const NeuralScorerConfig& cfg) : poster(cfg.endpoint, retry_settings(cfg), bearer(cfg)) {}
  JsonPoster poster;
};

NeuralScorer::NeuralScorer(NeuralScorerConfig cfg, std::shared_ptr<ScoreCache> cache)
    : cfg_(std::move(cfg)), cache_(cache ? std::move(cache) : std::make_shared<ScoreCache>()) {
  cfg_.validate();
}

std::string NeuralScorer::label() const {
  return std::string("neural") + (cfg_.reference_free ? "-qe" : "") + "@" + cfg_.endpoint;
}

QualityScore NeuralScorer::score_with(Session& session, const ScoreRequest& request) {
  return post_score(session.poster, *cache_, cfg_, request.source, request.hypothesis, request.reference);
}

QualityScore NeuralScorer::score(const ScoreRequest& request) {
  Session session(cfg_);
  return score_with(session, request);
}

std::vector<ScoreOutcome> NeuralScorer::score_batch(std::span<const ScoreRequest> requests) {
  std::vector<ScoreOutcome> out(requests.size());
  run_bounded(
      requests.size(), cfg_.max_in_flight, [this] { return Session(cfg_); },
      [&](Session& session, std::size_t i) {
        try {
          out[i].score = score_with(session, requests[i]);
        } catch (const std::exception& e) {
          out[i].error = e.what();
        }
      });
  return out;
}

QualityScore remote_score(const NeuralScorerConfig& cfg, ScoreCache& cache, std::string_view source,
                          std::string_view hypothesis, const std::optional<std::string>& reference) {
  cfg.validate();
  JsonPoster poster(cfg.endpoint, retry_settings(cfg), bearer(cfg));
  return post_score(poster, cache, cfg, source, hypothesis, reference);
}

std::vector<RefinementTriplet> score_triplets(std::vector<RefinementTriplet> triplets, SegmentScorer& scorer,
                                              bool rescore) {
  if (!rescore) {
    std::vector<std::string> scored;
    for (const auto& t : triplets) {
      if (t.score) scored.push_back(t.id);
    }
    if (!scored.empty()) throw ItemsError("triplets already scored (pass rescore to overwrite)", std::move(scored));
  }
  std::vector<ScoreRequest> requests;
  requests.reserve(triplets.size());
  for (const auto& t : triplets) {
    requests.push_back(ScoreRequest{t.source, t.intermediate, t.reference, t.direction.tgt_lang});
  }
  const auto outcomes = scorer.score_batch(requests);
  std::vector<std::string> failed;
  std::string first_error;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (!outcomes[i].score) {
      failed.push_back(triplets[i].id);
      if (first_error.empty()) first_error = outcomes[i].error;
      continue;
    }
    triplets[i].score = outcomes[i].score->normalized();
    triplets[i].scorer = scorer.label();
  }
  if (!failed.empty()) throw ItemsError("scoring failed (" + first_error + ")", std::move(failed));
  return triplets;
}

MetricReport evaluate(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      std::span<const std::string> sources, std::string_view tgt_lang, SegmentScorer* neural) {
  if (hypotheses.size() != references.size()) {
    throw InvariantError("hypothesis/reference count mismatch: " + std::to_string(hypotheses.size()) + " vs " +
                         std::to_string(references.size()));
  }
  if (hypotheses.empty()) throw InvariantError("empty corpus");
  if (neural && sources.size() != hypotheses.size()) {
    throw InvariantError("neural scoring needs one source per hypothesis");
  }
  const auto tok = tokenization_for_language(tgt_lang);
  MetricReport report;
  report.corpus_bleu = bleu_corpus(hypotheses, references, tok).value;
  report.corpus_chrf = chrf_corpus(hypotheses, references).value;
  report.per_segment.resize(hypotheses.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    report.per_segment[i].push_back(bleu_sentence(hypotheses[i], references[i], tok));
    report.per_segment[i].push_back(chrf_sentence(hypotheses[i], references[i]));
  }
  if (neural) {
    std::vector<ScoreRequest> requests;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      requests.push_back(ScoreRequest{sources[i], hypotheses[i], references[i], std::string(tgt_lang)});
    }
    const auto outcomes = neural->score_batch(requests);
    double sum = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].score) throw Error("neural scoring failed for segment " + std::to_string(i) + ": " + outcomes[i].error);
      report.per_segment[i].push_back(*outcomes[i].score);
      sum += outcomes[i].score->value;
    }
    report.mean_neural = sum / static_cast<double>(outcomes.size());
    report.neural_label = neural->label();
  }
  return report;
}

}  // namespace ladder
