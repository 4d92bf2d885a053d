#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ladder/corpus.hpp"
#include "ladder/metrics.hpp"
#include "ladder/score_cache.hpp"

namespace ladder {

struct ScoreRequest {
  std::string source;
  std::string hypothesis;
  std::optional<std::string> reference;
  std::string tgt_lang;
};

struct ScoreOutcome {
  std::optional<QualityScore> score;
  std::string error;
};

/// Segment-level scorer. Lexical scorers need a reference; the neural one
/// can run reference-free.
class SegmentScorer {
 public:
  virtual ~SegmentScorer() = default;

  virtual Metric metric() const = 0;
  /// Identity recorded in reports, e.g. "chrf" or "neural@http://host/comet".
  virtual std::string label() const = 0;

  /// Throws on failure.
  virtual QualityScore score(const ScoreRequest& request) = 0;

  /// Positionally aligned; failures are reported per item.
  virtual std::vector<ScoreOutcome> score_batch(std::span<const ScoreRequest> requests);
};

class ChrfScorer final : public SegmentScorer {
 public:
  Metric metric() const override { return Metric::Chrf; }
  std::string label() const override { return "chrf"; }
  QualityScore score(const ScoreRequest& request) override;
};

/// Sentence BLEU with tokenization picked from the request's target language.
class BleuScorer final : public SegmentScorer {
 public:
  Metric metric() const override { return Metric::Bleu; }
  std::string label() const override { return "bleu"; }
  QualityScore score(const ScoreRequest& request) override;
};

struct NeuralScorerConfig {
  std::string endpoint;  // POST {endpoint}/score
  std::optional<std::string> api_key;
  int max_in_flight = 4;
  double timeout_seconds = 60.0;
  int retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30000};
  /// Sends "reference": null even when a reference is known (QE mode).
  bool reference_free = false;

  void validate() const;
};

/// Remote COMET-style scorer with a content-hash cache in front.
class NeuralScorer final : public SegmentScorer {
 public:
  NeuralScorer(NeuralScorerConfig cfg, std::shared_ptr<ScoreCache> cache);

  Metric metric() const override { return Metric::Neural; }
  std::string label() const override;
  QualityScore score(const ScoreRequest& request) override;
  std::vector<ScoreOutcome> score_batch(std::span<const ScoreRequest> requests) override;

  const ScoreCache& cache() const noexcept { return *cache_; }

 private:
  class Session;
  QualityScore score_with(Session& session, const ScoreRequest& request);

  NeuralScorerConfig cfg_;
  std::shared_ptr<ScoreCache> cache_;
};

/// One remote scoring call through `cache`. Throws on transport failure
/// after retries and on a score outside [0, 1].
QualityScore remote_score(const NeuralScorerConfig& cfg, ScoreCache& cache, std::string_view source,
                          std::string_view hypothesis, const std::optional<std::string>& reference);

/// Scores each triplet's intermediate against its reference and stores the
/// normalized value. Already-scored triplets are an error unless `rescore`.
std::vector<RefinementTriplet> score_triplets(std::vector<RefinementTriplet> triplets, SegmentScorer& scorer,
                                              bool rescore = false);

struct MetricReport {
  double corpus_bleu = 0.0;
  double corpus_chrf = 0.0;
  std::optional<double> mean_neural;
  std::string neural_label;
  /// Per segment: sentence BLEU, chrF, and neural when configured.
  std::vector<std::vector<QualityScore>> per_segment;
};

MetricReport evaluate(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      std::span<const std::string> sources, std::string_view tgt_lang,
                      SegmentScorer* neural = nullptr);

}  // namespace ladder
