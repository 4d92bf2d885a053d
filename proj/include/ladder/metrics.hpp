#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ladder {

enum class Metric { Bleu, Chrf, Neural };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// A metric value on its native scale: 0-100 for BLEU and chrF, 0-1 for
/// neural scorers.
struct QualityScore {
  Metric metric = Metric::Bleu;
  double value = 0.0;

  /// Throws InvariantError on NaN or a value outside the metric's scale.
  static QualityScore make(Metric metric, double value);

  static double scale_max(Metric metric) noexcept { return metric == Metric::Neural ? 1.0 : 100.0; }
  double normalized() const noexcept { return value / scale_max(metric); }

  bool operator==(const QualityScore&) const = default;
};

enum class Tokenization {
  Intl13a,       // mteval-v13a rules
  CharacterCjk,  // each CJK character is a token, then 13a rules
};

std::string_view to_string(Tokenization tok);
Tokenization parse_tokenization(std::string_view name);

/// Chinese targets are scored per character; everything else with 13a.
Tokenization tokenization_for_language(std::string_view lang);

std::vector<std::string> tokenize(std::string_view segment, Tokenization tok);

inline constexpr int kBleuOrder = 4;

/// Sufficient statistics for BLEU; they add across segments.
struct BleuStats {
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
  std::array<std::int64_t, kBleuOrder> correct{};
  std::array<std::int64_t, kBleuOrder> total{};

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_statistics(std::string_view hypothesis, std::string_view reference, Tokenization tok);

enum class BleuSmoothing {
  Exp,     // NIST geometric halving, the corpus-level default
  AddOne,  // +1 on n>1 counts, effective order; used per sentence
};

/// BLEU on 0-100 from accumulated statistics.
double bleu_from_stats(const BleuStats& stats, BleuSmoothing smoothing);

QualityScore bleu_corpus(std::span<const std::string> hypotheses, std::span<const std::string> references,
                         Tokenization tok);
QualityScore bleu_sentence(std::string_view hypothesis, std::string_view reference, Tokenization tok);

inline constexpr int kChrfOrder = 6;
inline constexpr double kChrfBeta = 2.0;

/// Per order: hypothesis n-grams, reference n-grams, matches.
struct ChrfStats {
  std::array<std::int64_t, 3 * kChrfOrder> counts{};

  ChrfStats& operator+=(const ChrfStats& other);
};

ChrfStats chrf_statistics(std::string_view hypothesis, std::string_view reference);
double chrf_from_stats(const ChrfStats& stats);

QualityScore chrf_sentence(std::string_view hypothesis, std::string_view reference);
QualityScore chrf_corpus(std::span<const std::string> hypotheses, std::span<const std::string> references);

}  // namespace ladder
