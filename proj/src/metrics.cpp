#include "ladder/metrics.hpp"

#include <cmath>
#include <unordered_map>

#include "ladder/error.hpp"
#include "ladder/text.hpp"

namespace ladder {
namespace {

// Code point ranges the community Chinese tokenizer splits into single
// characters. Two entries look odd on purpose: the reference tables spell
// them as 5-digit escapes inside 4-digit literals, which compare as
// U+2001..U+2A6D and U+2F81..U+2FA1. Scores only match if we do the same.
constexpr std::array<std::pair<char32_t, char32_t>, 22> kCjkRanges{{
    {0x3400, 0x4DB5}, {0x4E00, 0x9FA5}, {0x9FA6, 0x9FBB}, {0xF900, 0xFA2D}, {0xFA30, 0xFA6A},
    {0xFA70, 0xFAD9}, {0x2001, 0x2A6D}, {0x2F81, 0x2FA1}, {0xFF00, 0xFFEF}, {0x2E80, 0x2EFF},
    {0x3000, 0x303F}, {0x31C0, 0x31EF}, {0x2F00, 0x2FDF}, {0x2FF0, 0x2FFF}, {0x3100, 0x312F},
    {0x31A0, 0x31BF}, {0xFE10, 0xFE1F}, {0xFE30, 0xFE4F}, {0x2600, 0x26FF}, {0x2700, 0x27BF},
    {0x3200, 0x32FF}, {0x3300, 0x33FF},
}};

bool is_cjk(char32_t cp) {
  for (const auto& [lo, hi] : kCjkRanges) {
    if (cp >= lo && cp <= hi) return true;
  }
  return false;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// ASCII symbols split off as their own tokens: { | } ~ [ \ ] ^ _ ` space ! " # $ % & ( ) * + : ; < = > ? @ /
bool is_split_symbol(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x7B && u <= 0x7E) || (u >= 0x5B && u <= 0x60) || (u >= 0x20 && u <= 0x26) ||
         (u >= 0x28 && u <= 0x2B) || (u >= 0x3A && u <= 0x40) || u == 0x2F;
}

bool is_period_or_comma(char c) { return c == '.' || c == ','; }

// The four regex passes of the 13a post-tokenizer, each reproducing a
// left-to-right non-overlapping substitution. Working on UTF-8 bytes is
// equivalent because every pattern anchors on ASCII.
std::string post_tokenize(std::string_view line) {
  std::string a;
  a.reserve(line.size() * 2);
  for (char c : line) {
    if (is_split_symbol(c)) {
      a.push_back(' ');
      a.push_back(c);
      a.push_back(' ');
    } else {
      a.push_back(c);
    }
  }

  // period/comma unless preceded by a digit: ([^0-9])([\.,]) -> "\1 \2 "
  std::string b;
  b.reserve(a.size() * 2);
  for (std::size_t i = 0; i < a.size();) {
    if (i + 1 < a.size() && !is_digit(a[i]) && is_period_or_comma(a[i + 1])) {
      b.push_back(a[i]);
      b.push_back(' ');
      b.push_back(a[i + 1]);
      b.push_back(' ');
      i += 2;
    } else {
      b.push_back(a[i++]);
    }
  }

  // period/comma unless followed by a digit: ([\.,])([^0-9]) -> " \1 \2"
  std::string c;
  c.reserve(b.size() * 2);
  for (std::size_t i = 0; i < b.size();) {
    if (i + 1 < b.size() && is_period_or_comma(b[i]) && !is_digit(b[i + 1])) {
      c.push_back(' ');
      c.push_back(b[i]);
      c.push_back(' ');
      c.push_back(b[i + 1]);
      i += 2;
    } else {
      c.push_back(b[i++]);
    }
  }

  // dash preceded by a digit: ([0-9])(-) -> "\1 \2 "
  std::string d;
  d.reserve(c.size() * 2);
  for (std::size_t i = 0; i < c.size();) {
    if (i + 1 < c.size() && is_digit(c[i]) && c[i + 1] == '-') {
      d.push_back(c[i]);
      d.push_back(' ');
      d.push_back('-');
      d.push_back(' ');
      i += 2;
    } else {
      d.push_back(c[i++]);
    }
  }
  return d;
}

std::string tokenize_13a(std::string line) {
  line = text::replace_all(std::move(line), "<skipped>", "");
  line = text::replace_all(std::move(line), "-\n", "");
  line = text::replace_all(std::move(line), "\n", " ");
  if (line.find('&') != std::string::npos) {
    line = text::replace_all(std::move(line), "&quot;", "\"");
    line = text::replace_all(std::move(line), "&amp;", "&");
    line = text::replace_all(std::move(line), "&lt;", "<");
    line = text::replace_all(std::move(line), "&gt;", ">");
  }
  return post_tokenize(" " + line + " ");
}

std::string tokenize_zh(std::string_view raw) {
  const auto cps = text::decode_utf8(text::trim_unicode(raw));
  std::string spaced;
  spaced.reserve(cps.size() * 4);
  for (char32_t cp : cps) {
    if (is_cjk(cp)) {
      spaced.push_back(' ');
      text::append_utf8(spaced, cp);
      spaced.push_back(' ');
    } else {
      text::append_utf8(spaced, cp);
    }
  }
  return post_tokenize(spaced);
}

// Hash over a token window, keyed by joined text.
using NgramCounts = std::unordered_map<std::string, std::int64_t>;

std::array<NgramCounts, kBleuOrder> word_ngrams(const std::vector<std::string>& tokens) {
  std::array<NgramCounts, kBleuOrder> out;
  for (int n = 1; n <= kBleuOrder; ++n) {
    if (tokens.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string key = tokens[i];
      for (int k = 1; k < n; ++k) {
        key.push_back('\x01');
        key += tokens[i + k];
      }
      ++out[n - 1][key];
    }
  }
  return out;
}

void check_aligned(std::size_t hyps, std::size_t refs) {
  if (hyps != refs) {
    throw InvariantError("hypothesis/reference count mismatch: " + std::to_string(hyps) + " vs " +
                         std::to_string(refs));
  }
  if (hyps == 0) throw InvariantError("empty corpus");
}

using CharCounts = std::unordered_map<std::u32string, std::int64_t>;

std::array<CharCounts, kChrfOrder> char_ngrams(std::string_view segment) {
  std::u32string joined;
  for (const auto& w : text::split_whitespace(text::decode_utf8(segment))) joined += w;
  std::array<CharCounts, kChrfOrder> out;
  for (int n = 1; n <= kChrfOrder; ++n) {
    if (joined.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + n <= joined.size(); ++i) ++out[n - 1][joined.substr(i, n)];
  }
  return out;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Bleu: return "bleu";
    case Metric::Chrf: return "chrf";
    case Metric::Neural: return "neural";
  }
  return "bleu";
}

Metric parse_metric(std::string_view name) {
  if (name == "bleu") return Metric::Bleu;
  if (name == "chrf") return Metric::Chrf;
  if (name == "neural" || name == "comet") return Metric::Neural;
  throw InvariantError("unknown metric '" + std::string(name) + "'");
}

QualityScore QualityScore::make(Metric metric, double value) {
  if (std::isnan(value)) throw InvariantError(std::string(to_string(metric)) + " score is NaN");
  if (value < 0.0 || value > scale_max(metric)) {
    throw InvariantError(std::string(to_string(metric)) + " score " + std::to_string(value) + " outside [0, " +
                         std::to_string(scale_max(metric)) + "]");
  }
  return QualityScore{metric, value};
}

std::string_view to_string(Tokenization tok) {
  return tok == Tokenization::Intl13a ? "13a" : "zh";
}

Tokenization parse_tokenization(std::string_view name) {
  if (name == "13a" || name == "intl-13a" || name == "intl") return Tokenization::Intl13a;
  if (name == "zh" || name == "character-cjk" || name == "char") return Tokenization::CharacterCjk;
  throw InvariantError("unknown tokenization '" + std::string(name) + "'");
}

Tokenization tokenization_for_language(std::string_view lang) {
  return lang == "zh" ? Tokenization::CharacterCjk : Tokenization::Intl13a;
}

std::vector<std::string> tokenize(std::string_view segment, Tokenization tok) {
  const auto line = text::rtrim_unicode(segment);
  return text::split_whitespace(tok == Tokenization::CharacterCjk ? tokenize_zh(line) : tokenize_13a(line));
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  for (int n = 0; n < kBleuOrder; ++n) {
    correct[n] += other.correct[n];
    total[n] += other.total[n];
  }
  return *this;
}

BleuStats bleu_statistics(std::string_view hypothesis, std::string_view reference, Tokenization tok) {
  const auto hyp = tokenize(hypothesis, tok);
  const auto ref = tokenize(reference, tok);
  const auto hyp_ngrams = word_ngrams(hyp);
  const auto ref_ngrams = word_ngrams(ref);
  BleuStats stats;
  stats.hyp_len = static_cast<std::int64_t>(hyp.size());
  stats.ref_len = static_cast<std::int64_t>(ref.size());
  for (int n = 0; n < kBleuOrder; ++n) {
    for (const auto& [gram, count] : hyp_ngrams[n]) {
      stats.total[n] += count;
      if (auto it = ref_ngrams[n].find(gram); it != ref_ngrams[n].end()) {
        stats.correct[n] += std::min(count, it->second);
      }
    }
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats, BleuSmoothing smoothing) {
  const double sys_len = static_cast<double>(stats.hyp_len);
  const double ref_len = static_cast<double>(stats.ref_len);
  double bp = 1.0;
  if (sys_len < ref_len) bp = sys_len > 0 ? std::exp(1.0 - ref_len / sys_len) : 0.0;

  bool any_match = false;
  for (auto c : stats.correct) any_match = any_match || c != 0;
  if (!any_match) return 0.0;

  // log(0) is pinned to a huge negative constant, as the reference does.
  auto safe_log = [](double p) { return p == 0.0 ? -9999999999.0 : std::log(p); };

  std::array<double, kBleuOrder> precisions{};
  double smooth_mteval = 1.0;
  int eff_order = kBleuOrder;
  for (int n = 1; n <= kBleuOrder; ++n) {
    double correct = static_cast<double>(stats.correct[n - 1]);
    double total = static_cast<double>(stats.total[n - 1]);
    if (smoothing == BleuSmoothing::AddOne && n > 1) {
      correct += 1.0;
      total += 1.0;
    }
    if (total == 0.0) break;
    if (smoothing == BleuSmoothing::AddOne) eff_order = n;
    if (correct == 0.0) {
      if (smoothing == BleuSmoothing::Exp) {
        smooth_mteval *= 2.0;
        precisions[n - 1] = 100.0 / (smooth_mteval * total);
      }
    } else {
      precisions[n - 1] = 100.0 * correct / total;
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < eff_order; ++n) log_sum += safe_log(precisions[n]);
  return bp * std::exp(log_sum / eff_order);
}

QualityScore bleu_corpus(std::span<const std::string> hypotheses, std::span<const std::string> references,
                         Tokenization tok) {
  check_aligned(hypotheses.size(), references.size());
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_statistics(hypotheses[i], references[i], tok);
  return QualityScore::make(Metric::Bleu, std::clamp(bleu_from_stats(total, BleuSmoothing::Exp), 0.0, 100.0));
}

QualityScore bleu_sentence(std::string_view hypothesis, std::string_view reference, Tokenization tok) {
  const auto stats = bleu_statistics(hypothesis, reference, tok);
  return QualityScore::make(Metric::Bleu, std::clamp(bleu_from_stats(stats, BleuSmoothing::AddOne), 0.0, 100.0));
}

ChrfStats& ChrfStats::operator+=(const ChrfStats& other) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ChrfStats chrf_statistics(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = char_ngrams(hypothesis);
  const auto ref = char_ngrams(reference);
  ChrfStats stats;
  for (int n = 0; n < kChrfOrder; ++n) {
    std::int64_t hyp_count = 0;
    std::int64_t match = 0;
    for (const auto& [gram, count] : hyp[n]) {
      hyp_count += count;
      if (auto it = ref[n].find(gram); it != ref[n].end()) match += std::min(count, it->second);
    }
    std::int64_t ref_count = 0;
    for (const auto& [gram, count] : ref[n]) ref_count += count;
    // Hypothesis n-grams only count where the reference has any of that order.
    stats.counts[3 * n] = ref[n].empty() ? 0 : hyp_count;
    stats.counts[3 * n + 1] = ref_count;
    stats.counts[3 * n + 2] = match;
  }
  return stats;
}

double chrf_from_stats(const ChrfStats& stats) {
  const double factor = kChrfBeta * kChrfBeta;
  double avg_prec = 0.0;
  double avg_rec = 0.0;
  int effective_order = 0;
  for (int n = 0; n < kChrfOrder; ++n) {
    const auto n_hyp = stats.counts[3 * n];
    const auto n_ref = stats.counts[3 * n + 1];
    const auto n_match = stats.counts[3 * n + 2];
    if (n_hyp > 0 && n_ref > 0) {
      avg_prec += static_cast<double>(n_match) / static_cast<double>(n_hyp);
      avg_rec += static_cast<double>(n_match) / static_cast<double>(n_ref);
      ++effective_order;
    }
  }
  if (effective_order == 0) return 0.0;
  avg_prec /= effective_order;
  avg_rec /= effective_order;
  if (avg_prec + avg_rec == 0.0) return 0.0;
  return 100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
}

QualityScore chrf_sentence(std::string_view hypothesis, std::string_view reference) {
  if (text::is_blank(reference)) throw InvariantError("chrf: empty reference");
  return QualityScore::make(Metric::Chrf, std::clamp(chrf_from_stats(chrf_statistics(hypothesis, reference)), 0.0, 100.0));
}

QualityScore chrf_corpus(std::span<const std::string> hypotheses, std::span<const std::string> references) {
  check_aligned(hypotheses.size(), references.size());
  ChrfStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += chrf_statistics(hypotheses[i], references[i]);
  return QualityScore::make(Metric::Chrf, std::clamp(chrf_from_stats(total), 0.0, 100.0));
}

}  // namespace ladder
