#include <doctest.h>

#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <cmath>

#include <json.hpp>

#include "ladder/error.hpp"
#include "ladder/metrics.hpp"

using namespace ladder;
using nlohmann::json;

namespace {

struct Fixture {
  std::vector<json> pairs;
  json oracle;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    std::ifstream pairs(LADDER_FIXTURES "/metric_pairs.jsonl");
    std::string line;
    while (std::getline(pairs, line)) {
      if (!line.empty()) out.pairs.push_back(json::parse(line));
    }
    std::ifstream oracle(LADDER_FIXTURES "/metric_oracle.json");
    out.oracle = json::parse(oracle);
    return out;
  }();
  return f;
}

// Tighter than the 0.01 acceptance bar: the implementations should agree
// up to floating-point summation order.
constexpr double kTol = 1e-9;

}  // namespace

TEST_CASE("fixture is the pinned 50-pair set") {
  REQUIRE(fixture().pairs.size() == 50);
  REQUIRE(fixture().oracle["segments"].size() == 50);
}

TEST_CASE("tokenizers match the oracle token for token") {
  const auto& f = fixture();
  for (std::size_t i = 0; i < f.pairs.size(); ++i) {
    const auto& seg = f.oracle["segments"][i];
    const auto tok = parse_tokenization(seg["tokenize"].get<std::string>());
    CAPTURE(i);
    CHECK(tokenize(f.pairs[i]["hyp"].get<std::string>(), tok) == seg["tokens"].get<std::vector<std::string>>());
  }
}

TEST_CASE("sentence BLEU and chrF match the oracle") {
  const auto& f = fixture();
  for (std::size_t i = 0; i < f.pairs.size(); ++i) {
    const auto& seg = f.oracle["segments"][i];
    const auto hyp = f.pairs[i]["hyp"].get<std::string>();
    const auto ref = f.pairs[i]["ref"].get<std::string>();
    const auto tok = tokenization_for_language(f.pairs[i]["lang"].get<std::string>());
    CAPTURE(i);
    CHECK(bleu_sentence(hyp, ref, tok).value == doctest::Approx(seg["sentence_bleu"].get<double>()).epsilon(kTol));
    CHECK(chrf_sentence(hyp, ref).value == doctest::Approx(seg["sentence_chrf"].get<double>()).epsilon(kTol));
  }
}

TEST_CASE("corpus BLEU and chrF match the oracle per language") {
  const auto& f = fixture();
  for (const auto& [lang, expected] : f.oracle["corpora"].items()) {
    std::vector<std::string> hyps;
    std::vector<std::string> refs;
    for (const auto& p : f.pairs) {
      if (p["lang"] == lang) {
        hyps.push_back(p["hyp"]);
        refs.push_back(p["ref"]);
      }
    }
    CAPTURE(lang);
    REQUIRE(hyps.size() == expected["n"].get<std::size_t>());
    const auto bleu = bleu_corpus(hyps, refs, tokenization_for_language(lang));
    const auto chrf = chrf_corpus(hyps, refs);
    CHECK(bleu.metric == Metric::Bleu);
    CHECK(bleu.value == doctest::Approx(expected["bleu"].get<double>()).epsilon(kTol));
    CHECK(chrf.value == doctest::Approx(expected["chrf"].get<double>()).epsilon(kTol));
  }
}

TEST_CASE("metric extremes") {
  const std::vector<std::string> hyps{"a b c d e", "the cat sat on the mat"};
  CHECK(bleu_corpus(hyps, hyps, Tokenization::Intl13a).value == 100.0);
  CHECK(chrf_corpus(hyps, hyps).value == 100.0);
  const std::vector<std::string> other{"x y z w v", "no overlap anywhere here"};
  CHECK(bleu_corpus(hyps, other, Tokenization::Intl13a).value == 0.0);

  CHECK(bleu_sentence("identical sentence here .", "identical sentence here .", Tokenization::Intl13a).value == 100.0);
  CHECK(bleu_sentence("", "a reference", Tokenization::Intl13a).value == 0.0);
  CHECK(chrf_sentence("abc def", "abc def").value == 100.0);
  CHECK(chrf_sentence("абв где", "xyz uvw").value == 0.0);
  CHECK(bleu_sentence("猫坐在垫子上。", "猫坐在垫子上。", Tokenization::CharacterCjk).value == 100.0);
}

TEST_CASE("metric preconditions") {
  const std::vector<std::string> one{"a"};
  const std::vector<std::string> two{"a", "b"};
  const std::vector<std::string> none;
  CHECK_THROWS_AS(bleu_corpus(one, two, Tokenization::Intl13a), InvariantError);
  CHECK_THROWS_AS(bleu_corpus(none, none, Tokenization::Intl13a), InvariantError);
  CHECK_THROWS_AS(chrf_corpus(one, two), InvariantError);
  CHECK_THROWS_AS(QualityScore::make(Metric::Neural, 1.7), InvariantError);
  CHECK_THROWS_AS(QualityScore::make(Metric::Bleu, std::nan("")), InvariantError);
  CHECK_THROWS_AS(QualityScore::make(Metric::Chrf, -1), InvariantError);
  CHECK(QualityScore::make(Metric::Neural, 0.7463).normalized() == 0.7463);
  CHECK(QualityScore::make(Metric::Bleu, 50).normalized() == 0.5);
  CHECK(parse_metric("comet") == Metric::Neural);
  CHECK(tokenization_for_language("zh") == Tokenization::CharacterCjk);
  CHECK(tokenization_for_language("de") == Tokenization::Intl13a);
}

TEST_CASE("corpus BLEU is invariant under reordering aligned pairs") {
  const auto& f = fixture();
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  for (const auto& p : f.pairs) {
    if (p["lang"] == "en") {
      hyps.push_back(p["hyp"]);
      refs.push_back(p["ref"]);
    }
  }
  const double base = bleu_corpus(hyps, refs, Tokenization::Intl13a).value;
  std::mt19937 rng(5);
  for (int round = 0; round < 10; ++round) {
    std::vector<std::size_t> order(hyps.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::string> h;
    std::vector<std::string> r;
    for (auto i : order) {
      h.push_back(hyps[i]);
      r.push_back(refs[i]);
    }
    CHECK(bleu_corpus(h, r, Tokenization::Intl13a).value == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("appending reference tokens never lowers the brevity penalty") {
  const std::string ref = "one two three four five six seven eight nine ten";
  const auto words = [&] {
    std::vector<std::string> w;
    std::istringstream ss(ref);
    for (std::string x; ss >> x;) w.push_back(x);
    return w;
  }();
  double prev_bp = 0;
  std::string hyp;
  for (const auto& w : words) {
    hyp += (hyp.empty() ? "" : " ") + w;
    const auto s = bleu_statistics(hyp, ref, Tokenization::Intl13a);
    const double bp = s.hyp_len >= s.ref_len ? 1.0 : std::exp(1.0 - double(s.ref_len) / double(s.hyp_len));
    CHECK(bp >= prev_bp);
    prev_bp = bp;
  }
  CHECK(prev_bp == 1.0);
}

TEST_CASE("13a tokenizer details") {
  CHECK(tokenize("a &amp; b &lt;c&gt;", Tokenization::Intl13a) == std::vector<std::string>{"a", "&", "b", "<", "c", ">"});
  CHECK(tokenize("end-\nline", Tokenization::Intl13a) == std::vector<std::string>{"endline"});
  CHECK(tokenize("3.5 km, 1,000 people.", Tokenization::Intl13a) ==
        std::vector<std::string>{"3.5", "km", ",", "1,000", "people", "."});
  CHECK(tokenize("北京 ok", Tokenization::CharacterCjk) == std::vector<std::string>{"北", "京", "ok"});
}
