#include <doctest.h>

#include <cmath>
#include <random>

#include "ladder/error.hpp"
#include "ladder/report.hpp"
#include "temp_dir.hpp"

using namespace ladder;

namespace {

RefinementRecord record(const std::string& id, double orig, double refined) {
  RefinementRecord r;
  r.id = id;
  r.direction = Direction::from_codes("zh", "en");
  r.source = "s";
  r.intermediate = "i";
  r.refined = "r";
  r.reference = "g";
  r.intermediate_scores = {QualityScore::make(Metric::Neural, orig)};
  r.refined_scores = {QualityScore::make(Metric::Neural, refined)};
  return r;
}

}  // namespace

TEST_CASE("improvement_stats examples") {
  const std::vector<double> o1{0.70, 0.80};
  const std::vector<double> r1{0.75, 0.85};
  const auto a = improvement_stats(o1, r1);
  CHECK(a.delta_mean == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(a.delta_std == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(a.improved_frac == 1.0);

  const auto b = improvement_stats(o1, o1);
  CHECK(b.delta_mean == 0.0);
  CHECK(b.delta_std == 0.0);
  CHECK(b.unchanged_frac == 1.0);

  const std::vector<double> o3{0.5};
  const std::vector<double> r3{0.4};
  const auto c = improvement_stats(o3, r3);
  CHECK(c.delta_mean == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(c.degraded_frac == 1.0);

  CHECK_THROWS_AS(improvement_stats(o1, r3), InvariantError);
  CHECK_THROWS_AS(improvement_stats(std::vector<double>{}, std::vector<double>{}), InvariantError);
  CHECK_THROWS_AS(improvement_stats(o1, r1, -1.0), InvariantError);
}

TEST_CASE("improvement_stats closed form") {
  // deltas 1, 2, 3, 6: mean 3, population variance (4+1+0+9)/4 = 3.5
  const std::vector<double> o{10, 20, 30, 40};
  const std::vector<double> r{11, 22, 33, 46};
  const auto s = improvement_stats(o, r, 0.0, "bleu");
  CHECK(std::abs(s.delta_mean - 3.0) <= 1e-12);
  CHECK(std::abs(s.delta_std - std::sqrt(3.5)) <= 1e-12);
  CHECK(s.n == 4);
  CHECK(s.metric == "bleu");

  // tie_epsilon turns small moves into "unchanged"
  const std::vector<double> o2{1.0, 1.0, 1.0};
  const std::vector<double> r2{1.05, 0.97, 1.5};
  const auto t = improvement_stats(o2, r2, 0.1);
  CHECK(t.unchanged_frac == doctest::Approx(2.0 / 3));
  CHECK(t.improved_frac == doctest::Approx(1.0 / 3));
  CHECK(t.improved_frac + t.degraded_frac + t.unchanged_frac == doctest::Approx(1.0));
  const auto json = t.to_json();
  CHECK(json["n"] == 3);
  CHECK(json.contains("delta_std"));
}

TEST_CASE("improvement_stats properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 1 + round * 3;
    std::vector<double> o(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = std::round(u(rng) * 64) / 64;
      r[i] = std::round(u(rng) * 64) / 64;
    }
    const auto base = improvement_stats(o, r);
    CHECK(base.improved_frac + base.degraded_frac + base.unchanged_frac == doctest::Approx(1.0).epsilon(1e-12));
    // Shifting both by a dyadic constant keeps every difference exact.
    std::vector<double> o2(o), r2(r);
    for (std::size_t i = 0; i < n; ++i) {
      o2[i] += 0.25;
      r2[i] += 0.25;
    }
    const auto shifted = improvement_stats(o2, r2);
    CHECK(std::abs(shifted.delta_mean - base.delta_mean) <= 1e-12);
    CHECK(std::abs(shifted.delta_std - base.delta_std) <= 1e-12);
    CHECK(shifted.improved_frac == base.improved_frac);
    CHECK(shifted.degraded_frac == base.degraded_frac);

    // Concatenation: size-weighted mean of the parts.
    const std::size_t k = n / 2;
    if (k == 0) continue;
    const auto a = improvement_stats(std::span(o).first(k), std::span(r).first(k));
    const auto b = improvement_stats(std::span(o).subspan(k), std::span(r).subspan(k));
    const double weighted = (a.delta_mean * k + b.delta_mean * (n - k)) / n;
    CHECK(std::abs(weighted - base.delta_mean) <= 1e-12);
  }
}

TEST_CASE("render_table") {
  BucketBreakdown rows{{"BigTranslate-13B", "zh-en", {{"BLEU", 14.32, 22.58}, {"COMET", 74.63, 74.63}}},
                       {"Alpaca-7B", "de-en", {{"BLEU", 30.0, 29.5}, {"COMET", 80.1, 81.0}}}};
  const auto text = render_table(rows, TableFormat::Text);
  CHECK(text.find("+8.26") != std::string::npos);
  CHECK(text.find("+0.00") != std::string::npos);
  CHECK(text.find("-0.50") != std::string::npos);
  CHECK(text.find("Alpaca-7B") < text.find("BigTranslate-13B"));
  const auto md = render_table(rows, TableFormat::Markdown);
  CHECK(md.find("| BigTranslate-13B | zh-en | 14.32 | 22.58 | +8.26 | improved |") != std::string::npos);
  CHECK(md.find("| 74.63 | 74.63 | +0.00 | unchanged |") != std::string::npos);

  const auto csv = render_table(rows, TableFormat::Csv);
  const auto parsed = parse_csv(csv);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0][2] == "BLEU_original");
  CHECK(parsed[2][0] == "BigTranslate-13B");
  CHECK(std::stod(parsed[2][2]) == 14.32);
  CHECK(std::stod(parsed[2][3]) == 22.58);
  CHECK(std::stod(parsed[2][4]) == 22.58 - 14.32);
  CHECK(parsed[2][5] == "improved");
  CHECK(parsed[1][5] == "degraded");
  CHECK(std::stod(parsed[1][6]) == 80.1);

  CHECK_THROWS_AS(render_table({}, TableFormat::Text), InvariantError);
  BucketBreakdown bad{{"a", "x", {{"BLEU", 1, 2}}}, {"b", "y", {{"chrF", 1, 2}}}};
  CHECK_THROWS_AS(render_table(bad, TableFormat::Text), InvariantError);
}

TEST_CASE("signed delta never prints negative zero") {
  BucketBreakdown rows{{"m", "d", {{"BLEU", 0.1 + 0.2, 0.3}}}};
  CHECK(render_table(rows, TableFormat::Markdown).find("+0.00") != std::string::npos);
}

TEST_CASE("scatter export agrees with DeltaStats") {
  std::vector<RefinementRecord> recs;
  const std::vector<double> orig{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.5};
  const std::vector<double> refd{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.7, 0.9, 0.4};
  for (std::size_t i = 0; i < orig.size(); ++i) recs.push_back(record("r" + std::to_string(i), orig[i], refd[i]));
  const auto rows = export_scatter(recs, Metric::Neural);
  REQUIRE(rows.size() == 10);
  std::size_t improved = 0, degraded = 0, unchanged = 0;
  for (const auto& r : rows) {
    improved += r.cls == ChangeClass::Improved;
    degraded += r.cls == ChangeClass::Degraded;
    unchanged += r.cls == ChangeClass::Unchanged;
  }
  CHECK(improved == 7);
  const auto [o, r] = paired_scores(recs, Metric::Neural);
  const auto st = improvement_stats(o, r);
  CHECK(st.improved_frac == improved / 10.0);
  CHECK(st.degraded_frac == degraded / 10.0);
  CHECK(st.unchanged_frac == unchanged / 10.0);

  const auto parsed = parse_csv(scatter_csv(rows));
  REQUIRE(parsed.size() == 11);
  CHECK(parsed[0] == std::vector<std::string>{"id", "original", "refined", "class"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i + 1][0] == rows[i].id);
    CHECK(std::stod(parsed[i + 1][1]) == rows[i].original);
    CHECK(parsed[i + 1][3] == to_string(rows[i].cls));
  }

  ladder::testing::TempDir dir;
  write_scatter_csv(rows, dir / "s.csv");
  CHECK(ladder::testing::read_file(dir / "s.csv") == scatter_csv(rows));

  recs[3].refined_scores.clear();
  try {
    export_scatter(recs, Metric::Neural);
    FAIL("expected error");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("r3") != std::string::npos);
  }
  CHECK_THROWS_AS(export_scatter({}, Metric::Neural), InvariantError);
}

TEST_CASE("csv quoting round-trips") {
  const auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",x,\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(rows[1] == std::vector<std::string>{"multi\nline", "x", ""});
  CHECK(format_exact(0.1) == "0.1");
  CHECK(std::stod(format_exact(1.0 / 3)) == 1.0 / 3);
}
