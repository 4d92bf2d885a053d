#include <doctest.h>

#include <set>

#include "ladder/corpus.hpp"
#include "ladder/error.hpp"
#include "temp_dir.hpp"

using namespace ladder;
using ladder::testing::TempDir;
using ladder::testing::write_file;

namespace {

const Direction kZhEn = Direction::from_codes("zh", "en");
const Direction kDeEn = Direction::from_codes("de", "en");

DatasetSplit numbered_split(std::size_t n, const std::string& prefix = "d") {
  DatasetSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    s.pairs.push_back({prefix + ":" + std::to_string(i + 1), "src " + std::to_string(i), "ref " + std::to_string(i), kDeEn});
  }
  return s;
}

}  // namespace

TEST_CASE("direction invariants") {
  CHECK(kZhEn.src_name == "Chinese");
  CHECK(kZhEn.tgt_name == "English");
  CHECK(kZhEn.label() == "zh-en");
  CHECK_THROWS_AS(Direction::from_codes("en", "en"), InvariantError);
  CHECK_THROWS_AS(Direction::make("xx", "en", "", "English"), InvariantError);
  CHECK_THROWS_AS(Direction::from_codes("xx", "en"), InvariantError);
  CHECK(Direction::make("xx", "en", "Klingon", "English").src_name == "Klingon");
}

TEST_CASE("TSV with 15406 rows loads 15406 pairs in file order") {
  TempDir dir;
  std::string body;
  for (int i = 0; i < 15406; ++i) body += "源句 " + std::to_string(i) + "\tsentence " + std::to_string(i) + "\n";
  write_file(dir / "train.tsv", body);
  const auto split = load_parallel_corpus(dir / "train.tsv", CorpusFormat::Tsv, kZhEn);
  REQUIRE(split.size() == 15406);
  CHECK(split.pairs.front().id == "train:1");
  CHECK(split.pairs.back().reference == "sentence 15405");
  CHECK(split.pairs[7].direction == kZhEn);
}

TEST_CASE("corpus loading errors") {
  TempDir dir;
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_parallel_corpus(dir / "nope.tsv", CorpusFormat::Tsv, kDeEn), IoError);
  }
  SUBCASE("empty file") {
    write_file(dir / "empty.tsv", "");
    CHECK_THROWS_AS(load_parallel_corpus(dir / "empty.tsv", CorpusFormat::Tsv, kDeEn), EmptyCorpusError);
  }
  SUBCASE("jsonl line missing reference names the line") {
    write_file(dir / "c.jsonl", R"({"source": "a", "reference": "b"})" "\n" R"({"source": "c"})" "\n");
    try {
      load_parallel_corpus(dir / "c.jsonl", CorpusFormat::Jsonl, kDeEn);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("reference") != std::string::npos);
    }
  }
  SUBCASE("whitespace-only text is rejected") {
    write_file(dir / "c.tsv", "a\tb\n \tc\n");
    try {
      load_parallel_corpus(dir / "c.tsv", CorpusFormat::Tsv, kDeEn);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("wrong column count") {
    write_file(dir / "c.tsv", "a\tb\tc\n");
    CHECK_THROWS_AS(load_parallel_corpus(dir / "c.tsv", CorpusFormat::Tsv, kDeEn), FormatError);
    write_file(dir / "d.tsv", "just one column\n");
    CHECK_THROWS_AS(load_parallel_corpus(dir / "d.tsv", CorpusFormat::Tsv, kDeEn), FormatError);
  }
  SUBCASE("duplicate jsonl ids") {
    write_file(dir / "c.jsonl", R"({"id": "x", "source": "a", "reference": "b"})" "\n"
                                R"({"id": "x", "source": "c", "reference": "d"})" "\n");
    CHECK_THROWS_AS(load_parallel_corpus(dir / "c.jsonl", CorpusFormat::Jsonl, kDeEn), FormatError);
  }
}

TEST_CASE("jsonl and paired-text formats") {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id": "k1", "source": "Guten Tag", "reference": "Good day"})" "\n"
                              R"({"source": "Danke", "reference": "Thanks"})" "\n");
  const auto j = load_parallel_corpus(dir / "c.jsonl", CorpusFormat::Jsonl, kDeEn, {SplitName::Test, "wmt"});
  REQUIRE(j.size() == 2);
  CHECK(j.name == SplitName::Test);
  CHECK(j.pairs[0].id == "k1");
  CHECK(j.pairs[1].id == "wmt:2");

  write_file(dir / "news.de", "Hallo\nWelt\n");
  write_file(dir / "news.en", "Hello\nWorld\n");
  const auto p = load_parallel_corpus(dir / "news", CorpusFormat::PairedText, kDeEn);
  REQUIRE(p.size() == 2);
  CHECK(p.pairs[1].source == "Welt");
  CHECK(p.pairs[1].reference == "World");

  write_file(dir / "short.de", "a\nb\n");
  write_file(dir / "short.en", "a\n");
  CHECK_THROWS_AS(load_parallel_corpus(dir / "short", CorpusFormat::PairedText, kDeEn), FormatError);
}

TEST_CASE("sample_dev_split") {
  const auto dev = numbered_split(1002);
  const auto a = sample_dev_split(dev, 100, 7);
  const auto b = sample_dev_split(dev, 100, 7);
  REQUIRE(a.size() == 100);
  CHECK(a.name == SplitName::Dev);
  std::set<std::string> all;
  for (const auto& p : dev.pairs) all.insert(p.id);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.pairs[i].id == b.pairs[i].id);
    CHECK(all.count(a.pairs[i].id) == 1);
    seen.insert(a.pairs[i].id);
  }
  CHECK(seen.size() == 100);
  CHECK(dev.size() == 1002);
  CHECK(sample_dev_split(dev, 100, 8).pairs[0].id != a.pairs[0].id);

  const auto full = sample_dev_split(dev, dev.size(), 3);
  std::set<std::string> full_ids;
  for (const auto& p : full.pairs) full_ids.insert(p.id);
  CHECK(full_ids == all);
  CHECK(sample_dev_split(dev, 0, 3).empty());
  CHECK_THROWS_AS(sample_dev_split(dev, 1003, 3), InvariantError);
}

TEST_CASE("splits must not share ids") {
  std::vector<DatasetSplit> splits{numbered_split(3, "a"), numbered_split(3, "b")};
  CHECK_NOTHROW(check_disjoint_splits(splits));
  splits.push_back(numbered_split(1, "a"));
  CHECK_THROWS_AS(check_disjoint_splits(splits), ItemsError);
}

TEST_CASE("attach_intermediates") {
  const auto split = numbered_split(3);
  std::map<std::string, std::string> inter{{"d:1", "x"}, {"d:2", "y"}, {"d:3", "ref 2"}};
  const auto t = attach_intermediates(split, inter, "sampler-a");
  REQUIRE(t.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t[i].id == split.pairs[i].id);
    CHECK(!t[i].score);
    CHECK(t[i].sampler_tag == "sampler-a");
  }
  CHECK(t[2].intermediate == t[2].reference);

  inter.erase("d:2");
  try {
    attach_intermediates(split, inter, "s");
    FAIL("expected missing id error");
  } catch (const ItemsError& e) {
    REQUIRE(e.ids().size() == 1);
    CHECK(e.ids()[0] == "d:2");
  }
}

TEST_CASE("triplet JSONL round-trip") {
  TempDir dir;
  std::vector<RefinementTriplet> ts;
  for (int i = 0; i < 100; ++i) {
    RefinementTriplet t;
    t.id = "c:" + std::to_string(i);
    t.source = "源 {" + std::to_string(i) + "}\ttab";
    t.intermediate = "inter \"" + std::to_string(i) + "\"";
    t.reference = "ref\n" + std::to_string(i);
    t.direction = i % 2 ? kZhEn : kDeEn;
    if (i % 3) t.score = i / 100.0 + 0.0021;
    if (i == 5) t.score = 0.8321;
    t.scorer = t.score ? "chrf" : "";
    t.sampler_tag = "m";
    ts.push_back(t);
  }
  write_triplets(ts, dir / "t.jsonl");
  const auto back = read_triplets(dir / "t.jsonl");
  CHECK(back == ts);
  CHECK(*back[5].score == 0.8321);

  CHECK_THROWS_AS(write_triplets(ts, dir / "missing" / "t.jsonl"), IoError);

  ladder::testing::write_file(dir / "dup.jsonl", ladder::testing::read_file(dir / "t.jsonl") +
                                                     ladder::testing::read_file(dir / "t.jsonl"));
  try {
    read_triplets(dir / "dup.jsonl");
    FAIL("expected duplicate id error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 101);
  }
}
