#include <doctest.h>

#include "genret/corpus.hpp"
#include "genret/text.hpp"

using namespace genret;

namespace {

std::string line(const std::string& id, const std::string& passage, const std::string& urls) {
  return R"({"id":")" + id + R"(","title":"T )" + id + R"(","passage":")" + passage + R"(","urls":)" + urls + "}\n";
}

}  // namespace

TEST_CASE("single URL is assigned") {
  Corpus c = ingest_corpus_text(R"({"id":"d1","title":"T","passage":"P","urls":["u1"]})", 0);
  REQUIRE(c.size() == 1);
  CHECK(c.at("d1").assigned_url == "u1");
  // A bare string is accepted for urls.
  Corpus c2 = ingest_corpus_text(R"({"id":"d1","title":"T","passage":"P","urls":"u1"})", 0);
  CHECK(c2.at("d1").assigned_url == "u1");
}

TEST_CASE("multi-URL choice is reproducible per seed") {
  const std::string text = line("d1", "p one", R"(["u1","u2"])") + line("d2", "p two", R"(["u3","u4","u5"])");
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    Corpus a = ingest_corpus_text(text, seed);
    Corpus b = ingest_corpus_text(text, seed);
    CHECK(a.at("d1").assigned_url == b.at("d1").assigned_url);
    CHECK(a.at("d2").assigned_url == b.at("d2").assigned_url);
  }
  // Across many seeds both URLs of d1 get picked.
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) seen.insert(ingest_corpus_text(text, seed).at("d1").assigned_url);
  CHECK(seen == std::set<std::string>{"u1", "u2"});
}

TEST_CASE("ingest errors name the offending line") {
  const std::string dup = line("d1", "a", R"(["u"])") + line("d2", "b", R"(["u"])") + line("d1", "c", R"(["u"])");
  try {
    ingest_corpus_text(dup, 0);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(ingest_corpus_text(line("d1", "  ", R"(["u"])"), 0), ValidationError);
  CHECK_THROWS_AS(ingest_corpus_text(line("d1", "p", R"([""])"), 0), ValidationError);
  CHECK_THROWS_AS(ingest_corpus_text(line("d1", "p", R"([])"), 0), ValidationError);
  CHECK_THROWS_AS(ingest_corpus_text("{not json}\n", 0), ValidationError);
}

TEST_CASE("passage_in_corpus uses normalized exact match") {
  Corpus c = ingest_corpus_text(line("d1", "the quick fox", R"(["u1"])") + line("d2", "lazy dog", R"(["u2"])"), 0);
  CHECK(c.passage_in_corpus("the quick fox") == std::set<std::string>{"d1"});
  CHECK(c.passage_in_corpus("the quick fox  \n") == std::set<std::string>{"d1"});
  CHECK(c.passage_in_corpus("zzz").empty());
  for (const auto& r : c.records()) CHECK(c.passage_in_corpus(r.passage).count(r.id) == 1);
}

TEST_CASE("duplicate passages collapse in the membership index") {
  Corpus c = ingest_corpus_text(line("d1", "same", R"(["u1"])") + line("d2", "same", R"(["u2"])") +
                                    line("d3", "other", R"(["u3"])"),
                                0);
  CHECK(c.membership_index_size() == 2);
  CHECK(c.membership_index_size() <= c.size());
  CHECK(c.passage_in_corpus("same") == std::set<std::string>{"d1", "d2"});
  CHECK(c.ids_for_url("u3") == std::set<std::string>{"d3"});
}

TEST_CASE("corpus JSONL round trip keeps assignments") {
  Corpus c = ingest_corpus_text(line("d1", "a b", R"(["u1","u2"])") + line("d2", "c d", R"(["u3"])"), 5);
  Corpus again = ingest_corpus_text(corpus_to_jsonl(c), 123);
  CHECK(again.at("d1").assigned_url == c.at("d1").assigned_url);
  CHECK(corpus_to_jsonl(again) == corpus_to_jsonl(c));
}

TEST_CASE("split_queries") {
  std::vector<QueryRecord> qs;
  for (int i = 0; i < 10; ++i) qs.push_back({"q" + std::to_string(i), "text", {"d1"}});
  auto [train, dev] = split_queries(qs, 0.2, 7);
  CHECK(train.size() == 8);
  CHECK(dev.size() == 2);
  auto [train2, dev2] = split_queries(qs, 0.2, 7);
  CHECK(dev2.size() == dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) CHECK(dev[i].query_id == dev2[i].query_id);
  std::set<std::string> all;
  for (const auto& q : train) all.insert(q.query_id);
  for (const auto& q : dev) all.insert(q.query_id);
  CHECK(all.size() == 10);
  CHECK_THROWS_AS(split_queries({qs[0]}, 0.5, 0), ValidationError);
  CHECK_THROWS_AS(split_queries(qs, 0.0, 0), ValidationError);
  CHECK_THROWS_AS(split_queries(qs, 1.0, 0), ValidationError);
}

TEST_CASE("queries TSV round trip and validation") {
  const std::string tsv = "q1\twhere is it\td1,d2\nq2\tanother one\td2\n";
  auto qs = parse_queries_tsv(tsv);
  REQUIRE(qs.size() == 2);
  CHECK(qs[0].positive_passage_ids == std::vector<std::string>{"d1", "d2"});
  CHECK(queries_to_tsv(qs) == tsv);
  Corpus c = ingest_corpus_text(line("d1", "a", R"(["u1"])"), 0);
  CHECK_THROWS_AS(check_queries(qs, c), ValidationError);
  CHECK_THROWS_AS(parse_queries_tsv("q1\tonly two\n"), ValidationError);
}
