#include <doctest.h>

#include "genret/dataset.hpp"
#include "genret/text.hpp"

using namespace genret;

namespace {

Corpus make_corpus() {
  std::string long_passage;
  for (int i = 0; i < 200; ++i) long_passage += "word" + std::to_string(i) + " ";
  return Corpus({{"d1", "T", "P", {"https://example.org/doc/t-1"}, "https://example.org/doc/t-1"},
                 {"d2", "Second title", long_passage, {"https://example.org/doc/second-title-2"}, "https://example.org/doc/second-title-2"}});
}

Tokenizer make_tok(const Corpus& c) { return train_tokenizer(c, 500, 0); }

}  // namespace

TEST_CASE("stage-1 target formatting") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  StageSpec spec;
  CHECK(stage1_target_text(c.at("d1"), spec, tok) == "title: T passage: P");
  spec.use_prompts = false;
  CHECK(stage1_target_text(c.at("d1"), spec, tok) == "T P");
  CHECK(format_stage1_target(c.at("d1"), spec, tok).ids.back() == kEosId);
}

TEST_CASE("passage is cut to passage_trunc tokens before formatting") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  StageSpec spec;
  spec.passage_trunc = 32;
  spec.target_max = 64;
  const auto& r = c.at("d2");
  auto ids = tok.encode_ids(r.passage);
  REQUIRE(ids.size() > 100);
  ids.resize(32);
  const std::string expected = "title: " + r.title + " passage: " + tok.decode(ids);
  CHECK(stage1_target_text(r, spec, tok) == expected);
  CHECK(format_stage1_target(r, spec, tok).ids.size() <= 64);
}

TEST_CASE("build_stage1 pairs") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  std::vector<PseudoQuery> qs;
  for (int i = 0; i < 10; ++i) qs.push_back({"query number " + std::to_string(i), i % 2 ? "d1" : "d2", "span_noise"});
  StageSpec spec;
  auto pairs = build_stage1(qs, c, spec, tok);
  REQUIRE(pairs.size() == 10);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].source.ids.size() <= 32);
    CHECK(pairs[i].target.ids.back() == kEosId);
    CHECK(pairs[i].meta.url == c.at(qs[i].passage_id).assigned_url);
    CHECK(pairs[i].meta.source_id == "pq" + std::to_string(i));
  }
  qs.push_back({"dangling", "nope", "span_noise"});
  CHECK_THROWS_AS(build_stage1(qs, c, spec, tok), ValidationError);
}

TEST_CASE("build_stage2 pairs read exactly what stage 1 emits") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  PipelineSpecs specs;
  auto pairs = build_stage2(c, specs, tok);
  REQUIRE(pairs.size() == c.size());
  const auto prompt = tok.encode_ids("title:");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = c.records()[i];
    CHECK(pairs[i].target.ids.size() <= 80);
    CHECK(tok.decode(pairs[i].target) == r.assigned_url);
    CHECK(tok.decode(pairs[i].source) == stage1_target_text(r, specs.passage_gen, tok));
    REQUIRE(pairs[i].source.ids.size() >= prompt.size());
    CHECK(std::equal(prompt.begin(), prompt.end(), pairs[i].source.ids.begin()));
  }
}

TEST_CASE("single-stage pairs map queries to URLs") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  std::vector<PseudoQuery> qs = {{"a query", "d2", "span_noise"}};
  auto pairs = build_single_stage(qs, c, PipelineSpecs{}, tok);
  REQUIRE(pairs.size() == 1);
  CHECK(tok.decode(pairs[0].target) == c.at("d2").assigned_url);
  CHECK(tok.decode(pairs[0].source) == "a query");
}

TEST_CASE("spec validation") {
  StageSpec s;
  s.passage_trunc = 100;
  s.target_max = 64;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.source_max = 1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  PipelineSpecs p;
  p.url_gen.source_max = 16;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  PipelineSpecs q;
  CHECK(PipelineSpecs::from_json(q.to_json()).to_json() == q.to_json());
}

TEST_CASE("dataset files round trip and check the tokenizer hash") {
  Corpus c = make_corpus();
  Tokenizer tok = make_tok(c);
  DatasetFile f{"url_gen", PipelineSpecs{}.to_json(), tok.hash(), build_stage2(c, PipelineSpecs{}, tok)};
  const std::string text = dataset_to_jsonl(f);
  DatasetFile back = parse_dataset(text, tok.hash());
  CHECK(back.kind == "url_gen");
  REQUIRE(back.pairs.size() == f.pairs.size());
  for (std::size_t i = 0; i < f.pairs.size(); ++i) {
    CHECK(back.pairs[i].source.ids == f.pairs[i].source.ids);
    CHECK(back.pairs[i].target.ids == f.pairs[i].target.ids);
    CHECK(back.pairs[i].meta.url == f.pairs[i].meta.url);
  }
  CHECK(dataset_to_jsonl(back) == text);
  CHECK_THROWS_AS(parse_dataset(text, "0000"), ValidationError);
}
