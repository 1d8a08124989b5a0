#include <doctest.h>

#include "genret/dataset.hpp"
#include "genret/retrieve.hpp"
#include "genret/text.hpp"

using namespace genret;

namespace {

const Tokenizer& tok() {
  static const Tokenizer t = [] {
    std::vector<std::string> texts = {"hello world", "https://example.org/a"};
    return Tokenizer::train(texts, 270);
  }();
  return t;
}

// Scorer that emits a fixed id sequence, then EOS.
NextTokenScorer script(std::vector<int> ids) {
  return [ids](std::span<const int> prefix) {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(tok().vocab_size());
    if (prefix.size() < ids.size()) {
      v[ids[prefix.size()]] = 5.0F;
    } else {
      v[kEosId] = 5.0F;
    }
    return v;
  };
}

}  // namespace

TEST_CASE("greedy decoding follows the arg max and stops at EOS") {
  const std::vector<int> hi = tok().encode_ids("hi");
  std::vector<int> ids = hi;
  Decoded d = greedy_decode(script(ids), 20, tok());
  CHECK(d.text == "hi");
  CHECK(d.ids.back() == kEosId);
  CHECK(d.ids.size() == ids.size() + 1);
  CHECK(d.logprobs.size() == d.ids.size());
  for (double lp : d.logprobs) CHECK(lp < 0.0);

  Decoded capped = greedy_decode(script(tok().encode_ids("hello world")), 3, tok());
  CHECK(capped.ids.size() == 3);
  CHECK(capped.ids.back() != kEosId);
}

TEST_CASE("specials are never emitted and ties go to the lowest id") {
  NextTokenScorer s = [](std::span<const int> prefix) {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(tok().vocab_size());
    v[kPadId] = 9.0F;
    v[kBosId] = 9.0F;
    v[kUnkId] = 9.0F;
    if (prefix.empty()) {
      v[100] = 3.0F;
      v[50] = 3.0F;
      v[kEosId] = 3.0F;  // equal to the best content token: not taken
    } else {
      v[kEosId] = 3.5F;
      v[60] = 3.0F;
    }
    return v;
  };
  Decoded d = greedy_decode(s, 10, tok());
  REQUIRE(d.ids.size() == 2);
  CHECK(d.ids[0] == 50);
  CHECK(d.ids[1] == kEosId);
}

TEST_CASE("scorer output must cover the vocabulary") {
  NextTokenScorer bad = [](std::span<const int>) { return Eigen::VectorXf::Zero(5); };
  CHECK_THROWS_AS(greedy_decode(bad, 4, tok()), ValidationError);
}

TEST_CASE("two-stage retrieval chains the stages") {
  PipelineSpecs specs;
  ModelConfig c1 = ModelConfig::for_size(SizeTag::tiny, tok().vocab_size(), 32, 64);
  ModelConfig c2 = ModelConfig::for_size(SizeTag::tiny, tok().vocab_size(), 64, 80);
  Seq2SeqModel s1 = init_model(c1, 1), s2 = init_model(c2, 2);
  s1.tokenizer_hash = s2.tokenizer_hash = tok().hash();
  RetrievalResult r = two_stage_retrieve(s1, s2, "q1", "hello", specs, tok());
  REQUIRE(r.intermediate_passage.has_value());
  // The URL is what stage 2 decodes from the stage-1 text.
  Decoded p = greedy_decode(s1, tok().encode(normalize_text("hello"), Role::source, 32), 64, tok());
  CHECK(*r.intermediate_passage == p.text);
  TokenSequence src = tok().encode(p.text, Role::source, 64);
  if (src.ids.empty()) src.ids.push_back(kByteBase + ' ');
  CHECK(r.predicted_url == greedy_decode(s2, src, 80, tok()).text);
  CHECK(r.per_step_logprobs.size() >= 1);
  CHECK(r.logprob_sum() <= 0.0);

  Seq2SeqModel other = init_model(c2, 2);
  other.tokenizer_hash = "different";
  CHECK_THROWS_AS(two_stage_retrieve(s1, other, "q1", "hello", specs, tok()), ValidationError);

  RetrievalResult single = single_stage_retrieve(s1, "q2", "hello", specs, tok());
  CHECK(single.method == Method::single_stage);
  CHECK_FALSE(single.intermediate_passage.has_value());
}

TEST_CASE("parallel retrieval keeps index order") {
  auto fn = [](std::size_t i) {
    RetrievalResult r;
    r.query_id = "q" + std::to_string(i);
    return r;
  };
  auto one = parallel_retrieve(37, 1, fn);
  auto four = parallel_retrieve(37, 4, fn);
  REQUIRE(four.size() == 37);
  for (std::size_t i = 0; i < 37; ++i) CHECK(four[i].query_id == one[i].query_id);
}

TEST_CASE("results JSONL round trip") {
  RetrievalResult a;
  a.query_id = "q1";
  a.predicted_url = "https://x.org/a";
  a.intermediate_passage = "title: A passage: b";
  a.per_step_logprobs = {-0.5, -0.25};
  RetrievalResult b;
  b.query_id = "q2";
  b.method = Method::bm25;
  auto back = parse_results_jsonl(results_to_jsonl({a, b}));
  REQUIRE(back.size() == 2);
  CHECK(back[0].to_json() == a.to_json());
  CHECK(back[1].to_json() == b.to_json());
  CHECK(a.logprob_sum() == -0.75);
  CHECK(method_from_string("single_stage") == Method::single_stage);
  CHECK_THROWS_AS(method_from_string("dense"), ValidationError);
}
