#include <doctest.h>

#include "genret/config.hpp"
#include "genret/text.hpp"

using namespace genret;
using nlohmann::json;

TEST_CASE("defaults validate and round trip") {
  RunConfig c;
  c.validate();
  CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(RunConfig::from_json(json::object()).to_json() == c.to_json());
  // The stage-2 source budget equals the stage-1 target budget.
  CHECK(c.specs.url_gen.source_max == c.specs.passage_gen.target_max);
}

TEST_CASE("partial configs overlay the defaults") {
  json j = {{"seed", 7}, {"stage1_train", {{"max_steps", 50}, {"warmup_steps", 5}}}, {"grid", {{"seeds", {4}}}}};
  RunConfig c = RunConfig::from_json(j);
  CHECK(c.seed == 7);
  CHECK(c.stage1_train.max_steps == 50);
  CHECK(c.stage1_train.batch_size == RunConfig{}.stage1_train.batch_size);
  CHECK(c.grid.seeds == std::vector<std::uint64_t>{4});
  // Sub-seeds follow the top-level seed.
  CHECK(c.augment.seed == 7);
  CHECK(c.stage1_train.seed == mix_seed(7, std::string_view("passage_gen")));
  CHECK(c.stage1_train.seed != c.stage2_train.seed);

  RunConfig unclipped = RunConfig::from_json({{"stage2_train", {{"grad_clip", nullptr}}}});
  CHECK_FALSE(unclipped.stage2_train.grad_clip.has_value());
  CHECK(unclipped.stage1_train.grad_clip.has_value());
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(RunConfig::from_json({{"sead", 1}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"specs", {{"passage_gen", {{"trunc", 3}}}}}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"synth", 3}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"threads", "many"}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"model_size", "huge"}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json(json::array()), ValidationError);

  RunConfig c;
  c.specs.passage_gen.passage_trunc = c.specs.passage_gen.target_max + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.vocab_size = 100;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.corpus_path = "corpus.jsonl";
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.train_eval_per_record = c.augment.k + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("dotted overrides") {
  json j = RunConfig{}.to_json();
  apply_override(j, "stage1_train.max_steps=12");
  apply_override(j, "model_size=small");
  apply_override(j, "specs.passage_gen.use_prompts=false");
  apply_override(j, "grid.seeds=[1,2]");
  RunConfig c = RunConfig::from_json(j);
  CHECK(c.stage1_train.max_steps == 12);
  CHECK(c.model_size == SizeTag::small);
  CHECK_FALSE(c.specs.passage_gen.use_prompts);
  CHECK(c.grid.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK_THROWS_AS(apply_override(j, "no_equals"), ValidationError);
  CHECK_THROWS_AS(apply_override(j, "=3"), ValidationError);
}

TEST_CASE("stage models follow the size tag and specs") {
  RunConfig c;
  c.model_size = SizeTag::medium;
  ModelConfig m1 = c.stage1_model(1024), m2 = c.stage2_model(1024), ms = c.single_model(1024);
  CHECK(m1.d_model == 256);
  CHECK(m1.max_source_len == c.specs.passage_gen.source_max);
  CHECK(m1.max_target_len == c.specs.passage_gen.target_max);
  CHECK(m2.max_source_len == c.specs.url_gen.source_max);
  CHECK(m2.max_target_len == c.specs.url_gen.target_max);
  CHECK(ms.max_source_len == c.specs.passage_gen.source_max);
  CHECK(ms.max_target_len == c.specs.url_gen.target_max);
}
