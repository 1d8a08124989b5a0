#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "genret/text.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(GENRET_BIN) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("genret_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  Run help = run("--help");
  CHECK(help.code == 0);
  for (const char* sub : {"synth", "ingest", "train-tokenizer", "augment", "build-data", "train", "retrieve", "eval",
                          "grid", "ablate", "plot", "pipeline"}) {
    CHECK_MESSAGE(help.output.find(sub) != std::string::npos, sub);
  }
  CHECK(run("--no-such-flag").code == 1);
  CHECK(run("").code == 1);
  CHECK(run("train-tokenizer").code == 1);
}

TEST_CASE("validation errors exit with 1 and a message") {
  const fs::path dir = fresh_dir("bad");
  fs::create_directories(dir);
  genret::write_file_atomic(dir / "bad.jsonl", "{\"id\": \"a\"}\n");
  Run r = run("--out " + (dir / "o").string() + " ingest --corpus " + (dir / "bad.jsonl").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("line 1") != std::string::npos);

  genret::write_file_atomic(dir / "cfg.json", "{\"sead\": 3}");
  Run c = run("--config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string() + " synth");
  CHECK(c.code == 1);
  CHECK(c.output.find("sead") != std::string::npos);

  CHECK(run("--set vocab_size=10 --out " + (dir / "o").string() + " synth").code == 1);
  fs::remove_all(dir);
}

TEST_CASE("dry run prints the resolved plan without writing") {
  const fs::path dir = fresh_dir("dry");
  Run r = run("--dry-run --seed 5 --set stage1_train.max_steps=9 --set stage1_train.warmup_steps=3 --out " + dir.string() + " pipeline");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.output);
  CHECK(j["command"] == "pipeline");
  CHECK(j["config"]["seed"] == 5);
  CHECK(j["config"]["stage1_train"]["max_steps"] == 9);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("step-by-step commands chain through files") {
  const fs::path dir = fresh_dir("chain");
  const std::string out = " --out " + dir.string() + " ";
  REQUIRE(run(out + "synth --records 6").code == 0);
  const std::string corpus = (dir / "corpus.jsonl").string();
  const std::string queries = (dir / "queries.tsv").string();
  CHECK(fs::exists(corpus));
  REQUIRE(run(out + "train-tokenizer --vocab 300 --corpus " + corpus).code == 0);
  const std::string tok = (dir / "tokenizer.json").string();
  REQUIRE(run("--set augment.k=3" + out + "augment --corpus " + corpus).code == 0);
  REQUIRE(run(out + "build-data --corpus " + corpus + " --tokenizer " + tok + " --pseudo " +
              (dir / "pseudo_queries.tsv").string())
              .code == 0);
  const std::string train_flags =
      "--set stage1_train.max_steps=4 --set stage1_train.warmup_steps=1 --set stage1_train.eval_every=2 "
      "--set stage2_train.max_steps=4 --set stage2_train.warmup_steps=1 --set stage2_train.eval_every=2";
  REQUIRE(run(train_flags + out + "train --tokenizer " + tok + " --data " + (dir / "data/passage_gen.jsonl").string())
              .code == 0);
  REQUIRE(run(train_flags + out + "train --tokenizer " + tok + " --data " + (dir / "data/url_gen.jsonl").string())
              .code == 0);
  Run ret = run(out + "retrieve --method two_stage --queries " + queries + " --tokenizer " + tok + " --stage1 " +
                (dir / "checkpoints/passage_gen.ckpt").string() + " --stage2 " +
                (dir / "checkpoints/url_gen.ckpt").string());
  REQUIRE(ret.code == 0);
  Run ev = run(out + "eval --results " + (dir / "results_two_stage.jsonl").string() + " --queries " + queries +
               " --corpus " + corpus + " --tokenizer " + tok);
  REQUIRE(ev.code == 0);
  auto report = nlohmann::json::parse(genret::read_file(dir / "eval_report.json"));
  CHECK(report["n_queries"] == 6);
  CHECK(report.contains("membership_rate"));
  CHECK(fs::exists(dir / "traces.jsonl"));

  REQUIRE(run(out + "retrieve --method bm25 --queries " + queries + " --corpus " + corpus).code == 0);
  Run bm = run(out + "eval --results " + (dir / "results_bm25.jsonl").string() + " --queries " + queries +
               " --corpus " + corpus);
  CHECK(bm.code == 0);

  // A checkpoint trained with another tokenizer is refused.
  REQUIRE(run((" --out " + (dir / "t2").string() + " ") + "train-tokenizer --vocab 310 --corpus " + corpus).code == 0);
  Run mismatch = run(out + "retrieve --method two_stage --queries " + queries + " --tokenizer " +
                     (dir / "t2/tokenizer.json").string() + " --stage1 " +
                     (dir / "checkpoints/passage_gen.ckpt").string() + " --stage2 " +
                     (dir / "checkpoints/url_gen.ckpt").string());
  CHECK(mismatch.code == 1);
  fs::remove_all(dir);
}

TEST_CASE("grid and plot") {
  const fs::path dir = fresh_dir("grid");
  const std::string flags =
      "--set synth.n_records=8 --set vocab_size=300 --set grid.corpus_sizes=[] --set grid.model_tags=[] "
      "--set grid.pseudo_query_counts=[] --set grid.prompts=[] --set grid.passage_truncs=[8,16] "
      "--set grid.seeds=[0] --set grid.base.corpus_size=8 --set grid.base.pseudo_query_count=2 "
      "--set grid.max_steps=4 --set grid.eval_every=2 --set grid.batch_size=4 --set grid.eval_pairs=4";
  REQUIRE(run(flags + " --out " + dir.string() + " grid").code == 0);
  const std::string csv = (dir / "study_passage_trunc.csv").string();
  REQUIRE(fs::exists(csv));
  Run p = run("--out " + dir.string() + " plot --metric loss " + csv);
  CHECK(p.code == 0);
  CHECK(fs::exists(dir / "passage_trunc_loss.svg"));
  CHECK(run("--out " + dir.string() + " plot --metric nope " + csv).code == 1);
  fs::remove_all(dir);
}
