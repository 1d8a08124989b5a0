// genret: command-line entry point for the two-stage generative retrieval lab.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "genret/augment.hpp"
#include "genret/checkpoint.hpp"
#include "genret/config.hpp"
#include "genret/corpus.hpp"
#include "genret/dataset.hpp"
#include "genret/eval.hpp"
#include "genret/harness.hpp"
#include "genret/pipeline.hpp"
#include "genret/plot.hpp"
#include "genret/retrieve.hpp"
#include "genret/synth.hpp"
#include "genret/text.hpp"
#include "genret/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace genret;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "genret_out";
  bool dry_run = false;
  std::vector<std::string> overrides;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
  if (!g.overrides.empty()) {
    json j = cfg.to_json();
    for (const auto& o : g.overrides) apply_override(j, o);
    cfg = RunConfig::from_json(j);
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  cfg.propagate_seed();
  cfg.validate();
  return cfg;
}

// Prints the resolved plan; returns true when the caller should stop.
bool dry_run(const Globals& g, const RunConfig& cfg, const std::string& command, const json& plan) {
  if (!g.dry_run) return false;
  json j = {{"command", command}, {"out", g.out}, {"config", cfg.to_json()}, {"plan", plan}};
  std::cout << j.dump(2) << "\n";
  return true;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("missing --") + what);
  if (!fs::exists(path)) throw ValidationError(std::string(what) + " file not found: " + path);
}

Tokenizer load_tokenizer(const std::string& path) {
  require_file(path, "tokenizer");
  return Tokenizer::from_json(read_file(path));
}

Corpus load_corpus(const std::string& path, const RunConfig& cfg) {
  require_file(path, "corpus");
  return ingest_corpus(path, cfg.seed);
}

Corpus grid_source(const RunConfig& cfg) {
  if (!cfg.corpus_path.empty()) return ingest_corpus(cfg.corpus_path, cfg.seed);
  int n = cfg.grid.base.corpus_size;
  for (int s : cfg.grid.corpus_sizes) n = std::max(n, s);
  SynthConfig sc = cfg.synth;
  sc.n_records = n;
  return Corpus(synth_corpus(sc).records);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"genret: two-stage generative retrieval (query -> passage -> URL) at desk scale"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads for retrieval");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--dry-run", g.dry_run, "Validate and print the resolved plan without side effects");
  app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

  int records = -1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and labeled queries");
  synth->add_option("--records", records, "Number of records");

  std::string corpus_path, queries_path, tokenizer_path, pseudo_path, data_path, results_path, labels_path;
  std::string stage1_path, stage2_path, model_path, method_name = "two_stage", kind_name;
  int vocab = -1;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a corpus (and queries)");
  ingest->add_option("--corpus", corpus_path)->required();
  ingest->add_option("--queries", queries_path);

  auto* train_tok = app.add_subcommand("train-tokenizer", "Train the byte-level BPE tokenizer");
  train_tok->add_option("--corpus", corpus_path)->required();
  train_tok->add_option("--vocab", vocab, "Vocabulary size (default from config)");

  auto* augment = app.add_subcommand("augment", "Generate pseudo queries");
  augment->add_option("--corpus", corpus_path)->required();

  auto* build = app.add_subcommand("build-data", "Build stage-1, stage-2 and single-stage datasets");
  build->add_option("--corpus", corpus_path)->required();
  build->add_option("--tokenizer", tokenizer_path)->required();
  build->add_option("--pseudo", pseudo_path, "Pseudo queries TSV")->required();

  auto* train_cmd = app.add_subcommand("train", "Train one model on a dataset file");
  train_cmd->add_option("--data", data_path)->required();
  train_cmd->add_option("--tokenizer", tokenizer_path)->required();

  auto* retrieve = app.add_subcommand("retrieve", "Retrieve URLs for queries");
  retrieve->add_option("--method", method_name, "two_stage, single_stage or bm25")->capture_default_str();
  retrieve->add_option("--queries", queries_path)->required();
  retrieve->add_option("--corpus", corpus_path, "Corpus (bm25)");
  retrieve->add_option("--tokenizer", tokenizer_path);
  retrieve->add_option("--stage1", stage1_path, "Passage generation checkpoint");
  retrieve->add_option("--stage2", stage2_path, "URL generation checkpoint");
  retrieve->add_option("--model", model_path, "Single-stage checkpoint");

  auto* eval = app.add_subcommand("eval", "Hits@1, membership analysis and traces");
  eval->add_option("--results", results_path)->required();
  eval->add_option("--labels", labels_path, "Labels JSONL (query_id, urls)");
  eval->add_option("--queries", queries_path, "Queries TSV (labels derived with --corpus)");
  eval->add_option("--corpus", corpus_path, "Corpus; enables membership analysis with --tokenizer");
  eval->add_option("--tokenizer", tokenizer_path);

  auto* grid = app.add_subcommand("grid", "Run the scaling grid (stage-1 curves)");
  auto* ablate = app.add_subcommand("ablate", "Run the ablation table");

  std::vector<std::string> csvs;
  PlotOptions plot_opts;
  auto* plot = app.add_subcommand("plot", "Curve CSVs to SVG charts");
  plot->add_option("csv", csvs, "Curve CSV files")->required();
  plot->add_option("--metric", plot_opts.metric, "ppl or loss")->capture_default_str();
  plot->add_flag("--log-y", plot_opts.log_y, "Logarithmic y axis");

  auto* pipeline = app.add_subcommand("pipeline", "Run the whole flow end to end");
  bool skip_training = false;
  pipeline->add_flag("--skip-training", skip_training, "Only run the BM25 baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = resolve(g);
    const fs::path out(g.out);

    if (*synth) {
      if (records >= 0) cfg.synth.n_records = records;
      cfg.synth.validate();
      if (dry_run(g, cfg, "synth", {"write corpus.jsonl", "write queries.tsv"})) return 0;
      SynthCorpus s = synth_corpus(cfg.synth);
      fs::create_directories(out);
      Corpus corpus(std::move(s.records));
      write_file_atomic(out / "corpus.jsonl", corpus_to_jsonl(corpus));
      write_file_atomic(out / "queries.tsv", queries_to_tsv(s.queries));
      std::cout << "wrote " << corpus.size() << " records and " << s.queries.size() << " queries to " << out << "\n";
    } else if (*ingest) {
      if (dry_run(g, cfg, "ingest", {"normalize corpus", "write corpus.jsonl"})) return 0;
      Corpus corpus = load_corpus(corpus_path, cfg);
      fs::create_directories(out);
      write_file_atomic(out / "corpus.jsonl", corpus_to_jsonl(corpus));
      if (!queries_path.empty()) {
        require_file(queries_path, "queries");
        auto queries = read_queries_tsv(queries_path);
        check_queries(queries, corpus);
        write_file_atomic(out / "queries.tsv", queries_to_tsv(queries));
      }
      std::cout << "ingested " << corpus.size() << " records (" << corpus.membership_index_size()
                << " distinct passages)\n";
    } else if (*train_tok) {
      if (vocab > 0) cfg.vocab_size = vocab;
      cfg.validate();
      if (dry_run(g, cfg, "train-tokenizer", {"train byte-level BPE", "write tokenizer.json"})) return 0;
      Corpus corpus = load_corpus(corpus_path, cfg);
      Tokenizer tok = build_tokenizer(cfg, corpus);
      fs::create_directories(out);
      write_file_atomic(out / "tokenizer.json", tok.to_json());
      std::cout << "tokenizer: " << tok.vocab_size() << " tokens, hash " << tok.hash() << "\n";
    } else if (*augment) {
      if (dry_run(g, cfg, "augment", {"generate pseudo queries", "write pseudo_queries.tsv"})) return 0;
      Corpus corpus = load_corpus(corpus_path, cfg);
      AugmentConfig ac = cfg.augment;
      auto pq = build_augmented_set(corpus, ac);
      fs::create_directories(out);
      write_file_atomic(out / "pseudo_queries.tsv", pseudo_queries_to_tsv(pq));
      std::cout << "wrote " << pq.size() << " pseudo queries\n";
    } else if (*build) {
      if (dry_run(g, cfg, "build-data", {"data/passage_gen.jsonl", "data/url_gen.jsonl", "data/single_stage.jsonl"})) {
        return 0;
      }
      Corpus corpus = load_corpus(corpus_path, cfg);
      Tokenizer tok = load_tokenizer(tokenizer_path);
      require_file(pseudo_path, "pseudo");
      auto pq = parse_pseudo_queries_tsv(read_file(pseudo_path));
      fs::create_directories(out / "data");
      const std::pair<const char*, std::vector<TrainingPair>> sets[] = {
          {"passage_gen", build_stage1(pq, corpus, cfg.specs.passage_gen, tok)},
          {"url_gen", build_stage2(corpus, cfg.specs, tok)},
          {"single_stage", build_single_stage(pq, corpus, cfg.specs, tok)}};
      for (const auto& [kind, pairs] : sets) {
        DatasetFile f{kind, cfg.specs.to_json(), tok.hash(), pairs};
        write_file_atomic(out / "data" / (std::string(kind) + ".jsonl"), dataset_to_jsonl(f));
        std::cout << kind << ": " << pairs.size() << " pairs\n";
      }
    } else if (*train_cmd) {
      Tokenizer tok = load_tokenizer(tokenizer_path);
      require_file(data_path, "data");
      DatasetFile data = read_dataset(data_path, tok.hash());
      ModelConfig mc;
      TrainConfig tc;
      if (data.kind == "passage_gen") {
        mc = cfg.stage1_model(tok.vocab_size()), tc = cfg.stage1_train;
      } else if (data.kind == "url_gen") {
        mc = cfg.stage2_model(tok.vocab_size()), tc = cfg.stage2_train;
      } else if (data.kind == "single_stage") {
        mc = cfg.single_model(tok.vocab_size()), tc = cfg.single_train;
      } else {
        throw ValidationError("unknown dataset kind '" + data.kind + "'");
      }
      if (dry_run(g, cfg, "train",
                  {{"kind", data.kind}, {"pairs", data.pairs.size()}, {"model", mc.to_json()}, {"train", tc.to_json()}})) {
        return 0;
      }
      const auto eval_pairs = sample_pairs(data.pairs, static_cast<std::size_t>(cfg.eval_pairs), tc.seed);
      TrainJob job{data.kind, mc, tc, &data.pairs, &eval_pairs, tok.hash()};
      const fs::path ckpt = out / "checkpoints" / (data.kind + ".ckpt");
      TrainedModel tm = train_or_resume(job, ckpt, cfg.model_cache, [](const TrainStats& s) {
        if (s.ppl) std::cerr << "step " << s.step << " loss " << s.loss << " ppl " << *s.ppl << "\n";
      });
      std::cout << "checkpoint " << ckpt.string() << " sha256 " << tm.checkpoint_sha256 << "\n";
    } else if (*retrieve) {
      const Method method = method_from_string(method_name);
      if (dry_run(g, cfg, "retrieve", {{"method", method_name}, {"queries", queries_path}})) return 0;
      require_file(queries_path, "queries");
      const auto queries = read_queries_tsv(queries_path);
      std::vector<RetrievalResult> results;
      if (method == Method::bm25) {
        results = retrieve_bm25(load_corpus(corpus_path, cfg), queries);
      } else {
        Tokenizer tok = load_tokenizer(tokenizer_path);
        if (method == Method::two_stage) {
          require_file(stage1_path, "stage1");
          require_file(stage2_path, "stage2");
          auto s1 = load_checkpoint(stage1_path, tok.hash());
          auto s2 = load_checkpoint(stage2_path, tok.hash());
          results = retrieve_two_stage(s1.model, s2.model, queries, cfg.specs, tok, cfg.threads);
        } else {
          require_file(model_path, "model");
          auto m = load_checkpoint(model_path, tok.hash());
          results = retrieve_single_stage(m.model, queries, cfg.specs, tok, cfg.threads);
        }
      }
      fs::create_directories(out);
      const fs::path path = out / ("results_" + std::string(to_string(method)) + ".jsonl");
      write_file_atomic(path, results_to_jsonl(results));
      std::cout << "wrote " << results.size() << " results to " << path.string() << "\n";
    } else if (*eval) {
      if (dry_run(g, cfg, "eval", {{"results", results_path}})) return 0;
      require_file(results_path, "results");
      const auto results = parse_results_jsonl(read_file(results_path));
      std::optional<Corpus> corpus;
      if (!corpus_path.empty()) corpus = load_corpus(corpus_path, cfg);
      std::vector<QueryRecord> queries;
      Labels labels;
      if (!labels_path.empty()) {
        require_file(labels_path, "labels");
        labels = parse_labels_jsonl(read_file(labels_path));
      } else if (!queries_path.empty() && corpus) {
        require_file(queries_path, "queries");
        queries = read_queries_tsv(queries_path);
        labels = labels_from_queries(queries, *corpus);
      } else {
        throw ValidationError("eval needs --labels, or --queries with --corpus");
      }
      if (!queries_path.empty() && queries.empty()) queries = read_queries_tsv(queries_path);
      EvalReport report = hits_at_1(results, labels);
      if (corpus && !tokenizer_path.empty() && !results.empty() && results.front().method == Method::two_stage) {
        Tokenizer tok = load_tokenizer(tokenizer_path);
        membership_analysis(results, FormattedTargetIndex(*corpus, cfg.specs.passage_gen, tok), report);
      }
      fs::create_directories(out);
      write_file_atomic(out / "eval_report.json", report.to_json().dump(2) + "\n");
      write_file_atomic(out / "per_query.jsonl", report.per_query_jsonl());
      if (corpus) write_file_atomic(out / "traces.jsonl", export_traces(results, queries, *corpus, report));
      std::cout << "hits@1 " << std::fixed << std::setprecision(4) << report.hits_at_1 << " over " << report.n_queries
                << " queries";
      if (report.membership_rate) std::cout << ", membership " << *report.membership_rate;
      std::cout << "\n";
    } else if (*grid) {
      json cells = json::array();
      for (const auto& c : expand_grid(cfg.grid)) cells.push_back(c.cell_id);
      if (dry_run(g, cfg, "grid", {{"cells", cells}})) return 0;
      Corpus source = grid_source(cfg);
      Tokenizer tok = build_tokenizer(cfg, source);
      fs::create_directories(out);
      write_file_atomic(out / "tokenizer.json", tok.to_json());
      GridResult r = run_grid(cfg, source, tok, out, &std::cerr);
      std::size_t failed = 0;
      for (const auto& c : r.cells) failed += !c.ok;
      std::cout << r.cells.size() << " cells, " << failed << " failed; curves in " << out.string() << "\n";
      if (failed) return 2;
    } else if (*ablate) {
      json variants = json::array();
      for (const auto& [row, _] : ablation_variants(cfg)) variants.push_back(row.variant);
      if (dry_run(g, cfg, "ablate", {{"variants", variants}, {"seeds", cfg.grid.seeds}})) return 0;
      Inputs in = load_inputs(cfg);
      auto rows = run_ablations(cfg, in.corpus, in.queries, cfg.grid.seeds, out, &std::cerr);
      std::cout << ablations_to_csv(rows);
    } else if (*plot) {
      if (dry_run(g, cfg, "plot", {{"csv", csvs}, {"metric", plot_opts.metric}})) return 0;
      std::vector<fs::path> paths(csvs.begin(), csvs.end());
      for (const auto& p : plot_files(paths, out, plot_opts)) std::cout << p.string() << "\n";
    } else if (*pipeline) {
      if (skip_training) cfg.skip_training = true;
      if (dry_run(g, cfg, "pipeline",
                  {"ingest", "train-tokenizer", "bm25", "augment", "build-data", "train passage_gen", "train url_gen",
                   "train single_stage", "retrieve", "eval"})) {
        return 0;
      }
      PipelineResult r = run_pipeline(cfg, out, &std::cerr);
      std::cout << format_summary(r);
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
