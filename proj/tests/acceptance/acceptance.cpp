// End-to-end acceptance checks. Prints one PASS/WARN/FAIL line per criterion
// and exits non-zero when any hard criterion fails. WARN marks a soft
// (directional) criterion that did not hold.
//
// GENRET_ACCEPTANCE_ONLY=1,4,8  runs a subset.
// GENRET_ACCEPTANCE_KEEP=1      keeps the work directory (and its model cache)
//                               from a previous run instead of starting clean.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "genret/bm25.hpp"
#include "genret/checkpoint.hpp"
#include "genret/config.hpp"
#include "genret/dataset.hpp"
#include "genret/eval.hpp"
#include "genret/harness.hpp"
#include "genret/model.hpp"
#include "genret/pipeline.hpp"
#include "genret/retrieve.hpp"
#include "genret/synth.hpp"
#include "genret/text.hpp"
#include "genret/tokenizer.hpp"

using namespace genret;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { pass, warn, fail };

struct Line {
  int id;
  Status status;
  std::string text;
};

std::vector<Line> g_lines;

void report(int id, Status status, const std::string& text) {
  static const char* names[] = {"PASS", "WARN", "FAIL"};
  std::cout << names[static_cast<int>(status)] << "  criterion " << id << ": " << text << std::endl;
  g_lines.push_back({id, status, text});
}

Status hard(bool ok) { return ok ? Status::pass : Status::fail; }
Status soft(bool ok) { return ok ? Status::pass : Status::warn; }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string join_values(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v[i]);
  return out;
}

const fs::path kWork = ACCEPTANCE_WORK_DIR;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

// ---------------------------------------------------------------------------
// 1. Finite-difference gradient check

void criterion_1() {
  const auto start = Clock::now();
  ModelConfig cfg = ModelConfig::for_size(SizeTag::tiny, 300, 16, 16);
  ProbeModel model = cast_model<double>(init_model(cfg, 101));
  std::mt19937_64 rng(102);
  std::vector<TrainingPair> batch;
  for (int i = 0; i < 2; ++i) {
    TrainingPair p;
    p.source.role = Role::source;
    for (int k = 0; k < 7 + i; ++k) p.source.ids.push_back(kNumSpecial + static_cast<int>(rng() % 296));
    for (int k = 0; k < 5 + i; ++k) p.target.ids.push_back(kNumSpecial + static_cast<int>(rng() % 296));
    p.target.ids.push_back(kEosId);
    batch.push_back(p);
  }
  std::vector<Matrix<double>> grads;
  batch_loss(model, batch, &grads);
  const std::vector<bool> signs = relu_pattern(model, batch);
  auto mean_loss = [&] {
    LossSum l = batch_loss(model, batch, static_cast<std::vector<Matrix<double>>*>(nullptr));
    return l.total / static_cast<double>(l.tokens);
  };

  const double h = 1e-4;
  int checked = 0, bad = 0, kinks = 0, untouched = 0;
  double worst = 0.0;
  while (checked < 120 && checked + kinks + untouched < 20000) {
    const std::size_t p = rng() % model.params().size();
    auto& value = model.params()[p].value;
    const Eigen::Index k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(value.size()));
    const double saved = value.data()[k];
    value.data()[k] = saved + h;
    const double up = mean_loss();
    const bool kink_up = relu_pattern(model, batch) != signs;
    value.data()[k] = saved - h;
    const double down = mean_loss();
    const bool kink_down = relu_pattern(model, batch) != signs;
    value.data()[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double g = grads[p].data()[k];
    const double scale = std::max(std::abs(g), std::abs(fd));
    // Parameters the batch does not reach (embedding rows of unused tokens)
    // have zero gradient on both sides.
    if (scale < 1e-10) {
      ++untouched;
      continue;
    }
    // The loss is not differentiable across a ReLU kink, so the central
    // difference over [-h, h] says nothing about the gradient there.
    if (kink_up || kink_down) {
      ++kinks;
      continue;
    }
    ++checked;
    const double rel = std::abs(g - fd) / scale;
    worst = std::max(worst, rel);
    if (rel >= 1e-3) ++bad;
  }
  const double secs = seconds_since(start);
  report(1, hard(checked >= 100 && bad == 0 && secs < 60.0),
         std::to_string(checked) + " parameters, max relative error " + sci(worst) + ", " + std::to_string(bad) +
             " above 1e-3 (" + std::to_string(kinks) + " draws straddling a ReLU kink skipped), " + fmt(secs, 1) +
             " s");
}

// ---------------------------------------------------------------------------
// 2. exp(-CE) equals the chained per-step probabilities

void criterion_2() {
  double worst = 0.0;
  int cases = 0;
  std::mt19937_64 rng(202);
  for (int c = 0; c < 20; ++c) {
    ModelConfig cfg = ModelConfig::for_size(SizeTag::tiny, 300, 24, 24);
    // Larger init scales give peaked, less uniform distributions.
    cfg.param_init_scale = c % 2 ? 0.02 : 0.2;
    ProbeModel m = cast_model<double>(init_model(cfg, 300 + static_cast<std::uint64_t>(c)));
    TokenSequence src{{}, Role::source}, tgt{{}, Role::target};
    const int ls = 3 + static_cast<int>(rng() % 20), lt = 2 + static_cast<int>(rng() % 20);
    for (int k = 0; k < ls; ++k) src.ids.push_back(kNumSpecial + static_cast<int>(rng() % 296));
    for (int k = 0; k < lt; ++k) tgt.ids.push_back(kNumSpecial + static_cast<int>(rng() % 296));
    tgt.ids.push_back(kEosId);

    const double ce = cross_entropy(forward(m, src, tgt), tgt).total;
    double product = 1.0;
    for (std::size_t i = 0; i < tgt.ids.size(); ++i) {
      TokenSequence prefix{{tgt.ids.begin(), tgt.ids.begin() + static_cast<std::ptrdiff_t>(i + 1)}, Role::target};
      const Matrix<double> logits = forward(m, src, prefix);
      const auto row = logits.row(static_cast<Eigen::Index>(i));
      const double mx = row.maxCoeff();
      const double z = (row.array() - mx).exp().sum();
      product *= std::exp(row(tgt.ids[i]) - mx) / z;
    }
    const double rel = std::abs(std::exp(-ce) - product) / product;
    worst = std::max(worst, rel);
    ++cases;
  }
  report(2, hard(cases == 20 && worst <= 1e-6), std::to_string(cases) + " cases, max relative difference " + sci(worst));
}

// ---------------------------------------------------------------------------
// Shared desk runs (criteria 3, 4, 5, 11)

struct DeskCorpus {
  fs::path corpus_path;
  fs::path queries_path;
};

DeskCorpus write_desk_corpus() {
  RunConfig cfg;
  const SynthCorpus s = synth_corpus(cfg.synth);
  const fs::path dir = kWork / "desk";
  fs::create_directories(dir);
  DeskCorpus d{dir / "corpus.jsonl", dir / "queries.tsv"};
  write_file_atomic(d.corpus_path, corpus_to_jsonl(Corpus(s.records)));
  write_file_atomic(d.queries_path, queries_to_tsv(s.queries));
  return d;
}

RunConfig desk_config(const DeskCorpus& desk, std::uint64_t seed) {
  // Defaults apart from the shared corpus, the cache and the train-set probe.
  RunConfig cfg;
  cfg.seed = seed;
  cfg.propagate_seed();
  cfg.corpus_path = desk.corpus_path.string();
  cfg.queries_path = desk.queries_path.string();
  cfg.train_eval_per_record = cfg.augment.k;
  cfg.model_cache = (kWork / "model_cache").string();
  cfg.validate();
  return cfg;
}

struct DeskRun {
  RunConfig cfg;
  PipelineResult result;
  fs::path out;
  double seconds = 0.0;
};

std::map<std::uint64_t, DeskRun> g_desk;

DeskRun& desk_run(const DeskCorpus& desk, std::uint64_t seed) {
  auto it = g_desk.find(seed);
  if (it != g_desk.end()) return it->second;
  DeskRun run;
  run.cfg = desk_config(desk, seed);
  run.out = kWork / ("pipeline-s" + std::to_string(seed));
  std::cout << "  [pipeline seed " << seed << "]" << std::endl;
  const auto start = Clock::now();
  run.result = run_pipeline(run.cfg, run.out);
  run.seconds = seconds_since(start);
  std::cout << format_summary(run.result);
  return g_desk.emplace(seed, std::move(run)).first->second;
}

void criterion_3(const DeskCorpus& desk) {
  DeskRun& run = desk_run(desk, 0);
  const auto& train = run.result.two_stage_train;
  const int max_steps = std::max({run.cfg.stage1_train.max_steps, run.cfg.stage2_train.max_steps});
  if (!train || !train->membership_rate) {
    report(3, Status::fail, "no training-query evaluation was produced");
    return;
  }
  const bool ok = train->hits_at_1 >= 0.90 && *train->membership_rate >= 0.90 && run.seconds <= 900.0 &&
                  max_steps <= 5000 && run.cfg.augment.k == 20 && run.result.bm25.n_queries == 50;
  report(3, hard(ok),
         "Hits@1 " + fmt(train->hits_at_1) + " on " + std::to_string(train->n_queries) +
             " training pseudo-queries, membership " + fmt(*train->membership_rate) + ", " +
             std::to_string(run.cfg.stage1_train.max_steps) + "/" + std::to_string(run.cfg.stage2_train.max_steps) +
             " steps, pipeline " + fmt(run.seconds, 0) + " s (all three models)");
}

void criterion_4(const DeskCorpus& desk) {
  std::vector<double> two, one;
  int inverted = 0;
  for (std::uint64_t seed : kSeeds) {
    DeskRun& run = desk_run(desk, seed);
    two.push_back(run.result.two_stage->hits_at_1);
    one.push_back(run.result.single_stage->hits_at_1);
    if (two.back() < one.back()) ++inverted;
  }
  const double margin = mean(two) - mean(one);
  const std::string text = "two-stage mean " + fmt(mean(two)) + " [" + join_values(two) + "] vs single-stage mean " +
                           fmt(mean(one)) + " [" + join_values(one) + "], inverted on " + std::to_string(inverted) +
                           " of 3 seeds";
  if (margin >= 0.0) {
    report(4, Status::pass, text);
  } else {
    // The average is inverted: a soft failure when it comes from a single seed.
    report(4, inverted < 2 ? Status::warn : Status::fail, text);
  }
}

void criterion_5(const DeskCorpus& desk) {
  for (std::uint64_t seed : kSeeds) desk_run(desk, seed);
  RunConfig base = desk_config(desk, 0);
  // Ablations score dev queries only; the reduced-k variant cannot evaluate k training queries.
  base.train_eval_per_record = 0;
  const Inputs in = load_inputs(base);
  std::cout << "  [ablations]" << std::endl;
  const auto rows = run_ablations(base, in.corpus, in.queries, kSeeds, kWork / "ablations", &std::cout);
  std::map<std::string, const AblationRow*> by;
  for (const auto& r : rows) by[r.variant] = &r;
  const AblationRow& b = *by.at("base");
  auto compare = [&](const AblationRow& other, bool base_should_win_strictly) {
    int consistent = 0;
    for (std::size_t i = 0; i < b.hits_per_seed.size(); ++i) {
      const double d = b.hits_per_seed[i] - other.hits_per_seed[i];
      if (base_should_win_strictly ? d > 0 : d >= 0) ++consistent;
    }
    return consistent;
  };
  const int prompt_signs = compare(*by.at("no_prompts"), false);
  const int k_signs = compare(*by.at("reduced_queries"), true);
  const bool prompts_ok = b.hits_mean >= by.at("no_prompts")->hits_mean;
  const bool k_ok = b.hits_mean > by.at("reduced_queries")->hits_mean;
  report(5, soft(prompts_ok),
         "prompts on " + fmt(b.hits_mean) + " [" + join_values(b.hits_per_seed) + "] vs off " +
             fmt(by.at("no_prompts")->hits_mean) + " [" + join_values(by.at("no_prompts")->hits_per_seed) +
             "], on >= off on " + std::to_string(prompt_signs) + " of 3 seeds");
  report(5, soft(k_ok),
         "k=20 " + fmt(b.hits_mean) + " vs k=10 " + fmt(by.at("reduced_queries")->hits_mean) + " [" +
             join_values(by.at("reduced_queries")->hits_per_seed) + "], k=10 lower on " + std::to_string(k_signs) +
             " of 3 seeds (increased trunc " + fmt(by.at("increased_trunc")->hits_mean) + ")");
}

void criterion_11(const DeskCorpus& desk) {
  DeskRun& run = desk_run(desk, 0);
  const Tokenizer tok = Tokenizer::from_json(read_file(run.out / "tokenizer.json"));
  Seq2SeqModel stage2 = load_checkpoint(run.out / "checkpoints" / "url_gen.ckpt", tok.hash()).model;
  const Corpus corpus = ingest_corpus(run.out / "corpus.jsonl", run.cfg.seed);
  const auto pseudo = parse_pseudo_queries_tsv(read_file(run.out / "pseudo_queries.tsv"));

  // The stage-1 output for each record's first training pseudo query.
  std::map<std::string, std::string> generated;
  for (const auto& q : run.result.two_stage_train->per_query) {
    const std::size_t index = std::stoul(q.query_id.substr(2));
    const std::string& pid = pseudo.at(index).passage_id;
    if (!generated.count(pid) && q.generated_passage) generated[pid] = *q.generated_passage;
  }

  std::mt19937_64 rng(mix_seed(run.cfg.seed, std::string_view("word_drop")));
  const std::set<std::string> prompts = {std::string(kTitlePrompt), std::string(kPassagePrompt)};
  int correct = 0, total = 0;
  for (const auto& rec : corpus.records()) {
    auto words = split_whitespace(generated.at(rec.id));
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (!prompts.count(words[i])) candidates.push_back(i);
    }
    if (candidates.empty()) {
      ++total;
      continue;
    }
    words.erase(words.begin() + static_cast<std::ptrdiff_t>(candidates[rng() % candidates.size()]));
    TokenSequence src = tok.encode(join(words, " "), Role::source,
                                   static_cast<std::size_t>(run.cfg.specs.url_gen.source_max));
    const Decoded url = greedy_decode(stage2, src, static_cast<std::size_t>(run.cfg.specs.url_gen.target_max), tok);
    ++total;
    if (normalize_text(url.text) == normalize_text(rec.assigned_url)) ++correct;
  }
  const double rate = static_cast<double>(correct) / static_cast<double>(total);
  report(11, hard(rate >= 0.80),
         std::to_string(correct) + " of " + std::to_string(total) + " records (" + fmt(rate) +
             ") still map to the correct URL after deleting one word");
}

// ---------------------------------------------------------------------------
// 6 and 7: grid on the 1,000-record cell

std::optional<GridResult> g_grid;

const GridResult& grid_run() {
  if (g_grid) return *g_grid;
  RunConfig cfg;
  cfg.synth.n_records = 1000;
  cfg.grid.corpus_sizes = {};
  cfg.grid.pseudo_query_counts = {};
  cfg.grid.prompts = {};
  cfg.grid.model_tags = {SizeTag::tiny, SizeTag::medium};
  cfg.grid.passage_truncs = {16, 64};
  cfg.grid.seeds = kSeeds;
  cfg.grid.base.corpus_size = 1000;
  cfg.grid.max_steps = 200;
  cfg.grid.eval_every = 50;
  cfg.grid.batch_size = 16;
  cfg.grid.eval_pairs = 128;
  cfg.validate();
  const Corpus source(synth_corpus(cfg.synth).records);
  const Tokenizer tok = build_tokenizer(cfg, source);
  std::cout << "  [grid]" << std::endl;
  g_grid = run_grid(cfg, source, tok, kWork / "grid", &std::cout);
  return *g_grid;
}

const CellOutcome* find_cell(const GridResult& g, const std::string& study, const std::string& value,
                             std::uint64_t seed) {
  const std::string id = study + "-" + value + "-s" + std::to_string(seed);
  for (const auto& c : g.cells) {
    if (c.cell.cell_id == id && c.ok && !c.curve.empty()) return &c;
  }
  return nullptr;
}

void criterion_6() {
  const GridResult& g = grid_run();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const auto* a = find_cell(g, "passage_trunc", "16", seed);
    const auto* b = find_cell(g, "passage_trunc", "64", seed);
    if (!a || !b) {
      report(6, Status::fail, "grid cell for seed " + std::to_string(seed) + " failed");
      return;
    }
    const double pa = a->curve.back().ppl, pb = b->curve.back().ppl;
    if (pa < pb) ++wins;
    detail += " s" + std::to_string(seed) + ": " + fmt(pa, 2) + " vs " + fmt(pb, 2) + ";";
  }
  report(6, hard(wins >= 2),
         "trunc 16 below trunc 64 in stage-1 PPL on " + std::to_string(wins) + " of 3 seeds at 200 steps," + detail);
}

void criterion_7() {
  const GridResult& g = grid_run();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const auto* tiny = find_cell(g, "model_tag", "tiny", seed);
    const auto* medium = find_cell(g, "model_tag", "medium", seed);
    if (!tiny || !medium) {
      report(7, Status::fail, "grid cell for seed " + std::to_string(seed) + " failed");
      return;
    }
    const double lt = tiny->curve.back().loss, lm = medium->curve.back().loss;
    if (lm < lt) ++wins;
    detail += " s" + std::to_string(seed) + ": " + fmt(lm, 3) + " vs " + fmt(lt, 3) + ";";
  }
  report(7, hard(wins >= 2),
         "medium loss below tiny on " + std::to_string(wins) + " of 3 seeds at 200 steps," + detail);
}

// ---------------------------------------------------------------------------
// 8. BM25 oracle

void criterion_8() {
  std::vector<PassageRecord> recs = {{"d1", "Cat", "the cat sat", {"https://a.org/cat"}, "https://a.org/cat"},
                                     {"d2", "Dog", "the dog ran far", {"https://a.org/dog"}, "https://a.org/dog"},
                                     {"d3", "Bird", "a cat and a dog", {"https://a.org/bird"}, "https://a.org/bird"}};
  // k1 = 1.2, b = 0.75, avgdl = 5, idf = ln((N - df + 0.5) / (df + 0.5) + 1).
  const std::vector<std::tuple<std::string, std::string, double>> expected = {
      {"cat", "d1", 0.6847734995633235},     {"cat", "d3", 0.4344571362775708}, {"dog", "d2", 0.6462549902128865},
      {"cat dog", "d3", 0.8689142725551416}, {"the", "d1", 0.5118851407626824}, {"the", "d2", 0.47000362924573563},
      {"a", "d3", 1.276819145932425},        {"cat", "d2", 0.0}};
  const Bm25Index index{Corpus(recs)};
  double worst = 0.0;
  for (const auto& [q, id, v] : expected) worst = std::max(worst, std::abs(index.score(q, id) - v));

  bool invariant = true;
  std::mt19937_64 rng(808);
  for (int i = 0; i < 30; ++i) {
    recs.push_back({"x" + std::to_string(i), "Extra " + std::to_string(i % 3), "cat dog bird " + std::to_string(i % 7),
                    {"u"}, "u"});
  }
  const Bm25Index ref{Corpus(recs)};
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const Bm25Index shuffled{Corpus(recs)};
    for (const char* q : {"cat", "dog bird", "extra 2", "the cat sat", "a"}) {
      invariant = invariant && shuffled.retrieve(q, 40) == ref.retrieve(q, 40) && ref.retrieve(q, 40) == ref.retrieve(q, 40);
    }
  }
  report(8, hard(worst <= 1e-9 && invariant),
         "max score error " + sci(worst) + " over " + std::to_string(expected.size()) +
             " hand values; ranking identical under 10 corpus shuffles: " + (invariant ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 9. Tokenizer round trip

void criterion_9() {
  RunConfig cfg;
  cfg.synth.n_records = 1000;
  const Corpus corpus(synth_corpus(cfg.synth).records);
  const Tokenizer tok = build_tokenizer(cfg, corpus);
  std::mt19937_64 rng(909);
  int failures = 0, total = 0;
  auto check = [&](const std::string& s) {
    ++total;
    const auto ids = tok.encode_ids(s);
    const bool no_specials = std::none_of(ids.begin(), ids.end(), [](int id) { return Tokenizer::is_special(id); });
    if (tok.decode(ids) != s || !no_specials) ++failures;
  };
  for (int i = 0; i < 1000; ++i) {
    std::string s(rng() % 65, '\0');
    for (char& c : s) c = static_cast<char>(rng() % 256);
    check(s);
  }
  for (const auto& r : corpus.records()) {
    check(r.passage);
    for (const auto& u : r.urls) check(u);
  }
  report(9, hard(failures == 0),
         std::to_string(total) + " strings (1000 random byte strings, every passage and URL), " +
             std::to_string(failures) + " mismatches");
}

// ---------------------------------------------------------------------------
// 10. Determinism

void criterion_10() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.propagate_seed();
  cfg.threads = 2;
  cfg.train_eval_per_record = 2;
  cfg.stage1_train.max_steps = 300;
  cfg.stage2_train.max_steps = 150;
  cfg.single_train.max_steps = 300;
  cfg.stage1_train.warmup_steps = 50;
  cfg.stage2_train.warmup_steps = 20;
  cfg.single_train.warmup_steps = 50;
  for (TrainConfig* t : {&cfg.stage1_train, &cfg.stage2_train, &cfg.single_train}) t->eval_every = 100;
  std::vector<std::string> reports, hashes;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = kWork / ("determinism-" + std::to_string(run));
    fs::remove_all(out);
    std::cout << "  [determinism run " << run + 1 << "]" << std::endl;
    PipelineResult r = run_pipeline(cfg, out);
    reports.push_back(read_file(out / "eval_report.json"));
    std::string h;
    for (const char* kind : {"passage_gen", "url_gen", "single_stage"}) {
      const std::string recorded = r.artifacts["checkpoints"][kind]["sha256"];
      const std::string actual = sha256_hex(read_file(out / "checkpoints" / (std::string(kind) + ".ckpt")));
      if (recorded != actual) h += "<mismatch>";
      h += std::string(kind) + "=" + actual + ";";
    }
    hashes.push_back(h);
  }
  const bool same_report = reports[0] == reports[1];
  const bool same_ckpt = hashes[0] == hashes[1] && hashes[0].find("<mismatch>") == std::string::npos;
  report(10, hard(same_report && same_ckpt),
         std::string("EvalReport JSON ") + (same_report ? "identical" : "differs") + " (" +
             std::to_string(reports[0].size()) + " bytes), checkpoint hashes " + (same_ckpt ? "identical" : "differ"));
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("GENRET_ACCEPTANCE_ONLY")) {
    std::stringstream ss(env);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) only.insert(std::stoi(item));
    }
  }
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };
  if (!std::getenv("GENRET_ACCEPTANCE_KEEP")) fs::remove_all(kWork);
  fs::create_directories(kWork);

  const auto start = Clock::now();
  const std::vector<std::pair<int, std::function<void()>>> criteria = {
      {1, criterion_1}, {2, criterion_2}, {8, criterion_8}, {9, criterion_9}, {10, criterion_10},
      {6, criterion_6}, {7, criterion_7}, {3, [] { criterion_3(write_desk_corpus()); }},
      {4, [] { criterion_4(write_desk_corpus()); }}, {11, [] { criterion_11(write_desk_corpus()); }},
      {5, [] { criterion_5(write_desk_corpus()); }}};
  for (const auto& [id, fn] : criteria) {
    if (!wanted(id)) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, Status::fail, std::string("error: ") + e.what());
    }
  }

  int failed = 0, warned = 0;
  for (const auto& l : g_lines) {
    failed += l.status == Status::fail;
    warned += l.status == Status::warn;
  }
  std::cout << "acceptance: " << g_lines.size() << " lines, " << failed << " failed, " << warned << " warnings, "
            << fmt(seconds_since(start), 0) << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
