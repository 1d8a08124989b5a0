#include "genret/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "genret/augment.hpp"
#include "genret/checkpoint.hpp"
#include "genret/dataset.hpp"
#include "genret/eval.hpp"
#include "genret/pipeline.hpp"
#include "genret/text.hpp"

namespace genret {

namespace fs = std::filesystem;
using nlohmann::json;

json GridCell::to_json() const {
  return {{"study", study},
          {"cell_id", cell_id},
          {"corpus_size", corpus_size},
          {"model_tag", to_string(model_tag)},
          {"passage_trunc", passage_trunc},
          {"pseudo_query_count", pseudo_query_count},
          {"prompts", prompts},
          {"seed", seed}};
}

std::vector<GridCell> expand_grid(const GridConfig& grid) {
  grid.validate();
  std::vector<GridCell> cells;
  auto add = [&](const std::string& study, const std::string& value, auto&& mutate) {
    for (std::uint64_t seed : grid.seeds) {
      GridCell c;
      c.study = study;
      c.corpus_size = grid.base.corpus_size;
      c.model_tag = grid.base.model_tag;
      c.passage_trunc = grid.base.passage_trunc;
      c.pseudo_query_count = grid.base.pseudo_query_count;
      c.prompts = grid.base.prompts;
      c.seed = seed;
      mutate(c);
      c.cell_id = study + "-" + value + "-s" + std::to_string(seed);
      cells.push_back(std::move(c));
    }
  };
  for (int n : grid.corpus_sizes) add("corpus_size", std::to_string(n), [n](GridCell& c) { c.corpus_size = n; });
  for (SizeTag t : grid.model_tags) add("model_tag", std::string(to_string(t)), [t](GridCell& c) { c.model_tag = t; });
  for (int t : grid.passage_truncs) add("passage_trunc", std::to_string(t), [t](GridCell& c) { c.passage_trunc = t; });
  for (int k : grid.pseudo_query_counts) {
    add("pseudo_query_count", std::to_string(k), [k](GridCell& c) { c.pseudo_query_count = k; });
  }
  for (bool p : grid.prompts) add("prompts", p ? "on" : "off", [p](GridCell& c) { c.prompts = p; });
  return cells;
}

std::vector<std::string> nested_subsample(const Corpus& corpus, int n, std::uint64_t seed) {
  if (n < 1 || static_cast<std::size_t>(n) > corpus.size()) {
    throw ValidationError("cannot subsample " + std::to_string(n) + " records from a corpus of " +
                          std::to_string(corpus.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& r : corpus.records()) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(mix_seed(seed, std::string_view("subsample")));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

CellPlan plan_cell(const RunConfig& cfg, const GridCell& cell, int vocab_size) {
  CellPlan p;
  p.spec = cfg.specs.passage_gen;
  p.spec.passage_trunc = cell.passage_trunc;
  p.spec.use_prompts = cell.prompts;
  // Room for the title and prompt words on top of the passage budget.
  p.spec.target_max = std::max(p.spec.target_max, cell.passage_trunc + 24);
  p.spec.validate();
  p.model = ModelConfig::for_size(cell.model_tag, vocab_size, p.spec.source_max, p.spec.target_max);
  p.model.dropout = cfg.dropout;
  p.train = cfg.stage1_train;
  p.train.max_steps = cfg.grid.max_steps;
  p.train.eval_every = cfg.grid.eval_every;
  p.train.batch_size = cfg.grid.batch_size;
  p.train.warmup_steps = std::min(p.train.warmup_steps, std::max(1, cfg.grid.max_steps / 5));
  p.train.seed = mix_seed(cell.seed, std::string_view("grid"));
  p.augment = cfg.augment;
  p.augment.k = cell.pseudo_query_count;
  p.augment.seed = cell.seed;
  return p;
}

std::string curve_csv_header() {
  return "cell_id,study,corpus_size,model_tag,passage_trunc,pseudo_query_count,prompts,seed,step,loss,ppl,wall_ms\n";
}

std::string curve_csv_rows(const GridCell& cell, const std::vector<CurvePoint>& curve) {
  std::string out;
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%s,%d,%d,%d,%llu,%lld,%.17g,%.17g,%.1f\n", cell.cell_id.c_str(),
                  cell.study.c_str(), cell.corpus_size, std::string(to_string(cell.model_tag)).c_str(),
                  cell.passage_trunc, cell.pseudo_query_count, cell.prompts ? 1 : 0,
                  static_cast<unsigned long long>(cell.seed), static_cast<long long>(p.step), p.loss, p.ppl,
                  p.wall_ms);
    out += buf;
  }
  return out;
}

namespace {

std::vector<CurvePoint> parse_curve(const std::string& csv, std::int64_t max_step) {
  std::vector<CurvePoint> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw ValidationError("malformed curve row '" + line + "'");
    CurvePoint p{f[0], std::stoll(f[8]), std::stod(f[9]), std::stod(f[10]), std::stod(f[11])};
    if (p.step <= max_step) out.push_back(p);
  }
  return out;
}

CellOutcome run_cell(const RunConfig& cfg, const GridCell& cell, const Corpus& source, const Tokenizer& tok,
                     const fs::path& cell_dir, std::ostream* log, std::optional<std::int64_t> until_step) {
  CellOutcome out;
  out.cell = cell;
  const CellPlan plan = plan_cell(cfg, cell, tok.vocab_size());
  out.resolved = {{"cell", cell.to_json()},
                  {"spec", plan.spec.to_json()},
                  {"model", plan.model.to_json()},
                  {"train", plan.train.to_json()},
                  {"augment",
                   {{"k", plan.augment.k},
                    {"min_len", plan.augment.min_len},
                    {"max_len", plan.augment.max_len},
                    {"drop_prob", plan.augment.drop_prob},
                    {"shuffle_window", plan.augment.shuffle_window},
                    {"seed", plan.augment.seed}}},
                  {"eval_pairs", cfg.grid.eval_pairs},
                  {"tokenizer_hash", tok.hash()}};

  const Corpus subset = source.subset(nested_subsample(source, cell.corpus_size, cell.seed));
  out.corpus_hash = git_blob_sha1(corpus_to_jsonl(subset));
  out.resolved["corpus_hash"] = out.corpus_hash;
  const std::string key = sha256_hex(out.resolved.dump());

  const auto pseudo = build_augmented_set(subset, plan.augment);
  const auto pairs = build_stage1(pseudo, subset, plan.spec, tok);
  const auto eval = sample_pairs(pairs, static_cast<std::size_t>(cfg.grid.eval_pairs), plan.train.seed);

  fs::create_directories(cell_dir);
  const fs::path ckpt_path = cell_dir / "checkpoint.ckpt";
  const fs::path key_path = cell_dir / "key";
  const fs::path curve_path = cell_dir / "curve.csv";

  std::optional<Seq2SeqModel> model;
  AdamState adam;
  if (fs::exists(ckpt_path) && fs::exists(key_path) && read_file(key_path) == key && fs::exists(curve_path)) {
    Checkpoint ck = load_checkpoint(ckpt_path, tok.hash());
    if (ck.adam) {
      model.emplace(std::move(ck.model));
      adam = std::move(*ck.adam);
      out.curve = parse_curve(read_file(curve_path), model->step);
      if (log) *log << "  resuming " << cell.cell_id << " at step " << model->step << "\n";
    }
  }
  if (!model) {
    model.emplace(init_model(plan.model, mix_seed(plan.train.seed, std::string_view("init"))));
    model->tokenizer_hash = tok.hash();
    adam = AdamState::zeros_like(*model);
  }

  double window_loss = 0.0;
  int window_steps = 0;
  const double prior_ms = out.curve.empty() ? 0.0 : out.curve.back().wall_ms;
  const auto start = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_step = [&](const TrainStats& s) {
    window_loss += s.loss;
    ++window_steps;
  };
  hooks.on_eval = [&](const TrainStats& s) {
    const double ms =
        prior_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.curve.push_back({cell.cell_id, s.step, window_loss / std::max(1, window_steps), s.ppl.value_or(0.0), ms});
    window_loss = 0.0;
    window_steps = 0;
    write_file_atomic(key_path, key);
    save_checkpoint(ckpt_path, *model, &adam);
    write_file_atomic(curve_path, curve_csv_header() + curve_csv_rows(cell, out.curve));
    if (log) {
      *log << "  " << cell.cell_id << " step " << s.step << " loss " << out.curve.back().loss << " ppl "
           << out.curve.back().ppl << "\n"
           << std::flush;
    }
  };
  const std::int64_t stop = std::min<std::int64_t>(until_step.value_or(plan.train.max_steps), plan.train.max_steps);
  if (model->step < stop) train(*model, adam, pairs, eval, plan.train, hooks, stop);
  out.ok = true;
  return out;
}

}  // namespace

GridResult run_grid(const RunConfig& cfg, const Corpus& source, const Tokenizer& tok, const fs::path& out_dir,
                    std::ostream* log, std::optional<std::int64_t> until_step) {
  cfg.validate();
  const auto cells = expand_grid(cfg.grid);
  fs::create_directories(out_dir / "cells");
  GridResult result;
  for (const auto& cell : cells) {
    if (log) *log << "[cell " << cell.cell_id << "]\n" << std::flush;
    try {
      result.cells.push_back(run_cell(cfg, cell, source, tok, out_dir / "cells" / cell.cell_id, log, until_step));
    } catch (const std::exception& e) {
      CellOutcome failed;
      failed.cell = cell;
      failed.error = e.what();
      if (log) *log << "  cell failed: " << e.what() << "\n";
      result.cells.push_back(std::move(failed));
    }
  }

  std::map<std::string, std::string> studies;
  json manifest_cells = json::array();
  for (const auto& c : result.cells) {
    if (c.ok) {
      auto& csv = studies[c.cell.study];
      if (csv.empty()) csv = curve_csv_header();
      csv += curve_csv_rows(c.cell, c.curve);
    }
    json entry = {{"cell", c.cell.to_json()}, {"status", c.ok ? "ok" : "failed"}};
    if (!c.ok) entry["error"] = c.error;
    if (!c.resolved.is_null()) {
      entry["resolved"] = c.resolved;
      entry["config_hash"] = sha256_hex(c.resolved.dump());
      entry["corpus_hash"] = c.corpus_hash;
    }
    manifest_cells.push_back(std::move(entry));
  }
  for (const auto& [study, csv] : studies) write_file_atomic(out_dir / ("study_" + study + ".csv"), csv);
  result.manifest = {{"grid", cfg.grid.to_json()},
                     {"tokenizer_hash", tok.hash()},
                     {"source_corpus_hash", git_blob_sha1(corpus_to_jsonl(source))},
                     {"cells", manifest_cells}};
  write_file_atomic(out_dir / "manifest.json", result.manifest.dump(2) + "\n");
  return result;
}

std::vector<std::pair<AblationRow, RunConfig>> ablation_variants(const RunConfig& base) {
  std::vector<std::pair<AblationRow, RunConfig>> out;
  out.push_back({AblationRow{"base", "", nullptr, {}, {}, 0.0, 0, 0}, base});

  RunConfig no_prompts = base;
  no_prompts.specs.passage_gen.use_prompts = false;
  out.push_back({AblationRow{"no_prompts", "specs.passage_gen.use_prompts", false, {}, {}, 0.0, 0, 0}, no_prompts});

  RunConfig longer = base;
  longer.specs.passage_gen.passage_trunc =
      std::min(base.specs.passage_gen.passage_trunc * 4, base.specs.passage_gen.target_max);
  out.push_back({AblationRow{"increased_trunc", "specs.passage_gen.passage_trunc",
                             longer.specs.passage_gen.passage_trunc, {}, {}, 0.0, 0, 0},
                 longer});

  RunConfig fewer = base;
  fewer.augment.k = std::max(1, base.augment.k / 2);
  out.push_back({AblationRow{"reduced_queries", "augment.k", fewer.augment.k, {}, {}, 0.0, 0, 0}, fewer});
  return out;
}

std::vector<AblationRow> run_ablations(const RunConfig& base, const Corpus& corpus,
                                       const std::vector<QueryRecord>& eval_queries,
                                       const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                       std::ostream* log) {
  base.validate();
  if (seeds.empty()) throw ValidationError("ablations need at least one seed");
  auto variants = ablation_variants(base);
  for (auto& [row, cfg] : variants) {
    // Only dev queries are scored here; a reduced k must not trip the training-query check.
    cfg.train_eval_per_record = 0;
    cfg.validate();
    row.seeds = seeds;
    row.stage1_steps = cfg.stage1_train.max_steps;
    row.stage2_steps = cfg.stage2_train.max_steps;
  }
  check_queries(eval_queries, corpus);
  const Labels labels = labels_from_queries(eval_queries, corpus);
  const fs::path models = out_dir / "models";
  const std::string cache = base.model_cache.empty() ? (models / "cache").string() : base.model_cache;

  for (std::uint64_t seed : seeds) {
    RunConfig seeded_base = base;
    seeded_base.seed = seed;
    seeded_base.propagate_seed();
    const Tokenizer tok = build_tokenizer(seeded_base, corpus);
    for (auto& [row, variant] : variants) {
      RunConfig cfg = variant;
      cfg.seed = seed;
      cfg.propagate_seed();
      if (log) *log << "[ablation " << row.variant << " seed " << seed << "]\n" << std::flush;
      const StageData data = build_stage_data(cfg, corpus, tok);
      const std::string prefix = row.variant + "-s" + std::to_string(seed) + "-";
      auto fit = [&](const std::string& kind, const ModelConfig& mc, const TrainConfig& tc,
                     const std::vector<TrainingPair>& pairs) {
        const auto eval = sample_pairs(pairs, static_cast<std::size_t>(cfg.eval_pairs), tc.seed);
        TrainJob job{kind, mc, tc, &pairs, &eval, tok.hash()};
        return train_or_resume(job, models / (prefix + kind + ".ckpt"), cache);
      };
      const int vocab = tok.vocab_size();
      TrainedModel s1 = fit("passage_gen", cfg.stage1_model(vocab), cfg.stage1_train, data.stage1);
      TrainedModel s2 = fit("url_gen", cfg.stage2_model(vocab), cfg.stage2_train, data.stage2);
      const auto results = retrieve_two_stage(s1.model, s2.model, eval_queries, cfg.specs, tok, cfg.threads);
      const double hits = hits_at_1(results, labels).hits_at_1;
      row.hits_per_seed.push_back(hits);
      if (log) *log << "  hits@1 " << hits << "\n" << std::flush;
    }
  }
  std::vector<AblationRow> rows;
  for (auto& [row, cfg] : variants) {
    row.hits_mean = std::accumulate(row.hits_per_seed.begin(), row.hits_per_seed.end(), 0.0) /
                    static_cast<double>(row.hits_per_seed.size());
    rows.push_back(row);
  }
  write_file_atomic(out_dir / "ablations.csv", ablations_to_csv(rows));
  return rows;
}

std::string ablations_to_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,field,value,seeds,hits_per_seed,hits_at_1_mean,stage1_steps,stage2_steps\n";
  char buf[64];
  for (const auto& r : rows) {
    std::string seeds, hits;
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      if (i) seeds += ';';
      seeds += std::to_string(r.seeds[i]);
    }
    for (std::size_t i = 0; i < r.hits_per_seed.size(); ++i) {
      if (i) hits += ';';
      std::snprintf(buf, sizeof buf, "%.6f", r.hits_per_seed[i]);
      hits += buf;
    }
    std::snprintf(buf, sizeof buf, "%.6f", r.hits_mean);
    out += r.variant + "," + r.field + "," + (r.value.is_null() ? std::string() : r.value.dump()) + "," + seeds +
           "," + hits + "," + buf + "," + std::to_string(r.stage1_steps) + "," + std::to_string(r.stage2_steps) +
           "\n";
  }
  return out;
}

}  // namespace genret
