#include "genret/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "genret/augment.hpp"
#include "genret/bm25.hpp"
#include "genret/checkpoint.hpp"
#include "genret/synth.hpp"
#include "genret/text.hpp"

namespace genret {

namespace fs = std::filesystem;
using nlohmann::json;

Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.corpus_path.empty()) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    SynthCorpus s = synth_corpus(sc);
    Corpus corpus(std::move(s.records));
    return {std::move(corpus), std::move(s.queries)};
  }
  Inputs in{ingest_corpus(cfg.corpus_path, cfg.seed), read_queries_tsv(cfg.queries_path)};
  check_queries(in.queries, in.corpus);
  return in;
}

Tokenizer build_tokenizer(const RunConfig& cfg, const Corpus& corpus) {
  return train_tokenizer(corpus, cfg.vocab_size, cfg.seed);
}

StageData build_stage_data(const RunConfig& cfg, const Corpus& corpus, const Tokenizer& tok) {
  StageData d;
  AugmentConfig ac = cfg.augment;
  ac.seed = cfg.seed;
  d.pseudo_queries = build_augmented_set(corpus, ac);
  d.stage1 = build_stage1(d.pseudo_queries, corpus, cfg.specs.passage_gen, tok);
  d.stage2 = build_stage2(corpus, cfg.specs, tok);
  d.single = build_single_stage(d.pseudo_queries, corpus, cfg.specs, tok);
  return d;
}

std::vector<TrainingPair> sample_pairs(const std::vector<TrainingPair>& data, std::size_t n, std::uint64_t seed) {
  if (data.size() <= n) return data;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, std::string_view("eval_sample")));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<TrainingPair> out;
  out.reserve(n);
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

std::string TrainJob::key() const {
  std::string blob = json{{"kind", kind},
                          {"model", model.to_json()},
                          {"train", train.to_json()},
                          {"tokenizer_hash", tokenizer_hash}}
                         .dump();
  auto add_pairs = [&blob](const std::vector<TrainingPair>* pairs) {
    blob += "|";
    if (!pairs) return;
    for (const auto& p : *pairs) {
      for (int id : p.source.ids) blob += std::to_string(id) + ",";
      blob += ">";
      for (int id : p.target.ids) blob += std::to_string(id) + ",";
      blob += ";";
    }
  };
  add_pairs(data);
  add_pairs(eval_data);
  return sha256_hex(blob);
}

namespace {

std::string log_to_csv(const std::vector<TrainStats>& log) {
  std::string out = stats_csv_header();
  for (const auto& s : log) out += stats_csv_row(s);
  return out;
}

std::vector<TrainStats> parse_log_csv(const std::string& csv, std::int64_t max_step) {
  std::vector<TrainStats> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 3) throw ValidationError("malformed training log row '" + line + "'");
    TrainStats s;
    s.step = std::stoll(f[0]);
    s.loss = std::stod(f[1]);
    s.lr = std::stod(f[2]);
    if (f.size() > 3 && !f[3].empty()) s.ppl = std::stod(f[3]);
    if (s.step <= max_step) out.push_back(s);
  }
  return out;
}

fs::path sidecar(const fs::path& p, const char* suffix) { return fs::path(p.string() + suffix); }

}  // namespace

TrainedModel train_or_resume(const TrainJob& job, const fs::path& ckpt_path, const std::string& cache_dir,
                             const std::function<void(const TrainStats&)>& progress) {
  if (!job.data || job.data->empty()) throw ValidationError(job.kind + ": no training data");
  job.model.validate();
  job.train.validate();
  const std::string key = job.key();
  const fs::path key_path = sidecar(ckpt_path, ".key");
  const fs::path log_path = sidecar(ckpt_path, ".log.csv");
  if (!ckpt_path.parent_path().empty()) fs::create_directories(ckpt_path.parent_path());

  TrainedModel out;
  // A finished model in the shared cache wins.
  if (!cache_dir.empty()) {
    const fs::path cached = fs::path(cache_dir) / (key + ".ckpt");
    if (fs::exists(cached) && fs::exists(sidecar(cached, ".log.csv"))) {
      const std::string bytes = read_file(cached);
      Checkpoint ck = parse_checkpoint(bytes, job.tokenizer_hash);
      if (ck.model.step == job.train.max_steps) {
        write_file_atomic(ckpt_path, bytes);
        write_file_atomic(log_path, read_file(sidecar(cached, ".log.csv")));
        write_file_atomic(key_path, key);
        out.model = std::move(ck.model);
        out.checkpoint_sha256 = sha256_hex(bytes);
        out.log = parse_log_csv(read_file(log_path), out.model.step);
        out.reused = true;
        return out;
      }
    }
  }

  std::optional<Seq2SeqModel> model;
  AdamState adam;
  if (fs::exists(ckpt_path) && fs::exists(key_path) && read_file(key_path) == key) {
    Checkpoint ck = load_checkpoint(ckpt_path, job.tokenizer_hash);
    if (ck.adam) {
      model.emplace(std::move(ck.model));
      adam = std::move(*ck.adam);
      if (fs::exists(log_path)) out.log = parse_log_csv(read_file(log_path), model->step);
      out.reused = model->step == job.train.max_steps;
    }
  }
  if (!model) {
    model.emplace(init_model(job.model, mix_seed(job.train.seed, std::string_view("init"))));
    model->tokenizer_hash = job.tokenizer_hash;
    adam = AdamState::zeros_like(*model);
    out.log.clear();
  }

  auto save = [&] {
    write_file_atomic(key_path, key);
    save_checkpoint(ckpt_path, *model, &adam);
    write_file_atomic(log_path, log_to_csv(out.log));
  };
  TrainHooks hooks;
  hooks.on_step = [&](const TrainStats& s) {
    out.log.push_back(s);
    if (progress) progress(s);
  };
  hooks.on_eval = [&](const TrainStats&) { save(); };
  if (model->step < job.train.max_steps) {
    const std::vector<TrainingPair> none;
    train(*model, adam, *job.data, job.eval_data ? *job.eval_data : none, job.train, hooks);
  }
  if (!fs::exists(ckpt_path)) save();

  const std::string bytes = read_file(ckpt_path);
  out.checkpoint_sha256 = sha256_hex(bytes);
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    const fs::path cached = fs::path(cache_dir) / (key + ".ckpt");
    write_file_atomic(cached, bytes);
    write_file_atomic(sidecar(cached, ".log.csv"), read_file(log_path));
  }
  out.model = std::move(*model);
  return out;
}

std::vector<RetrievalResult> retrieve_two_stage(const Seq2SeqModel& stage1, const Seq2SeqModel& stage2,
                                                const std::vector<QueryRecord>& queries, const PipelineSpecs& specs,
                                                const Tokenizer& tok, int threads) {
  return parallel_retrieve(queries.size(), threads, [&](std::size_t i) {
    return two_stage_retrieve(stage1, stage2, queries[i].query_id, queries[i].text, specs, tok);
  });
}

std::vector<RetrievalResult> retrieve_single_stage(const Seq2SeqModel& model, const std::vector<QueryRecord>& queries,
                                                   const PipelineSpecs& specs, const Tokenizer& tok, int threads) {
  return parallel_retrieve(queries.size(), threads, [&](std::size_t i) {
    return single_stage_retrieve(model, queries[i].query_id, queries[i].text, specs, tok);
  });
}

std::vector<RetrievalResult> retrieve_bm25(const Corpus& corpus, const std::vector<QueryRecord>& queries) {
  const Bm25Index index(corpus);
  std::vector<RetrievalResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(bm25_retrieve_url(index, corpus, q.query_id, q.text));
  return out;
}

std::vector<QueryRecord> training_queries(const std::vector<PseudoQuery>& pseudo, int per_record) {
  std::vector<QueryRecord> out;
  std::map<std::string, int, std::less<>> seen;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const auto& pq = pseudo[i];
    if (seen[pq.passage_id]++ >= per_record) continue;
    out.push_back({"pq" + std::to_string(i), pq.text, {pq.passage_id}});
  }
  return out;
}

json PipelineResult::eval_report() const {
  json methods = json::object();
  if (two_stage) methods["two_stage"] = two_stage->to_json();
  if (single_stage) methods["single_stage"] = single_stage->to_json();
  methods["bm25"] = bm25.to_json();
  json j = {{"methods", methods}};
  if (two_stage_train) j["two_stage_train_queries"] = two_stage_train->to_json();
  return j;
}

namespace {

template <class Fn>
auto run_stage(const std::string& name, const fs::path& out_dir, std::ostream* log, Fn&& fn) {
  if (log) *log << "[" << name << "]\n" << std::flush;
  const std::string suffix = " (artifacts kept in " + out_dir.string() + ")";
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "' failed: " + e.what() + suffix);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure("stage '" + name + "' failed: " + e.what() + suffix);
  } catch (const std::exception& e) {
    throw RuntimeFailure("stage '" + name + "' failed: " + e.what() + suffix);
  }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const fs::path& out_dir, std::ostream* log) {
  cfg.validate();
  fs::create_directories(out_dir);
  PipelineResult result;
  json& art = result.artifacts;
  write_file_atomic(out_dir / "config.json", cfg.to_json().dump(2) + "\n");

  Inputs in = run_stage("ingest", out_dir, log, [&] {
    Inputs i = load_inputs(cfg);
    write_file_atomic(out_dir / "corpus.jsonl", corpus_to_jsonl(i.corpus));
    write_file_atomic(out_dir / "queries.tsv", queries_to_tsv(i.queries));
    return i;
  });
  art["corpus"] = (out_dir / "corpus.jsonl").string();
  art["queries"] = (out_dir / "queries.tsv").string();

  Tokenizer tok = run_stage("train-tokenizer", out_dir, log, [&] {
    Tokenizer t = build_tokenizer(cfg, in.corpus);
    write_file_atomic(out_dir / "tokenizer.json", t.to_json());
    return t;
  });
  art["tokenizer"] = (out_dir / "tokenizer.json").string();
  art["tokenizer_hash"] = tok.hash();

  const Labels labels = labels_from_queries(in.queries, in.corpus);
  write_file_atomic(out_dir / "labels.jsonl", labels_to_jsonl(labels));

  result.bm25 = run_stage("bm25", out_dir, log, [&] {
    auto results = retrieve_bm25(in.corpus, in.queries);
    write_file_atomic(out_dir / "results_bm25.jsonl", results_to_jsonl(results));
    return hits_at_1(results, labels);
  });

  if (!cfg.skip_training) {
    StageData data = run_stage("augment", out_dir, log, [&] {
      StageData d = build_stage_data(cfg, in.corpus, tok);
      write_file_atomic(out_dir / "pseudo_queries.tsv", pseudo_queries_to_tsv(d.pseudo_queries));
      const std::pair<const char*, const std::vector<TrainingPair>*> files[] = {
          {"passage_gen", &d.stage1}, {"url_gen", &d.stage2}, {"single_stage", &d.single}};
      fs::create_directories(out_dir / "data");
      for (const auto& [kind, pairs] : files) {
        DatasetFile f;
        f.kind = kind;
        f.spec = cfg.specs.to_json();
        f.tokenizer_hash = tok.hash();
        f.pairs = *pairs;
        write_file_atomic(out_dir / "data" / (std::string(kind) + ".jsonl"), dataset_to_jsonl(f));
      }
      return d;
    });

    auto train_stage = [&](const std::string& kind, const ModelConfig& mc, const TrainConfig& tc,
                           const std::vector<TrainingPair>& pairs) {
      return run_stage("train " + kind, out_dir, log, [&] {
        const auto eval = sample_pairs(pairs, static_cast<std::size_t>(cfg.eval_pairs), tc.seed);
        TrainJob job{kind, mc, tc, &pairs, &eval, tok.hash()};
        auto progress = [&](const TrainStats& s) {
          if (log && s.ppl) {
            *log << "  " << kind << " step " << s.step << " loss " << std::fixed << std::setprecision(4) << s.loss
                 << " ppl " << *s.ppl << std::defaultfloat << "\n"
                 << std::flush;
          }
        };
        const fs::path ckpt = out_dir / "checkpoints" / (kind + ".ckpt");
        TrainedModel tm = train_or_resume(job, ckpt, cfg.model_cache, progress);
        art["checkpoints"][kind] = {{"path", ckpt.string()}, {"sha256", tm.checkpoint_sha256}};
        return tm;
      });
    };
    const int vocab = tok.vocab_size();
    TrainedModel s1 = train_stage("passage_gen", cfg.stage1_model(vocab), cfg.stage1_train, data.stage1);
    TrainedModel s2 = train_stage("url_gen", cfg.stage2_model(vocab), cfg.stage2_train, data.stage2);
    TrainedModel single = train_stage("single_stage", cfg.single_model(vocab), cfg.single_train, data.single);

    run_stage("retrieve", out_dir, log, [&] {
      auto two = retrieve_two_stage(s1.model, s2.model, in.queries, cfg.specs, tok, cfg.threads);
      auto one = retrieve_single_stage(single.model, in.queries, cfg.specs, tok, cfg.threads);
      write_file_atomic(out_dir / "results_two_stage.jsonl", results_to_jsonl(two));
      write_file_atomic(out_dir / "results_single_stage.jsonl", results_to_jsonl(one));

      const FormattedTargetIndex targets(in.corpus, cfg.specs.passage_gen, tok);
      EvalReport two_report = hits_at_1(two, labels);
      membership_analysis(two, targets, two_report);
      write_file_atomic(out_dir / "traces.jsonl", export_traces(two, in.queries, in.corpus, two_report));
      result.two_stage = std::move(two_report);
      result.single_stage = hits_at_1(one, labels);

      if (cfg.train_eval_per_record > 0) {
        const auto train_queries = training_queries(data.pseudo_queries, cfg.train_eval_per_record);
        auto tr = retrieve_two_stage(s1.model, s2.model, train_queries, cfg.specs, tok, cfg.threads);
        EvalReport rep = hits_at_1(tr, labels_from_queries(train_queries, in.corpus));
        membership_analysis(tr, targets, rep);
        result.two_stage_train = std::move(rep);
      }
      return 0;
    });
  }

  write_file_atomic(out_dir / "eval_report.json", result.eval_report().dump(2) + "\n");
  art["eval_report"] = (out_dir / "eval_report.json").string();
  write_file_atomic(out_dir / "manifest.json", art.dump(2) + "\n");
  return result;
}

std::string format_summary(const PipelineResult& result) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "method" << std::setw(10) << "hits@1" << "queries\n";
  auto row = [&out](const char* name, const std::optional<EvalReport>& r) {
    out << std::left << std::setw(14) << name;
    if (r) {
      out << std::setw(10) << std::fixed << std::setprecision(4) << r->hits_at_1 << r->n_queries << "\n";
    } else {
      out << std::setw(10) << "skipped" << "-\n";
    }
  };
  row("two_stage", result.two_stage);
  row("single_stage", result.single_stage);
  row("bm25", result.bm25);
  if (result.two_stage && result.two_stage->membership_rate) {
    out << "membership_rate " << std::fixed << std::setprecision(4) << *result.two_stage->membership_rate << "\n";
  }
  if (result.two_stage_train) {
    out << "two_stage hits@1 on training pseudo queries " << std::fixed << std::setprecision(4)
        << result.two_stage_train->hits_at_1 << " (membership " << result.two_stage_train->membership_rate.value_or(0)
        << ")\n";
  }
  return out.str();
}

}  // namespace genret
