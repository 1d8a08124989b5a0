#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "genret/config.hpp"
#include "genret/corpus.hpp"
#include "genret/eval.hpp"
#include "genret/retrieve.hpp"
#include "genret/tokenizer.hpp"
#include "genret/train.hpp"

namespace genret {

struct Inputs {
  Corpus corpus;
  std::vector<QueryRecord> queries;
};

/// Reads corpus_path/queries_path, or synthesizes when both are empty.
Inputs load_inputs(const RunConfig& cfg);

/// Byte-level BPE trained on the corpus with cfg.vocab_size and cfg.seed.
Tokenizer build_tokenizer(const RunConfig& cfg, const Corpus& corpus);

struct StageData {
  std::vector<PseudoQuery> pseudo_queries;
  std::vector<TrainingPair> stage1;
  std::vector<TrainingPair> stage2;
  std::vector<TrainingPair> single;
};

StageData build_stage_data(const RunConfig& cfg, const Corpus& corpus, const Tokenizer& tok);

/// Up to n pairs chosen by a seeded draw, kept in data order.
std::vector<TrainingPair> sample_pairs(const std::vector<TrainingPair>& data, std::size_t n, std::uint64_t seed);

struct TrainJob {
  std::string kind;  // passage_gen, url_gen, single_stage, ...
  ModelConfig model;
  TrainConfig train;
  const std::vector<TrainingPair>* data = nullptr;
  const std::vector<TrainingPair>* eval_data = nullptr;
  std::string tokenizer_hash;

  /// sha256 over kind, configs, tokenizer hash and the training pairs.
  std::string key() const;
};

struct TrainedModel {
  Seq2SeqModel model{ModelConfig{}};
  std::string checkpoint_sha256;
  std::vector<TrainStats> log;
  bool reused = false;
};

/// Trains `job` with checkpoints at `ckpt_path` (Adam state included, written
/// at every eval step). An existing checkpoint with the same job key resumes
/// or, if finished, is reused. With a non-empty cache_dir, finished models
/// are also looked up in and copied to cache_dir/{key}.ckpt.
TrainedModel train_or_resume(const TrainJob& job, const std::filesystem::path& ckpt_path,
                             const std::string& cache_dir = {},
                             const std::function<void(const TrainStats&)>& progress = {});

/// Runs one retrieval method over `queries` with cfg.threads workers.
std::vector<RetrievalResult> retrieve_two_stage(const Seq2SeqModel& stage1, const Seq2SeqModel& stage2,
                                                const std::vector<QueryRecord>& queries, const PipelineSpecs& specs,
                                                const Tokenizer& tok, int threads);
std::vector<RetrievalResult> retrieve_single_stage(const Seq2SeqModel& model, const std::vector<QueryRecord>& queries,
                                                   const PipelineSpecs& specs, const Tokenizer& tok, int threads);
std::vector<RetrievalResult> retrieve_bm25(const Corpus& corpus, const std::vector<QueryRecord>& queries);

/// The first `per_record` pseudo queries of every record, as labeled queries
/// with ids "pq{index}" matching the stage-1 dataset.
std::vector<QueryRecord> training_queries(const std::vector<PseudoQuery>& pseudo, int per_record);

struct PipelineResult {
  std::optional<EvalReport> two_stage;
  std::optional<EvalReport> single_stage;
  EvalReport bm25;
  // Two-stage on training pseudo queries, when train_eval_per_record > 0.
  std::optional<EvalReport> two_stage_train;
  nlohmann::json artifacts;

  /// Deterministic report over all methods (no timings, no paths).
  nlohmann::json eval_report() const;
};

/// synth/ingest -> tokenizer -> augment -> datasets -> train -> retrieve -> eval,
/// writing every artifact under out_dir. A failing stage is reported as
/// "stage '<name>' failed" with the artifact directory, keeping its error type.
PipelineResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// "method  hits@1  n" rows for printing.
std::string format_summary(const PipelineResult& result);

}  // namespace genret
