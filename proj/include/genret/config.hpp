#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genret/augment.hpp"
#include "genret/dataset.hpp"
#include "genret/model.hpp"
#include "genret/synth.hpp"
#include "genret/train.hpp"

namespace genret {

/// Values of the non-varied axes in a grid study.
struct GridBase {
  int corpus_size = 1000;
  SizeTag model_tag = SizeTag::tiny;
  int passage_trunc = 32;
  int pseudo_query_count = 20;
  bool prompts = true;
};

/// One study per non-empty axis; each study varies that axis and holds the
/// rest at `base`.
struct GridConfig {
  std::vector<int> corpus_sizes = {100, 1000, 5000};
  std::vector<SizeTag> model_tags = {SizeTag::tiny, SizeTag::small, SizeTag::medium};
  std::vector<int> passage_truncs = {16, 32, 64};
  std::vector<int> pseudo_query_counts = {5, 10, 20};
  std::vector<bool> prompts = {true, false};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  GridBase base;
  int max_steps = 300;
  int eval_every = 50;
  int batch_size = 16;
  // Perplexity is measured on this many training pairs, sampled once per cell.
  int eval_pairs = 256;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Everything a run needs. Each field has a default; a config file overrides
/// any subset, and CLI flags override the file.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  // Corpus JSONL and queries TSV; empty means synthesize.
  std::string corpus_path;
  std::string queries_path;
  SynthConfig synth;
  int vocab_size = 2048;
  AugmentConfig augment;
  PipelineSpecs specs;
  SizeTag model_size = SizeTag::tiny;
  double dropout = 0.0;
  TrainConfig stage1_train;
  TrainConfig stage2_train;
  TrainConfig single_train;
  // Train pairs used for the periodic perplexity probe.
  int eval_pairs = 256;
  // Pseudo queries (per record, from the training set) scored after training.
  int train_eval_per_record = 0;
  bool skip_training = false;
  // Directory of checkpoints shared across runs, keyed by content hash.
  std::string model_cache;
  GridConfig grid;

  RunConfig();

  /// Checks every module's preconditions.
  void validate() const;
  nlohmann::json to_json() const;
  /// Defaults overlaid with `j`. Unknown keys are a ValidationError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  /// Per-stage model configuration derived from model_size and the specs.
  ModelConfig stage1_model(int vocab) const;
  ModelConfig stage2_model(int vocab) const;
  ModelConfig single_model(int vocab) const;

  /// Seeds for sub-configs are derived from `seed`; call after changing it.
  void propagate_seed();
};

/// Applies "a.b.c=value" to `j`; value is parsed as JSON, else taken as a string.
void apply_override(nlohmann::json& j, std::string_view assignment);

}  // namespace genret
