#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "genret/config.hpp"
#include "genret/corpus.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

/// One training run of a grid study. `study` names the varied axis.
struct GridCell {
  std::string study;
  std::string cell_id;
  int corpus_size = 0;
  SizeTag model_tag = SizeTag::tiny;
  int passage_trunc = 0;
  int pseudo_query_count = 0;
  bool prompts = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct CurvePoint {
  std::string cell_id;
  std::int64_t step = 0;
  double loss = 0.0;  // mean training loss over the steps since the previous point
  double ppl = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kStudyAxes[] = {"corpus_size", "model_tag", "passage_trunc", "pseudo_query_count",
                                             "prompts"};

/// Cells of every non-empty axis study, times every seed.
std::vector<GridCell> expand_grid(const GridConfig& grid);

/// First n ids of a seeded permutation of the sorted ids, so a smaller size
/// is always a subset of a larger one under the same seed.
std::vector<std::string> nested_subsample(const Corpus& corpus, int n, std::uint64_t seed);

/// Resolved stage-1 spec, model and training configs for a cell.
struct CellPlan {
  StageSpec spec;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment;
};
CellPlan plan_cell(const RunConfig& cfg, const GridCell& cell, int vocab_size);

struct CellOutcome {
  GridCell cell;
  bool ok = false;
  std::string error;
  std::vector<CurvePoint> curve;
  std::string corpus_hash;  // git blob hash of the subset's JSONL
  nlohmann::json resolved;
};

struct GridResult {
  std::vector<CellOutcome> cells;
  nlohmann::json manifest;
};

/// Header of every curve CSV.
std::string curve_csv_header();
std::string curve_csv_rows(const GridCell& cell, const std::vector<CurvePoint>& curve);

/// Trains stage 1 for every cell, writing cells/<id>/curve.csv, one
/// study_<axis>.csv per study and manifest.json. Cells resume from their
/// checkpoints; a failing cell is recorded and the rest still run.
/// `until_step` stops every cell early (a partial run that a later call resumes).
GridResult run_grid(const RunConfig& cfg, const Corpus& source, const Tokenizer& tok, const std::filesystem::path& out_dir,
                    std::ostream* log = nullptr, std::optional<std::int64_t> until_step = std::nullopt);

struct AblationRow {
  std::string variant;
  std::string field;  // config field that differs from base, empty for base
  nlohmann::json value;
  std::vector<std::uint64_t> seeds;
  std::vector<double> hits_per_seed;
  double hits_mean = 0.0;
  int stage1_steps = 0;
  int stage2_steps = 0;
};

/// Variant configs: base, prompts off, passage_trunc raised (x4, capped at
/// the stage-1 target budget) and pseudo-query count halved.
std::vector<std::pair<AblationRow, RunConfig>> ablation_variants(const RunConfig& base);

/// Two-stage Hits@1 on `eval_queries` for each variant and seed; writes
/// ablations.csv. Models are cached under out_dir/models.
std::vector<AblationRow> run_ablations(const RunConfig& base, const Corpus& corpus,
                                       const std::vector<QueryRecord>& eval_queries,
                                       const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                       std::ostream* log = nullptr);

std::string ablations_to_csv(const std::vector<AblationRow>& rows);

}  // namespace genret
