#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genret/augment.hpp"
#include "genret/corpus.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

enum class Stage { passage_gen, url_gen };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

/// Length budget and formatting for one stage. passage_trunc and use_prompts
/// describe the passage formatting, which stage 2 reuses for its sources.
struct StageSpec {
  Stage stage = Stage::passage_gen;
  int source_max = 32;
  int target_max = 64;
  bool use_prompts = true;
  int passage_trunc = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static StageSpec from_json(const nlohmann::json& j);
};

/// Query -> passage and passage -> URL specs. Stage 2's source budget equals
/// stage 1's target budget so decoded stage-1 output always fits.
struct PipelineSpecs {
  StageSpec passage_gen = {Stage::passage_gen, 32, 64, true, 32};
  StageSpec url_gen = {Stage::url_gen, 64, 80, true, 32};

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineSpecs from_json(const nlohmann::json& j);
};

struct PairMeta {
  std::string source_id;
  std::string passage_id;
  std::string url;
};

struct TrainingPair {
  TokenSequence source;
  TokenSequence target;
  PairMeta meta;
};

inline constexpr std::string_view kTitlePrefix = "title: ";
inline constexpr std::string_view kPassagePrefix = " passage: ";

/// First passage_trunc tokens of the passage, as text.
std::string truncate_passage(std::string_view passage, int passage_trunc, const Tokenizer& tok);

/// "title: {title} passage: {truncated passage}", or "{title} {truncated passage}"
/// without prompts. Not yet cut to target_max.
std::string format_passage_text(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok);

TokenSequence format_stage1_target(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok);

/// decode(format_stage1_target(...)): exactly what stage 1 is trained to emit
/// and what stage 2 reads.
std::string stage1_target_text(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok);

std::vector<TrainingPair> build_stage1(const std::vector<PseudoQuery>& queries, const Corpus& corpus,
                                       const StageSpec& spec, const Tokenizer& tok);

/// One pair per record: formatted stage-1 target text -> assigned URL.
std::vector<TrainingPair> build_stage2(const Corpus& corpus, const PipelineSpecs& specs, const Tokenizer& tok);

/// Pseudo query -> URL, for the single-stage variant.
std::vector<TrainingPair> build_single_stage(const std::vector<PseudoQuery>& queries, const Corpus& corpus,
                                             const PipelineSpecs& specs, const Tokenizer& tok);

struct DatasetFile {
  std::string kind;  // passage_gen, url_gen or single_stage
  nlohmann::json spec;
  std::string tokenizer_hash;
  std::vector<TrainingPair> pairs;
};

/// JSONL: a header line {format, version, kind, spec, tokenizer_hash, count}
/// followed by one {source, target, source_id, passage_id, url} line per pair.
std::string dataset_to_jsonl(const DatasetFile& data);
/// Throws ValidationError when expected_tokenizer_hash is non-empty and differs.
DatasetFile parse_dataset(std::string_view jsonl, std::string_view expected_tokenizer_hash = {});
DatasetFile read_dataset(const std::filesystem::path& path, std::string_view expected_tokenizer_hash = {});

}  // namespace genret
