#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genret/bm25.hpp"
#include "genret/dataset.hpp"
#include "genret/model.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

enum class Method { two_stage, single_stage, bm25 };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct RetrievalResult {
  std::string query_id;
  std::string predicted_url;
  std::optional<std::string> intermediate_passage;
  std::vector<double> per_step_logprobs;
  Method method = Method::two_stage;

  double logprob_sum() const;
  nlohmann::json to_json() const;
  static RetrievalResult from_json(const nlohmann::json& j);
};

struct Decoded {
  std::vector<int> ids;  // generated ids, EOS included when emitted
  std::string text;
  std::vector<double> logprobs;  // log p of each generated id
};

/// Scores the next token given the ids generated so far.
using NextTokenScorer = std::function<Eigen::VectorXf(std::span<const int> prefix)>;

/// Greedy decoding: PAD, BOS and UNK are never emitted; the highest-scoring
/// content token wins with ties going to the lowest id, and EOS is taken only
/// when it scores strictly higher. Stops after EOS or max_len tokens.
Decoded greedy_decode(const NextTokenScorer& scorer, std::size_t max_len, const Tokenizer& tok);
Decoded greedy_decode(const Seq2SeqModel& model, const TokenSequence& source, std::size_t max_len,
                      const Tokenizer& tok);

/// query -> passage (stage 1) -> URL (stage 2). Stage-1 output is capped at
/// passage_gen.target_max tokens and re-encoded within url_gen.source_max.
RetrievalResult two_stage_retrieve(const Seq2SeqModel& stage1, const Seq2SeqModel& stage2, std::string_view query_id,
                                   std::string_view query, const PipelineSpecs& specs, const Tokenizer& tok);

/// query -> URL with one model.
RetrievalResult single_stage_retrieve(const Seq2SeqModel& model, std::string_view query_id, std::string_view query,
                                      const PipelineSpecs& specs, const Tokenizer& tok);

/// Top-1 BM25 passage mapped to its assigned URL; empty URL when nothing matches.
RetrievalResult bm25_retrieve_url(const Bm25Index& index, const Corpus& corpus, std::string_view query_id,
                                  std::string_view query);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers; results keep index order.
std::vector<RetrievalResult> parallel_retrieve(std::size_t n, int threads,
                                               const std::function<RetrievalResult(std::size_t)>& fn);

std::string results_to_jsonl(const std::vector<RetrievalResult>& results);
std::vector<RetrievalResult> parse_results_jsonl(std::string_view jsonl);

}  // namespace genret
