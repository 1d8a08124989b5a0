#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genret/corpus.hpp"
#include "genret/dataset.hpp"
#include "genret/retrieve.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

/// query_id -> acceptable URL texts.
using Labels = std::map<std::string, std::set<std::string>, std::less<>>;

/// Assigned URLs of each query's positive passages.
Labels labels_from_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus);
std::string labels_to_jsonl(const Labels& labels);
Labels parse_labels_jsonl(std::string_view jsonl);

struct QueryOutcome {
  std::string query_id;
  bool correct = false;
  std::string predicted_url;
  std::vector<std::string> label_urls;
  std::optional<bool> passage_in_corpus;
  std::optional<std::string> generated_passage;
};

struct EvalReport {
  std::string method;
  double hits_at_1 = 0.0;
  std::size_t n_queries = 0;
  std::optional<double> membership_rate;
  std::optional<double> membership_rate_on_misses;
  // Misses whose stage-1 output was empty; excluded from the misses ratio.
  std::size_t empty_stage1_misses = 0;
  std::vector<QueryOutcome> per_query;  // sorted by query_id

  nlohmann::json to_json() const;
  nlohmann::json per_query_json() const;
  std::string per_query_jsonl() const;
};

/// Exact match after normalize_text. Throws ValidationError for an empty
/// result list or a result without a label entry.
EvalReport hits_at_1(const std::vector<RetrievalResult>& results, const Labels& labels);

/// Normalized stage-1 target texts of every record, the space stage 1 is
/// trained to emit.
class FormattedTargetIndex {
 public:
  FormattedTargetIndex(const Corpus& corpus, const StageSpec& passage_spec, const Tokenizer& tok);
  std::set<std::string> lookup(std::string_view text) const;
  bool contains(std::string_view text) const { return !lookup(text).empty(); }
  std::size_t size() const { return index_.size(); }

 private:
  std::map<std::string, std::set<std::string>, std::less<>> index_;
};

struct MembershipResult {
  double membership_rate = 0.0;
  std::optional<double> membership_rate_on_misses;
  std::size_t empty_stage1_misses = 0;
};

/// Fills per-query passage_in_corpus and the membership ratios of `report`,
/// which must come from hits_at_1 over the same two-stage results.
/// Throws ValidationError for results without an intermediate passage.
MembershipResult membership_analysis(const std::vector<RetrievalResult>& results, const FormattedTargetIndex& targets,
                                     EvalReport& report);

/// One JSON line per query (sorted by query_id): query text, label passages,
/// generated passage, predicted and label URLs, correctness flags.
std::string export_traces(const std::vector<RetrievalResult>& results, const std::vector<QueryRecord>& queries,
                          const Corpus& corpus, const EvalReport& report);

}  // namespace genret
