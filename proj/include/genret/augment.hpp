#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

/// Span-sampling pseudo-query generator settings.
struct AugmentConfig {
  int k = 20;
  int min_len = 4;
  int max_len = 10;
  double drop_prob = 0.1;
  int shuffle_window = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PseudoQuery {
  std::string text;
  std::string passage_id;
  std::string method;
};

inline constexpr std::string_view kSpanNoiseMethod = "span_noise";
inline constexpr std::string_view kTitleCopyMethod = "title_copy";

/// Exactly cfg.k queries: contiguous word windows of the title+passage, then
/// word drop and local shuffle. A duplicate of an earlier query is re-drawn
/// once. Passages shorter than min_len words yield k copies of the title.
std::vector<PseudoQuery> generate_pseudo_queries(const PassageRecord& record, const AugmentConfig& cfg);

/// All records in corpus order, k queries each.
std::vector<PseudoQuery> build_augmented_set(const Corpus& corpus, const AugmentConfig& cfg);

/// TSV columns: passage_id, query_text, method.
std::string pseudo_queries_to_tsv(const std::vector<PseudoQuery>& queries);
std::vector<PseudoQuery> parse_pseudo_queries_tsv(std::string_view tsv);

}  // namespace genret
