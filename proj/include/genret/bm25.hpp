#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

struct Posting {
  int doc = 0;  // index into doc_ids()
  int tf = 0;
};

/// Okapi BM25 over lowercased alphanumeric terms of title + passage.
///
/// Documents are numbered in ascending id order, so postings, scores and
/// tie-breaks do not depend on the order records appear in the corpus file.
class Bm25Index {
 public:
  Bm25Index(const Corpus& corpus, double k1 = 1.2, double b = 0.75);

  /// Top `topk` (id, score) pairs by descending score, ties to the smaller id.
  /// Empty when the query has no terms; documents with no matching term are
  /// not returned.
  std::vector<std::pair<std::string, double>> retrieve(std::string_view query, int topk) const;

  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(std::string_view term) const;
  double score(std::string_view query, std::string_view id) const;

  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<int>& doc_lengths() const { return doc_lengths_; }
  double avg_doc_length() const { return avgdl_; }
  std::size_t doc_count() const { return doc_ids_.size(); }
  const std::vector<Posting>* postings(std::string_view term) const;
  double k1() const { return k1_; }
  double b() const { return b_; }

 private:
  double term_weight(int tf, int doc_len) const;

  double k1_;
  double b_;
  std::vector<std::string> doc_ids_;
  std::vector<int> doc_lengths_;
  double avgdl_ = 0.0;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
};

/// Text indexed for a record: title and passage joined by a space.
std::string bm25_document_text(const PassageRecord& record);

}  // namespace genret
