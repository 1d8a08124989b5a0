#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace genret {

struct PassageRecord {
  std::string id;
  std::string title;
  std::string passage;
  std::vector<std::string> urls;
  std::string assigned_url;
};

struct QueryRecord {
  std::string query_id;
  std::string text;
  std::vector<std::string> positive_passage_ids;
};

/// An immutable passage collection with exact-membership and URL lookup.
///
/// Texts are stored normalized (see normalize_text). Lookups normalize their
/// argument the same way, so callers can pass raw model output.
class Corpus {
 public:
  Corpus() = default;
  /// Validates and indexes `records`. Throws ValidationError on duplicate ids,
  /// empty fields or an assigned_url missing from urls.
  explicit Corpus(std::vector<PassageRecord> records);

  const std::vector<PassageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const PassageRecord* find(std::string_view id) const;
  const PassageRecord& at(std::string_view id) const;

  /// Ids whose normalized passage equals normalize_text(text).
  std::set<std::string> passage_in_corpus(std::string_view text) const;
  std::set<std::string> ids_for_url(std::string_view url) const;

  std::size_t membership_index_size() const { return membership_index_.size(); }

  /// Subset in the given order; ids must exist.
  Corpus subset(const std::vector<std::string>& ids) const;

 private:
  std::vector<PassageRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, std::set<std::string>, std::less<>> membership_index_;
  std::map<std::string, std::set<std::string>, std::less<>> url_index_;
};

/// Reads corpus JSONL (fields id, title, passage, urls as string or array).
/// assigned_url is drawn uniformly from urls with a generator seeded from
/// (seed, id), unless the line already carries an assigned_url listed in urls.
Corpus ingest_corpus(const std::filesystem::path& path, std::uint64_t seed);
Corpus ingest_corpus_text(std::string_view jsonl, std::uint64_t seed);

/// Canonical JSONL, one record per line with assigned_url.
std::string corpus_to_jsonl(const Corpus& corpus);

/// Queries TSV: query_id <TAB> text <TAB> comma-joined positive ids.
std::vector<QueryRecord> read_queries_tsv(const std::filesystem::path& path);
std::vector<QueryRecord> parse_queries_tsv(std::string_view tsv);
std::string queries_to_tsv(const std::vector<QueryRecord>& queries);
/// Throws ValidationError naming the first query whose positive id is unknown.
void check_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus);

/// Seeded split; dev size is round(dev_fraction * N). Both halves keep input order.
std::pair<std::vector<QueryRecord>, std::vector<QueryRecord>> split_queries(
    const std::vector<QueryRecord>& queries, double dev_fraction, std::uint64_t seed);

}  // namespace genret
