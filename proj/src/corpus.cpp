#include "genret/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

Corpus::Corpus(std::vector<PassageRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    PassageRecord& r = records_[i];
    r.title = normalize_text(r.title);
    r.passage = normalize_text(r.passage);
    for (auto& u : r.urls) u = normalize_text(u);
    r.assigned_url = normalize_text(r.assigned_url);
    if (r.id.empty()) throw ValidationError("record " + std::to_string(i + 1) + ": empty id");
    if (r.title.empty()) throw ValidationError("record '" + r.id + "': empty title");
    if (r.passage.empty()) throw ValidationError("record '" + r.id + "': empty passage");
    if (r.assigned_url.empty() ||
        std::find(r.urls.begin(), r.urls.end(), r.assigned_url) == r.urls.end()) {
      throw ValidationError("record '" + r.id + "': assigned_url not among urls");
    }
    if (!by_id_.emplace(r.id, i).second) {
      throw ValidationError("record " + std::to_string(i + 1) + ": duplicate id '" + r.id + "'");
    }
    membership_index_[r.passage].insert(r.id);
    url_index_[r.assigned_url].insert(r.id);
  }
}

const PassageRecord* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const PassageRecord& Corpus::at(std::string_view id) const {
  const PassageRecord* r = find(id);
  if (!r) throw ValidationError("unknown passage id '" + std::string(id) + "'");
  return *r;
}

std::set<std::string> Corpus::passage_in_corpus(std::string_view text) const {
  auto it = membership_index_.find(normalize_text(text));
  return it == membership_index_.end() ? std::set<std::string>{} : it->second;
}

std::set<std::string> Corpus::ids_for_url(std::string_view url) const {
  auto it = url_index_.find(normalize_text(url));
  return it == url_index_.end() ? std::set<std::string>{} : it->second;
}

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<PassageRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return Corpus(std::move(out));
}

namespace {

std::string string_field(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ValidationError("line " + std::to_string(line_no) + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus ingest_corpus_text(std::string_view jsonl, std::uint64_t seed) {
  std::vector<PassageRecord> records;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (normalize_text(line).empty()) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw ValidationError("line " + std::to_string(line_no) + ": not an object");

    PassageRecord r;
    r.id = string_field(obj, "id", line_no);
    r.title = normalize_text(string_field(obj, "title", line_no));
    r.passage = normalize_text(string_field(obj, "passage", line_no));
    auto urls = obj.find("urls");
    if (urls == obj.end()) throw ValidationError("line " + std::to_string(line_no) + ": missing 'urls'");
    if (urls->is_string()) {
      r.urls.push_back(urls->get<std::string>());
    } else if (urls->is_array()) {
      for (const auto& u : *urls) {
        if (!u.is_string()) throw ValidationError("line " + std::to_string(line_no) + ": non-string url");
        r.urls.push_back(u.get<std::string>());
      }
    } else {
      throw ValidationError("line " + std::to_string(line_no) + ": 'urls' must be string or array");
    }
    for (auto& u : r.urls) {
      u = normalize_text(u);
      if (u.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty url");
    }
    if (r.urls.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty url list");
    if (r.id.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty id");
    if (r.title.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty title");
    if (r.passage.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty passage");
    if (auto prev = seen.find(r.id); prev != seen.end()) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + r.id +
                            "' (first seen on line " + std::to_string(prev->second) + ")");
    }
    seen.emplace(r.id, line_no);

    auto assigned = obj.find("assigned_url");
    if (assigned != obj.end() && assigned->is_string() &&
        std::find(r.urls.begin(), r.urls.end(), normalize_text(assigned->get<std::string>())) !=
            r.urls.end()) {
      r.assigned_url = normalize_text(assigned->get<std::string>());
    } else {
      std::mt19937_64 rng(mix_seed(seed, r.id));
      std::uniform_int_distribution<std::size_t> pick(0, r.urls.size() - 1);
      r.assigned_url = r.urls[pick(rng)];
    }
    records.push_back(std::move(r));
  }
  return Corpus(std::move(records));
}

Corpus ingest_corpus(const std::filesystem::path& path, std::uint64_t seed) {
  return ingest_corpus_text(read_file(path), seed);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records()) {
    json obj = {{"id", r.id},
                {"title", r.title},
                {"passage", r.passage},
                {"urls", r.urls},
                {"assigned_url", r.assigned_url}};
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<QueryRecord> parse_queries_tsv(std::string_view tsv) {
  std::vector<QueryRecord> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw ValidationError("queries line " + std::to_string(line_no) + ": expected 3 columns");
    }
    QueryRecord q{cols[0], normalize_text(cols[1]), {}};
    std::size_t p = 0;
    while (p <= cols[2].size()) {
      std::size_t comma = cols[2].find(',', p);
      if (comma == std::string::npos) comma = cols[2].size();
      std::string id = normalize_text(std::string_view(cols[2]).substr(p, comma - p));
      if (!id.empty()) q.positive_passage_ids.push_back(id);
      p = comma + 1;
    }
    if (q.query_id.empty() || q.text.empty() || q.positive_passage_ids.empty()) {
      throw ValidationError("queries line " + std::to_string(line_no) + ": empty field");
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QueryRecord> read_queries_tsv(const std::filesystem::path& path) {
  return parse_queries_tsv(read_file(path));
}

std::string queries_to_tsv(const std::vector<QueryRecord>& queries) {
  std::string out;
  for (const auto& q : queries) {
    out += q.query_id + '\t' + q.text + '\t' + join(q.positive_passage_ids, ",") + '\n';
  }
  return out;
}

void check_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus) {
  for (const auto& q : queries) {
    for (const auto& id : q.positive_passage_ids) {
      if (!corpus.find(id)) {
        throw ValidationError("query '" + q.query_id + "' references unknown passage '" + id + "'");
      }
    }
  }
}

std::pair<std::vector<QueryRecord>, std::vector<QueryRecord>> split_queries(
    const std::vector<QueryRecord>& queries, double dev_fraction, std::uint64_t seed) {
  if (queries.size() < 2) throw ValidationError("split_queries needs at least 2 queries");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw ValidationError("dev_fraction must be in (0, 1)");
  }
  const std::size_t n = queries.size();
  auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, "split_queries"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_dev(n, false);
  for (std::size_t i = 0; i < n_dev; ++i) is_dev[order[i]] = true;
  std::pair<std::vector<QueryRecord>, std::vector<QueryRecord>> out;
  for (std::size_t i = 0; i < n; ++i) (is_dev[i] ? out.second : out.first).push_back(queries[i]);
  return out;
}

}  // namespace genret
