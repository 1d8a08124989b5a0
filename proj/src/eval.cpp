#include "genret/eval.hpp"

#include <algorithm>

#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

Labels labels_from_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus) {
  Labels labels;
  for (const auto& q : queries) {
    auto& set = labels[q.query_id];
    for (const auto& id : q.positive_passage_ids) set.insert(corpus.at(id).assigned_url);
  }
  return labels;
}

std::string labels_to_jsonl(const Labels& labels) {
  std::string out;
  for (const auto& [qid, urls] : labels) {
    out += json{{"query_id", qid}, {"urls", std::vector<std::string>(urls.begin(), urls.end())}}.dump() + "\n";
  }
  return out;
}

Labels parse_labels_jsonl(std::string_view jsonl) {
  Labels labels;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      auto& set = labels[j.at("query_id").get<std::string>()];
      for (const auto& u : j.at("urls")) set.insert(normalize_text(u.get<std::string>()));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("labels: ") + e.what());
    }
  }
  return labels;
}

json EvalReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"method", method},
          {"hits_at_1", hits_at_1},
          {"n_queries", n_queries},
          {"membership_rate", opt(membership_rate)},
          {"membership_rate_on_misses", opt(membership_rate_on_misses)},
          {"empty_stage1_misses", empty_stage1_misses},
          {"per_query", per_query_json()}};
}

json EvalReport::per_query_json() const {
  json rows = json::array();
  for (const auto& q : per_query) {
    rows.push_back({{"query_id", q.query_id},
                    {"correct", q.correct},
                    {"predicted_url", q.predicted_url},
                    {"label_urls", q.label_urls},
                    {"passage_in_corpus", q.passage_in_corpus ? json(*q.passage_in_corpus) : json(nullptr)}});
  }
  return rows;
}

std::string EvalReport::per_query_jsonl() const {
  std::string out;
  for (const auto& row : per_query_json()) out += row.dump() + "\n";
  return out;
}

EvalReport hits_at_1(const std::vector<RetrievalResult>& results, const Labels& labels) {
  if (results.empty()) throw ValidationError("hits_at_1: no results to evaluate");
  EvalReport report;
  report.method = std::string(to_string(results.front().method));
  std::size_t correct = 0;
  for (const auto& r : results) {
    auto it = labels.find(r.query_id);
    if (it == labels.end()) throw ValidationError("hits_at_1: no label for query '" + r.query_id + "'");
    QueryOutcome q;
    q.query_id = r.query_id;
    q.predicted_url = r.predicted_url;
    std::set<std::string> normalized;
    for (const auto& u : it->second) {
      q.label_urls.push_back(u);
      normalized.insert(normalize_text(u));
    }
    q.correct = normalized.count(normalize_text(r.predicted_url)) > 0;
    q.generated_passage = r.intermediate_passage;
    correct += q.correct;
    report.per_query.push_back(std::move(q));
  }
  std::sort(report.per_query.begin(), report.per_query.end(),
            [](const auto& a, const auto& b) { return a.query_id < b.query_id; });
  report.n_queries = results.size();
  report.hits_at_1 = static_cast<double>(correct) / static_cast<double>(results.size());
  return report;
}

FormattedTargetIndex::FormattedTargetIndex(const Corpus& corpus, const StageSpec& passage_spec, const Tokenizer& tok) {
  for (const auto& r : corpus.records()) {
    index_[normalize_text(stage1_target_text(r, passage_spec, tok))].insert(r.id);
  }
}

std::set<std::string> FormattedTargetIndex::lookup(std::string_view text) const {
  auto it = index_.find(normalize_text(text));
  return it == index_.end() ? std::set<std::string>{} : it->second;
}

MembershipResult membership_analysis(const std::vector<RetrievalResult>& results, const FormattedTargetIndex& targets,
                                     EvalReport& report) {
  std::map<std::string, const RetrievalResult*, std::less<>> by_id;
  for (const auto& r : results) {
    if (r.method != Method::two_stage || !r.intermediate_passage) {
      throw ValidationError("membership analysis needs two-stage results with intermediate passages");
    }
    by_id[r.query_id] = &r;
  }
  std::size_t members = 0, misses = 0, miss_members = 0, empty_misses = 0;
  for (auto& q : report.per_query) {
    auto it = by_id.find(q.query_id);
    if (it == by_id.end()) throw ValidationError("membership: report and results disagree on '" + q.query_id + "'");
    const std::string& passage = *it->second->intermediate_passage;
    const bool member = targets.contains(passage);
    q.passage_in_corpus = member;
    members += member;
    if (!q.correct) {
      if (normalize_text(passage).empty()) {
        ++empty_misses;
      } else {
        ++misses;
        miss_members += member;
      }
    }
  }
  MembershipResult out;
  out.membership_rate = static_cast<double>(members) / static_cast<double>(report.per_query.size());
  if (misses > 0) out.membership_rate_on_misses = static_cast<double>(miss_members) / static_cast<double>(misses);
  out.empty_stage1_misses = empty_misses;
  report.membership_rate = out.membership_rate;
  report.membership_rate_on_misses = out.membership_rate_on_misses;
  report.empty_stage1_misses = empty_misses;
  return out;
}

std::string export_traces(const std::vector<RetrievalResult>& results, const std::vector<QueryRecord>& queries,
                          const Corpus& corpus, const EvalReport& report) {
  std::map<std::string, const QueryRecord*, std::less<>> query_by_id;
  for (const auto& q : queries) query_by_id[q.query_id] = &q;
  std::map<std::string, const RetrievalResult*, std::less<>> result_by_id;
  for (const auto& r : results) result_by_id[r.query_id] = &r;

  std::string out;
  for (const auto& outcome : report.per_query) {
    json j;
    j["query_id"] = outcome.query_id;
    auto q = query_by_id.find(outcome.query_id);
    j["query"] = q == query_by_id.end() ? json(nullptr) : json(q->second->text);
    json label_ids = json::array(), label_passages = json::array();
    if (q != query_by_id.end()) {
      for (const auto& id : q->second->positive_passage_ids) {
        label_ids.push_back(id);
        label_passages.push_back(corpus.at(id).passage);
      }
    }
    j["label_passage_ids"] = label_ids;
    j["label_passages"] = label_passages;
    auto r = result_by_id.find(outcome.query_id);
    j["generated_passage"] = (r != result_by_id.end() && r->second->intermediate_passage)
                                 ? json(*r->second->intermediate_passage)
                                 : json(nullptr);
    j["predicted_url"] = outcome.predicted_url;
    j["label_urls"] = outcome.label_urls;
    j["correct"] = outcome.correct;
    j["passage_in_corpus"] = outcome.passage_in_corpus ? json(*outcome.passage_in_corpus) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace genret
