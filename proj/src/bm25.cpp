#include "genret/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "genret/text.hpp"

namespace genret {

std::string bm25_document_text(const PassageRecord& record) { return record.title + " " + record.passage; }

Bm25Index::Bm25Index(const Corpus& corpus, double k1, double b) : k1_(k1), b_(b) {
  if (corpus.empty()) throw ValidationError("bm25: corpus is empty");
  if (k1 < 0.0 || b < 0.0 || b > 1.0) throw ValidationError("bm25: need k1 >= 0 and 0 <= b <= 1");
  std::vector<const PassageRecord*> sorted;
  for (const auto& r : corpus.records()) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* x, const auto* y) { return x->id < y->id; });

  long long total_len = 0;
  for (std::size_t d = 0; d < sorted.size(); ++d) {
    const auto terms = split_terms(bm25_document_text(*sorted[d]));
    std::map<std::string, int> tf;
    for (const auto& t : terms) ++tf[t];
    doc_ids_.push_back(sorted[d]->id);
    // A record always has text, but it may contain no alphanumerics.
    const int len = std::max<int>(1, static_cast<int>(terms.size()));
    doc_lengths_.push_back(len);
    total_len += len;
    for (const auto& [term, count] : tf) postings_[term].push_back({static_cast<int>(d), count});
  }
  avgdl_ = static_cast<double>(total_len) / static_cast<double>(doc_ids_.size());
}

const std::vector<Posting>* Bm25Index::postings(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

double Bm25Index::idf(std::string_view term) const {
  const auto* p = postings(term);
  const double df = p ? static_cast<double>(p->size()) : 0.0;
  const double n = static_cast<double>(doc_ids_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::term_weight(int tf, int doc_len) const {
  const double f = static_cast<double>(tf);
  return f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * static_cast<double>(doc_len) / avgdl_));
}

double Bm25Index::score(std::string_view query, std::string_view id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), id);
  if (it == doc_ids_.end() || *it != id) throw ValidationError("bm25: unknown id '" + std::string(id) + "'");
  const int doc = static_cast<int>(it - doc_ids_.begin());
  double s = 0.0;
  for (const auto& term : split_terms(query)) {
    const auto* p = postings(term);
    if (!p) continue;
    auto hit = std::lower_bound(p->begin(), p->end(), doc, [](const Posting& x, int d) { return x.doc < d; });
    if (hit != p->end() && hit->doc == doc) s += idf(term) * term_weight(hit->tf, doc_lengths_[static_cast<std::size_t>(doc)]);
  }
  return s;
}

std::vector<std::pair<std::string, double>> Bm25Index::retrieve(std::string_view query, int topk) const {
  if (topk < 1) throw ValidationError("bm25: topk must be >= 1");
  const auto terms = split_terms(query);
  std::vector<std::pair<std::string, double>> out;
  if (terms.empty()) return out;
  std::vector<double> scores(doc_ids_.size(), 0.0);
  std::vector<bool> hit(doc_ids_.size(), false);
  for (const auto& term : terms) {
    const auto* p = postings(term);
    if (!p) continue;
    const double w = idf(term);
    for (const auto& post : *p) {
      scores[static_cast<std::size_t>(post.doc)] += w * term_weight(post.tf, doc_lengths_[static_cast<std::size_t>(post.doc)]);
      hit[static_cast<std::size_t>(post.doc)] = true;
    }
  }
  std::vector<int> order;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (hit[d]) order.push_back(static_cast<int>(d));
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return scores[static_cast<std::size_t>(x)] > scores[static_cast<std::size_t>(y)];
  });
  if (order.size() > static_cast<std::size_t>(topk)) order.resize(static_cast<std::size_t>(topk));
  for (int d : order) out.emplace_back(doc_ids_[static_cast<std::size_t>(d)], scores[static_cast<std::size_t>(d)]);
  return out;
}

}  // namespace genret
