#include "genret/augment.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "genret/text.hpp"

namespace genret {

void AugmentConfig::validate() const {
  if (k < 1 || k > 64) throw ValidationError("augment.k must be in [1, 64]");
  if (min_len < 1 || min_len > max_len) throw ValidationError("augment: need 1 <= min_len <= max_len");
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) throw ValidationError("augment.drop_prob must be in [0, 1)");
  if (shuffle_window < 0) throw ValidationError("augment.shuffle_window must be >= 0");
}

namespace {

std::string sample_query(const std::vector<std::string>& words, const AugmentConfig& cfg,
                         std::mt19937_64& rng) {
  const int n = static_cast<int>(words.size());
  const int hi = std::min(cfg.max_len, n);
  std::uniform_int_distribution<int> len_dist(cfg.min_len, hi);
  const int len = len_dist(rng);
  std::uniform_int_distribution<int> start_dist(0, n - len);
  const int start = start_dist(rng);

  std::vector<std::string> span(words.begin() + start, words.begin() + start + len);

  if (cfg.drop_prob > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> kept;
    for (auto& w : span) {
      if (u(rng) >= cfg.drop_prob) kept.push_back(std::move(w));
    }
    if (kept.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, span.size() - 1);
      kept.push_back(span[pick(rng)]);
    }
    span = std::move(kept);
  }

  if (cfg.shuffle_window > 0 && span.size() > 1) {
    // Each word moves at most shuffle_window places from its origin.
    std::uniform_real_distribution<double> jitter(0.0, static_cast<double>(cfg.shuffle_window) + 1.0);
    std::vector<std::pair<double, std::size_t>> keys;
    for (std::size_t i = 0; i < span.size(); ++i) keys.emplace_back(static_cast<double>(i) + jitter(rng), i);
    std::stable_sort(keys.begin(), keys.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> shuffled;
    for (const auto& [key, idx] : keys) shuffled.push_back(span[idx]);
    span = std::move(shuffled);
  }
  return join(span, " ");
}

}  // namespace

std::vector<PseudoQuery> generate_pseudo_queries(const PassageRecord& record, const AugmentConfig& cfg) {
  cfg.validate();
  std::vector<PseudoQuery> out;
  const auto passage_words = split_whitespace(record.passage);
  if (static_cast<int>(passage_words.size()) < cfg.min_len) {
    const std::string title = normalize_text(record.title);
    if (title.empty()) {
      throw ValidationError("record '" + record.id + "': passage too short and title empty");
    }
    for (int i = 0; i < cfg.k; ++i) out.push_back({title, record.id, std::string(kTitleCopyMethod)});
    return out;
  }

  std::vector<std::string> words = split_whitespace(record.title);
  words.insert(words.end(), passage_words.begin(), passage_words.end());

  std::mt19937_64 rng(mix_seed(cfg.seed, record.id));
  for (int i = 0; i < cfg.k; ++i) {
    std::string q = sample_query(words, cfg, rng);
    auto seen = [&](const std::string& s) {
      return std::any_of(out.begin(), out.end(), [&](const PseudoQuery& p) { return p.text == s; });
    };
    if (seen(q)) q = sample_query(words, cfg, rng);
    out.push_back({std::move(q), record.id, std::string(kSpanNoiseMethod)});
  }
  return out;
}

std::vector<PseudoQuery> build_augmented_set(const Corpus& corpus, const AugmentConfig& cfg) {
  cfg.validate();
  std::vector<PseudoQuery> out;
  out.reserve(corpus.size() * static_cast<std::size_t>(cfg.k));
  for (const auto& r : corpus.records()) {
    auto qs = generate_pseudo_queries(r, cfg);
    out.insert(out.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
  }
  return out;
}

std::string pseudo_queries_to_tsv(const std::vector<PseudoQuery>& queries) {
  std::string out;
  for (const auto& q : queries) out += q.passage_id + '\t' + q.text + '\t' + q.method + '\n';
  return out;
}

std::vector<PseudoQuery> parse_pseudo_queries_tsv(std::string_view tsv) {
  std::vector<PseudoQuery> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw ValidationError("pseudo-query line " + std::to_string(line_no) + ": expected 3 columns");
    }
    out.push_back({line.substr(t1 + 1, t2 - t1 - 1), line.substr(0, t1), line.substr(t2 + 1)});
  }
  return out;
}

}  // namespace genret
