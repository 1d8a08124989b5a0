#include "genret/retrieve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::two_stage:
      return "two_stage";
    case Method::single_stage:
      return "single_stage";
    case Method::bm25:
      return "bm25";
  }
  return "two_stage";
}

Method method_from_string(std::string_view name) {
  if (name == "two_stage") return Method::two_stage;
  if (name == "single_stage") return Method::single_stage;
  if (name == "bm25") return Method::bm25;
  throw ValidationError("unknown method '" + std::string(name) + "'");
}

double RetrievalResult::logprob_sum() const {
  double s = 0.0;
  for (double lp : per_step_logprobs) s += lp;
  return s;
}

json RetrievalResult::to_json() const {
  return {{"query_id", query_id},
          {"method", to_string(method)},
          {"predicted_url", predicted_url},
          {"intermediate_passage", intermediate_passage ? json(*intermediate_passage) : json(nullptr)},
          {"logprob_sum", logprob_sum()},
          {"per_step_logprobs", per_step_logprobs}};
}

RetrievalResult RetrievalResult::from_json(const json& j) {
  RetrievalResult r;
  r.query_id = j.at("query_id").get<std::string>();
  r.method = method_from_string(j.at("method").get<std::string>());
  r.predicted_url = j.at("predicted_url").get<std::string>();
  if (auto it = j.find("intermediate_passage"); it != j.end() && it->is_string()) {
    r.intermediate_passage = it->get<std::string>();
  }
  if (auto it = j.find("per_step_logprobs"); it != j.end()) {
    r.per_step_logprobs = it->get<std::vector<double>>();
  }
  return r;
}

Decoded greedy_decode(const NextTokenScorer& scorer, std::size_t max_len, const Tokenizer& tok) {
  Decoded out;
  while (out.ids.size() < max_len) {
    const Eigen::VectorXf logits = scorer(out.ids);
    if (logits.size() != tok.vocab_size()) throw ValidationError("scorer returned wrong vocabulary size");
    int best = kNumSpecial;
    for (int i = kNumSpecial + 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    if (logits[kEosId] > logits[best]) best = kEosId;

    const double mx = static_cast<double>(logits.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) sum += std::exp(static_cast<double>(logits[i]) - mx);
    out.logprobs.push_back(static_cast<double>(logits[best]) - mx - std::log(sum));
    out.ids.push_back(best);
    if (best == kEosId) break;
  }
  out.text = tok.decode(out.ids);
  return out;
}

Decoded greedy_decode(const Seq2SeqModel& model, const TokenSequence& source, std::size_t max_len,
                      const Tokenizer& tok) {
  if (!model.tokenizer_hash.empty() && model.tokenizer_hash != tok.hash()) {
    throw ValidationError("model and tokenizer hashes differ");
  }
  max_len = std::min(max_len, static_cast<std::size_t>(model.config().max_target_len));
  DecodeSession session(model, source);
  return greedy_decode([&](std::span<const int> prefix) { return session.next_logits(prefix); }, max_len, tok);
}

namespace {

TokenSequence encode_query(std::string_view query, int max_len, const Tokenizer& tok) {
  TokenSequence s = tok.encode(normalize_text(query), Role::source, static_cast<std::size_t>(max_len));
  // The encoder needs at least one position.
  if (s.ids.empty()) s.ids.push_back(kByteBase + ' ');
  return s;
}

}  // namespace

RetrievalResult two_stage_retrieve(const Seq2SeqModel& stage1, const Seq2SeqModel& stage2, std::string_view query_id,
                                   std::string_view query, const PipelineSpecs& specs, const Tokenizer& tok) {
  if (stage1.tokenizer_hash != stage2.tokenizer_hash) {
    throw ValidationError("stage-1 and stage-2 models were trained with different tokenizers");
  }
  Decoded passage = greedy_decode(stage1, encode_query(query, specs.passage_gen.source_max, tok),
                                  static_cast<std::size_t>(specs.passage_gen.target_max), tok);
  Decoded url = greedy_decode(stage2, encode_query(passage.text, specs.url_gen.source_max, tok),
                              static_cast<std::size_t>(specs.url_gen.target_max), tok);
  RetrievalResult r;
  r.query_id = std::string(query_id);
  r.method = Method::two_stage;
  r.intermediate_passage = passage.text;
  r.predicted_url = url.text;
  r.per_step_logprobs = std::move(url.logprobs);
  return r;
}

RetrievalResult single_stage_retrieve(const Seq2SeqModel& model, std::string_view query_id, std::string_view query,
                                      const PipelineSpecs& specs, const Tokenizer& tok) {
  Decoded url = greedy_decode(model, encode_query(query, specs.passage_gen.source_max, tok),
                              static_cast<std::size_t>(specs.url_gen.target_max), tok);
  RetrievalResult r;
  r.query_id = std::string(query_id);
  r.method = Method::single_stage;
  r.predicted_url = url.text;
  r.per_step_logprobs = std::move(url.logprobs);
  return r;
}

RetrievalResult bm25_retrieve_url(const Bm25Index& index, const Corpus& corpus, std::string_view query_id,
                                  std::string_view query) {
  RetrievalResult r;
  r.query_id = std::string(query_id);
  r.method = Method::bm25;
  auto hits = index.retrieve(query, 1);
  if (!hits.empty()) r.predicted_url = corpus.at(hits.front().first).assigned_url;
  return r;
}

std::vector<RetrievalResult> parallel_retrieve(std::size_t n, int threads,
                                               const std::function<RetrievalResult(std::size_t)>& fn) {
  std::vector<RetrievalResult> out(n);
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string results_to_jsonl(const std::vector<RetrievalResult>& results) {
  std::string out;
  for (const auto& r : results) out += r.to_json().dump() + "\n";
  return out;
}

std::vector<RetrievalResult> parse_results_jsonl(std::string_view jsonl) {
  std::vector<RetrievalResult> out;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(RetrievalResult::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("results: ") + e.what());
    }
  }
  return out;
}

}  // namespace genret
