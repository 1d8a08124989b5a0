#include "genret/dataset.hpp"

#include <algorithm>

#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

std::string_view to_string(Stage stage) {
  return stage == Stage::passage_gen ? "passage_gen" : "url_gen";
}

Stage stage_from_string(std::string_view name) {
  if (name == "passage_gen") return Stage::passage_gen;
  if (name == "url_gen") return Stage::url_gen;
  throw ValidationError("unknown stage '" + std::string(name) + "'");
}

void StageSpec::validate() const {
  if (source_max < 2 || target_max < 2 || passage_trunc < 2) {
    throw ValidationError(std::string(to_string(stage)) + ": all length maxima must be >= 2");
  }
  if (stage == Stage::passage_gen && passage_trunc > target_max) {
    throw ValidationError("passage_gen: passage_trunc must be <= target_max");
  }
}

json StageSpec::to_json() const {
  return {{"stage", to_string(stage)},       {"source_max", source_max},
          {"target_max", target_max},        {"use_prompts", use_prompts},
          {"passage_trunc", passage_trunc}};
}

StageSpec StageSpec::from_json(const json& j) {
  StageSpec s;
  s.stage = stage_from_string(j.value("stage", std::string("passage_gen")));
  s.source_max = j.value("source_max", s.source_max);
  s.target_max = j.value("target_max", s.target_max);
  s.use_prompts = j.value("use_prompts", s.use_prompts);
  s.passage_trunc = j.value("passage_trunc", s.passage_trunc);
  return s;
}

void PipelineSpecs::validate() const {
  passage_gen.validate();
  url_gen.validate();
  if (passage_gen.stage != Stage::passage_gen || url_gen.stage != Stage::url_gen) {
    throw ValidationError("stage specs out of order");
  }
  if (url_gen.source_max < passage_gen.target_max) {
    throw ValidationError("url_gen.source_max must be >= passage_gen.target_max");
  }
}

json PipelineSpecs::to_json() const {
  return {{"passage_gen", passage_gen.to_json()}, {"url_gen", url_gen.to_json()}};
}

PipelineSpecs PipelineSpecs::from_json(const json& j) {
  PipelineSpecs s;
  if (j.contains("passage_gen")) s.passage_gen = StageSpec::from_json(j.at("passage_gen"));
  if (j.contains("url_gen")) s.url_gen = StageSpec::from_json(j.at("url_gen"));
  s.passage_gen.stage = Stage::passage_gen;
  s.url_gen.stage = Stage::url_gen;
  return s;
}

std::string truncate_passage(std::string_view passage, int passage_trunc, const Tokenizer& tok) {
  std::vector<int> ids = tok.encode_ids(passage);
  if (ids.size() > static_cast<std::size_t>(passage_trunc)) ids.resize(static_cast<std::size_t>(passage_trunc));
  return tok.decode(ids);
}

std::string format_passage_text(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok) {
  const std::string body = truncate_passage(record.passage, spec.passage_trunc, tok);
  std::string text;
  if (spec.use_prompts) {
    text.append(kTitlePrefix).append(record.title).append(kPassagePrefix).append(body);
  } else {
    text.append(record.title).append(" ").append(body);
  }
  return text;
}

TokenSequence format_stage1_target(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok) {
  return tok.encode(format_passage_text(record, spec, tok), Role::target,
                    static_cast<std::size_t>(spec.target_max));
}

std::string stage1_target_text(const PassageRecord& record, const StageSpec& spec, const Tokenizer& tok) {
  return tok.decode(format_stage1_target(record, spec, tok));
}

std::vector<TrainingPair> build_stage1(const std::vector<PseudoQuery>& queries, const Corpus& corpus,
                                       const StageSpec& spec, const Tokenizer& tok) {
  spec.validate();
  if (spec.stage != Stage::passage_gen) throw ValidationError("build_stage1 needs a passage_gen spec");
  std::map<std::string, TokenSequence, std::less<>> targets;
  std::vector<TrainingPair> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const PseudoQuery& q = queries[i];
    const PassageRecord* r = corpus.find(q.passage_id);
    if (!r) throw ValidationError("pseudo query " + std::to_string(i) + ": dangling passage id '" + q.passage_id + "'");
    auto it = targets.find(r->id);
    if (it == targets.end()) it = targets.emplace(r->id, format_stage1_target(*r, spec, tok)).first;
    out.push_back({tok.encode(q.text, Role::source, static_cast<std::size_t>(spec.source_max)), it->second,
                   {"pq" + std::to_string(i), r->id, r->assigned_url}});
  }
  return out;
}

std::vector<TrainingPair> build_stage2(const Corpus& corpus, const PipelineSpecs& specs, const Tokenizer& tok) {
  specs.validate();
  std::vector<TrainingPair> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    const std::string source_text = stage1_target_text(r, specs.passage_gen, tok);
    out.push_back({tok.encode(source_text, Role::source, static_cast<std::size_t>(specs.url_gen.source_max)),
                   tok.encode(r.assigned_url, Role::target, static_cast<std::size_t>(specs.url_gen.target_max)),
                   {r.id, r.id, r.assigned_url}});
  }
  return out;
}

std::vector<TrainingPair> build_single_stage(const std::vector<PseudoQuery>& queries, const Corpus& corpus,
                                             const PipelineSpecs& specs, const Tokenizer& tok) {
  specs.validate();
  std::vector<TrainingPair> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const PseudoQuery& q = queries[i];
    const PassageRecord* r = corpus.find(q.passage_id);
    if (!r) throw ValidationError("pseudo query " + std::to_string(i) + ": dangling passage id '" + q.passage_id + "'");
    out.push_back({tok.encode(q.text, Role::source, static_cast<std::size_t>(specs.passage_gen.source_max)),
                   tok.encode(r->assigned_url, Role::target, static_cast<std::size_t>(specs.url_gen.target_max)),
                   {"pq" + std::to_string(i), r->id, r->assigned_url}});
  }
  return out;
}

std::string dataset_to_jsonl(const DatasetFile& data) {
  json header = {{"format", "genret-dataset"}, {"version", 1},
                 {"kind", data.kind},          {"spec", data.spec},
                 {"tokenizer_hash", data.tokenizer_hash}, {"count", data.pairs.size()}};
  std::string out = header.dump() + "\n";
  for (const auto& p : data.pairs) {
    json row = {{"source", p.source.ids}, {"target", p.target.ids}, {"source_id", p.meta.source_id},
                {"passage_id", p.meta.passage_id}, {"url", p.meta.url}};
    out += row.dump();
    out.push_back('\n');
  }
  return out;
}

DatasetFile parse_dataset(std::string_view jsonl, std::string_view expected_tokenizer_hash) {
  DatasetFile data;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t expected_count = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("format", std::string()) != "genret-dataset") throw ValidationError("not a dataset file");
      data.kind = j.at("kind").get<std::string>();
      data.spec = j.at("spec");
      data.tokenizer_hash = j.at("tokenizer_hash").get<std::string>();
      expected_count = j.at("count").get<std::size_t>();
      if (!expected_tokenizer_hash.empty() && data.tokenizer_hash != expected_tokenizer_hash) {
        throw ValidationError("dataset was built with tokenizer " + data.tokenizer_hash +
                              ", expected " + std::string(expected_tokenizer_hash));
      }
      have_header = true;
      continue;
    }
    TrainingPair p;
    p.source = {j.at("source").get<std::vector<int>>(), Role::source};
    p.target = {j.at("target").get<std::vector<int>>(), Role::target};
    p.meta = {j.at("source_id").get<std::string>(), j.at("passage_id").get<std::string>(),
              j.at("url").get<std::string>()};
    if (p.target.ids.empty() || p.target.ids.back() != kEosId) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": target must end with EOS");
    }
    data.pairs.push_back(std::move(p));
  }
  if (!have_header) throw ValidationError("empty dataset file");
  if (data.pairs.size() != expected_count) throw ValidationError("dataset truncated: count mismatch");
  return data;
}

DatasetFile read_dataset(const std::filesystem::path& path, std::string_view expected_tokenizer_hash) {
  return parse_dataset(read_file(path), expected_tokenizer_hash);
}

}  // namespace genret
