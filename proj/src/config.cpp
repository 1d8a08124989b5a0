#include "genret/config.hpp"

#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

namespace {

void check_known_keys(const json& defaults, const json& given, const std::string& where) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) {
      throw ValidationError("config: unknown key '" + where + it.key() + "'");
    }
    const json& d = defaults.at(it.key());
    if (d.is_object()) {
      if (!it->is_object()) throw ValidationError("config: '" + where + it.key() + "' must be an object");
      check_known_keys(d, *it, where + it.key() + ".");
    }
  }
}

// Like merge_patch, but null is a value (e.g. grad_clip: null) rather than a deletion.
void overlay(json& base, const json& given) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      overlay(base[it.key()], *it);
    } else {
      base[it.key()] = *it;
    }
  }
}

template <class T>
std::vector<T> get_list(const json& j, const char* key) {
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

void GridConfig::validate() const {
  if (corpus_sizes.empty() && model_tags.empty() && passage_truncs.empty() && pseudo_query_counts.empty() &&
      prompts.empty()) {
    throw ValidationError("grid: at least one axis must be non-empty");
  }
  if (seeds.empty()) throw ValidationError("grid: seeds must be non-empty");
  for (int n : corpus_sizes) {
    if (n < 1) throw ValidationError("grid: corpus sizes must be >= 1");
  }
  for (int t : passage_truncs) {
    if (t < 2) throw ValidationError("grid: passage_trunc values must be >= 2");
  }
  for (int k : pseudo_query_counts) {
    if (k < 1 || k > 64) throw ValidationError("grid: pseudo query counts must be in [1, 64]");
  }
  if (max_steps < 1 || eval_every < 1 || batch_size < 1 || eval_pairs < 1) {
    throw ValidationError("grid: max_steps, eval_every, batch_size and eval_pairs must be >= 1");
  }
  if (base.corpus_size < 1 || base.passage_trunc < 2 || base.pseudo_query_count < 1) {
    throw ValidationError("grid: invalid base values");
  }
}

json GridConfig::to_json() const {
  std::vector<std::string> tags;
  for (SizeTag t : model_tags) tags.emplace_back(to_string(t));
  return {{"corpus_sizes", corpus_sizes},
          {"model_tags", tags},
          {"passage_truncs", passage_truncs},
          {"pseudo_query_counts", pseudo_query_counts},
          {"prompts", prompts},
          {"seeds", seeds},
          {"base",
           {{"corpus_size", base.corpus_size},
            {"model_tag", to_string(base.model_tag)},
            {"passage_trunc", base.passage_trunc},
            {"pseudo_query_count", base.pseudo_query_count},
            {"prompts", base.prompts}}},
          {"max_steps", max_steps},
          {"eval_every", eval_every},
          {"batch_size", batch_size},
          {"eval_pairs", eval_pairs}};
}

RunConfig::RunConfig() {
  stage1_train.max_steps = 2000;
  stage2_train.max_steps = 1500;
  single_train.max_steps = 2000;
  // Stage-1 to stage-2 warmup keeps a 4:1 ratio.
  stage1_train.warmup_steps = 200;
  stage2_train.warmup_steps = 50;
  single_train.warmup_steps = 200;
  for (TrainConfig* t : {&stage1_train, &stage2_train, &single_train}) t->eval_every = 250;
  propagate_seed();
}

void RunConfig::propagate_seed() {
  synth.seed = seed;
  augment.seed = seed;
  stage1_train.seed = mix_seed(seed, std::string_view("passage_gen"));
  stage2_train.seed = mix_seed(seed, std::string_view("url_gen"));
  single_train.seed = mix_seed(seed, std::string_view("single_stage"));
}

void RunConfig::validate() const {
  if (threads < 1) throw ValidationError("threads must be >= 1");
  if (corpus_path.empty() != queries_path.empty()) {
    throw ValidationError("corpus_path and queries_path must be given together");
  }
  synth.validate();
  if (vocab_size < kMinVocab) throw ValidationError("vocab_size must be >= " + std::to_string(kMinVocab));
  augment.validate();
  specs.validate();
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
  stage1_train.validate();
  stage2_train.validate();
  single_train.validate();
  if (eval_pairs < 1) throw ValidationError("eval_pairs must be >= 1");
  if (train_eval_per_record < 0 || train_eval_per_record > augment.k) {
    throw ValidationError("train_eval_per_record must be in [0, augment.k]");
  }
  stage1_model(vocab_size).validate();
  stage2_model(vocab_size).validate();
  single_model(vocab_size).validate();
  grid.validate();
}

json RunConfig::to_json() const {
  json synth_j = {{"n_records", synth.n_records},
                  {"min_sentences", synth.min_sentences},
                  {"max_sentences", synth.max_sentences},
                  {"second_url_fraction", synth.second_url_fraction}};
  json augment_j = {{"k", augment.k},
                    {"min_len", augment.min_len},
                    {"max_len", augment.max_len},
                    {"drop_prob", augment.drop_prob},
                    {"shuffle_window", augment.shuffle_window}};
  auto train_j = [](const TrainConfig& t) {
    json j = t.to_json();
    j.erase("seed");
    return j;
  };
  return {{"seed", seed},
          {"threads", threads},
          {"corpus_path", corpus_path},
          {"queries_path", queries_path},
          {"synth", synth_j},
          {"vocab_size", vocab_size},
          {"augment", augment_j},
          {"specs", specs.to_json()},
          {"model_size", to_string(model_size)},
          {"dropout", dropout},
          {"stage1_train", train_j(stage1_train)},
          {"stage2_train", train_j(stage2_train)},
          {"single_train", train_j(single_train)},
          {"eval_pairs", eval_pairs},
          {"train_eval_per_record", train_eval_per_record},
          {"skip_training", skip_training},
          {"model_cache", model_cache},
          {"grid", grid.to_json()}};
}

RunConfig RunConfig::from_json(const json& given) {
  if (!given.is_object()) throw ValidationError("config: top level must be an object");
  const RunConfig defaults;
  json d = defaults.to_json();
  check_known_keys(d, given, "");
  json j = d;
  overlay(j, given);
  try {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<int>();
    c.corpus_path = j.at("corpus_path").get<std::string>();
    c.queries_path = j.at("queries_path").get<std::string>();
    const json& s = j.at("synth");
    c.synth.n_records = s.at("n_records").get<int>();
    c.synth.min_sentences = s.at("min_sentences").get<int>();
    c.synth.max_sentences = s.at("max_sentences").get<int>();
    c.synth.second_url_fraction = s.at("second_url_fraction").get<double>();
    c.vocab_size = j.at("vocab_size").get<int>();
    const json& a = j.at("augment");
    c.augment.k = a.at("k").get<int>();
    c.augment.min_len = a.at("min_len").get<int>();
    c.augment.max_len = a.at("max_len").get<int>();
    c.augment.drop_prob = a.at("drop_prob").get<double>();
    c.augment.shuffle_window = a.at("shuffle_window").get<int>();
    c.specs = PipelineSpecs::from_json(j.at("specs"));
    c.model_size = size_tag_from_string(j.at("model_size").get<std::string>());
    c.dropout = j.at("dropout").get<double>();
    c.stage1_train = TrainConfig::from_json(j.at("stage1_train"));
    c.stage2_train = TrainConfig::from_json(j.at("stage2_train"));
    c.single_train = TrainConfig::from_json(j.at("single_train"));
    c.eval_pairs = j.at("eval_pairs").get<int>();
    c.train_eval_per_record = j.at("train_eval_per_record").get<int>();
    c.skip_training = j.at("skip_training").get<bool>();
    c.model_cache = j.at("model_cache").get<std::string>();
    const json& g = j.at("grid");
    c.grid.corpus_sizes = get_list<int>(g, "corpus_sizes");
    c.grid.model_tags.clear();
    for (const auto& t : g.at("model_tags")) c.grid.model_tags.push_back(size_tag_from_string(t.get<std::string>()));
    c.grid.passage_truncs = get_list<int>(g, "passage_truncs");
    c.grid.pseudo_query_counts = get_list<int>(g, "pseudo_query_counts");
    c.grid.prompts = get_list<bool>(g, "prompts");
    c.grid.seeds = get_list<std::uint64_t>(g, "seeds");
    const json& b = g.at("base");
    c.grid.base.corpus_size = b.at("corpus_size").get<int>();
    c.grid.base.model_tag = size_tag_from_string(b.at("model_tag").get<std::string>());
    c.grid.base.passage_trunc = b.at("passage_trunc").get<int>();
    c.grid.base.pseudo_query_count = b.at("pseudo_query_count").get<int>();
    c.grid.base.prompts = b.at("prompts").get<bool>();
    c.grid.max_steps = g.at("max_steps").get<int>();
    c.grid.eval_every = g.at("eval_every").get<int>();
    c.grid.batch_size = g.at("batch_size").get<int>();
    c.grid.eval_pairs = g.at("eval_pairs").get<int>();
    c.propagate_seed();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

ModelConfig RunConfig::stage1_model(int vocab) const {
  ModelConfig m = ModelConfig::for_size(model_size, vocab, specs.passage_gen.source_max, specs.passage_gen.target_max);
  m.dropout = dropout;
  return m;
}

ModelConfig RunConfig::stage2_model(int vocab) const {
  ModelConfig m = ModelConfig::for_size(model_size, vocab, specs.url_gen.source_max, specs.url_gen.target_max);
  m.dropout = dropout;
  return m;
}

ModelConfig RunConfig::single_model(int vocab) const {
  ModelConfig m = ModelConfig::for_size(model_size, vocab, specs.passage_gen.source_max, specs.url_gen.target_max);
  m.dropout = dropout;
  return m;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("override '" + std::string(assignment) + "' must look like key.path=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    std::size_t dot = key.find('.', start);
    if (dot == std::string::npos) dot = key.size();
    pointer += "/" + key.substr(start, dot - start);
    start = dot + 1;
  }
  j[json::json_pointer(pointer)] = value;
}

}  // namespace genret
