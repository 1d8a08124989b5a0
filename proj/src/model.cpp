#include "genret/model.hpp"

#include <cmath>

#include "genret/dataset.hpp"
#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

std::string_view to_string(SizeTag tag) {
  switch (tag) {
    case SizeTag::tiny:
      return "tiny";
    case SizeTag::small:
      return "small";
    case SizeTag::medium:
      return "medium";
  }
  return "tiny";
}

SizeTag size_tag_from_string(std::string_view name) {
  if (name == "tiny") return SizeTag::tiny;
  if (name == "small") return SizeTag::small;
  if (name == "medium") return SizeTag::medium;
  throw ValidationError("unknown model size '" + std::string(name) + "'");
}

ModelConfig ModelConfig::for_size(SizeTag tag, int vocab_size, int max_source_len, int max_target_len) {
  ModelConfig c;
  c.size_tag = tag;
  switch (tag) {
    case SizeTag::tiny:
      c.d_model = 64, c.n_heads = 4, c.n_enc_layers = 2, c.n_dec_layers = 2, c.d_ff = 256;
      break;
    case SizeTag::small:
      c.d_model = 128, c.n_heads = 4, c.n_enc_layers = 4, c.n_dec_layers = 4, c.d_ff = 512;
      break;
    case SizeTag::medium:
      c.d_model = 256, c.n_heads = 8, c.n_enc_layers = 6, c.n_dec_layers = 6, c.d_ff = 1024;
      break;
  }
  c.vocab_size = vocab_size;
  c.max_source_len = max_source_len;
  c.max_target_len = max_target_len;
  return c;
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_ff <= 0) throw ValidationError("model dimensions must be positive");
  if (d_model % n_heads != 0) {
    throw ValidationError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                          std::to_string(n_heads));
  }
  if (n_enc_layers < 0 || n_dec_layers < 0) throw ValidationError("layer counts must be >= 0");
  if (vocab_size < kNumSpecial + 1) throw ValidationError("vocab_size too small");
  if (max_source_len < 1 || max_target_len < 1) throw ValidationError("max lengths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
  if (!(param_init_scale > 0.0)) throw ValidationError("param_init_scale must be positive");
}

json ModelConfig::to_json() const {
  return {{"d_model", d_model},
          {"n_heads", n_heads},
          {"n_enc_layers", n_enc_layers},
          {"n_dec_layers", n_dec_layers},
          {"d_ff", d_ff},
          {"vocab_size", vocab_size},
          {"max_source_len", max_source_len},
          {"max_target_len", max_target_len},
          {"dropout", dropout},
          {"param_init_scale", param_init_scale},
          {"size_tag", to_string(size_tag)},
          {"tie_output", tie_output}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_enc_layers = j.value("n_enc_layers", c.n_enc_layers);
  c.n_dec_layers = j.value("n_dec_layers", c.n_dec_layers);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_source_len = j.value("max_source_len", c.max_source_len);
  c.max_target_len = j.value("max_target_len", c.max_target_len);
  c.dropout = j.value("dropout", c.dropout);
  c.param_init_scale = j.value("param_init_scale", c.param_init_scale);
  c.size_tag = size_tag_from_string(j.value("size_tag", std::string("tiny")));
  c.tie_output = j.value("tie_output", c.tie_output);
  return c;
}

ParamLayout ParamLayout::build(const ModelConfig& cfg) {
  ParamLayout l;
  const int d = cfg.d_model;
  auto add = [&](std::string name, int rows, int cols, InitKind init) {
    l.shapes.push_back({std::move(name), rows, cols, init});
    return static_cast<int>(l.shapes.size()) - 1;
  };
  auto add_ln = [&](const std::string& prefix, int& g, int& b) {
    g = add(prefix + ".gain", 1, d, InitKind::ones);
    b = add(prefix + ".bias", 1, d, InitKind::zeros);
  };
  auto add_attn = [&](const std::string& prefix) {
    AttentionParams a{};
    a.wq = add(prefix + ".wq", d, d, InitKind::normal);
    a.bq = add(prefix + ".bq", 1, d, InitKind::zeros);
    a.wk = add(prefix + ".wk", d, d, InitKind::normal);
    a.bk = add(prefix + ".bk", 1, d, InitKind::zeros);
    a.wv = add(prefix + ".wv", d, d, InitKind::normal);
    a.bv = add(prefix + ".bv", 1, d, InitKind::zeros);
    a.wo = add(prefix + ".wo", d, d, InitKind::normal);
    a.bo = add(prefix + ".bo", 1, d, InitKind::zeros);
    return a;
  };

  l.tok_emb = add("tok_emb", cfg.vocab_size, d, InitKind::normal);
  l.enc_pos = add("enc_pos", cfg.max_source_len, d, InitKind::normal);
  l.dec_pos = add("dec_pos", cfg.max_target_len, d, InitKind::normal);
  for (int i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    EncoderLayerParams e{};
    add_ln(p + ".ln1", e.ln1_g, e.ln1_b);
    e.self = add_attn(p + ".self");
    add_ln(p + ".ln2", e.ln2_g, e.ln2_b);
    e.w1 = add(p + ".ffn.w1", d, cfg.d_ff, InitKind::normal);
    e.b1 = add(p + ".ffn.b1", 1, cfg.d_ff, InitKind::zeros);
    e.w2 = add(p + ".ffn.w2", cfg.d_ff, d, InitKind::normal);
    e.b2 = add(p + ".ffn.b2", 1, d, InitKind::zeros);
    l.enc.push_back(e);
  }
  add_ln("enc_ln", l.enc_ln_g, l.enc_ln_b);
  for (int i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    DecoderLayerParams e{};
    add_ln(p + ".ln1", e.ln1_g, e.ln1_b);
    e.self = add_attn(p + ".self");
    add_ln(p + ".ln2", e.ln2_g, e.ln2_b);
    e.cross = add_attn(p + ".cross");
    add_ln(p + ".ln3", e.ln3_g, e.ln3_b);
    e.w1 = add(p + ".ffn.w1", d, cfg.d_ff, InitKind::normal);
    e.b1 = add(p + ".ffn.b1", 1, cfg.d_ff, InitKind::zeros);
    e.w2 = add(p + ".ffn.w2", cfg.d_ff, d, InitKind::normal);
    e.b2 = add(p + ".ffn.b2", 1, d, InitKind::zeros);
    l.dec.push_back(e);
  }
  add_ln("dec_ln", l.dec_ln_g, l.dec_ln_b);
  if (!cfg.tie_output) l.out_proj = add("out_proj", cfg.vocab_size, d, InitKind::normal);
  return l;
}

template <class T>
BasicModel<T>::BasicModel(const ModelConfig& cfg) : config_(cfg) {
  config_.validate();
  layout_ = ParamLayout::build(config_);
  params_.reserve(layout_.shapes.size());
  for (const auto& s : layout_.shapes) params_.push_back({s.name, Matrix<T>::Zero(s.rows, s.cols)});
}

template <class T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <class T>
bool BasicModel<T>::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

Seq2SeqModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Seq2SeqModel model(cfg);
  std::mt19937_64 rng(mix_seed(seed, "init_model"));
  std::normal_distribution<double> normal(0.0, cfg.param_init_scale);
  const auto& shapes = model.layout().shapes;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto& v = model.params()[i].value;
    switch (shapes[i].init) {
      case InitKind::normal:
        for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = static_cast<float>(normal(rng));
        break;
      case InitKind::zeros:
        v.setZero();
        break;
      case InitKind::ones:
        v.setOnes();
        break;
    }
  }
  return model;
}

namespace {

struct PackedBatch {
  std::vector<int> src_ids, src_pos;
  std::vector<Segment> src_segs;
  std::vector<int> dec_ids, dec_pos, targets;
  std::vector<Segment> tgt_segs;
};

void check_lengths(const ModelConfig& cfg, std::size_t src_len, std::size_t tgt_len) {
  if (src_len == 0) throw ValidationError("empty source sequence");
  if (src_len > static_cast<std::size_t>(cfg.max_source_len)) {
    throw ValidationError("source length " + std::to_string(src_len) + " exceeds max_source_len " +
                          std::to_string(cfg.max_source_len));
  }
  if (tgt_len > static_cast<std::size_t>(cfg.max_target_len)) {
    throw ValidationError("target length " + std::to_string(tgt_len) + " exceeds max_target_len " +
                          std::to_string(cfg.max_target_len));
  }
}

void append(PackedBatch& b, const ModelConfig& cfg, std::span<const int> src, std::span<const int> tgt) {
  check_lengths(cfg, src.size(), tgt.size());
  for (int id : src) {
    if (id < 0 || id >= cfg.vocab_size) throw ValidationError("token id out of range");
  }
  for (int id : tgt) {
    if (id < 0 || id >= cfg.vocab_size) throw ValidationError("token id out of range");
  }
  b.src_segs.push_back({static_cast<int>(b.src_ids.size()), static_cast<int>(src.size())});
  for (std::size_t i = 0; i < src.size(); ++i) {
    b.src_ids.push_back(src[i]);
    b.src_pos.push_back(static_cast<int>(i));
  }
  b.tgt_segs.push_back({static_cast<int>(b.dec_ids.size()), static_cast<int>(tgt.size())});
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    b.dec_ids.push_back(i == 0 ? kBosId : tgt[i - 1]);
    b.dec_pos.push_back(static_cast<int>(i));
    b.targets.push_back(tgt[i]);
  }
}

template <class T>
struct Graph {
  using Var = typename Tape<T>::Var;
  Tape<T>& tape;
  const BasicModel<T>& model;
  std::vector<Var> p;
  std::mt19937_64* rng;

  Graph(Tape<T>& t, const BasicModel<T>& m, std::mt19937_64* r) : tape(t), model(m), rng(r) {
    p.reserve(m.params().size());
    for (const auto& param : m.params()) p.push_back(tape.parameter(param.value));
  }

  Var drop(Var x) {
    if (!rng) return x;
    return tape.dropout(x, static_cast<T>(model.config().dropout), *rng);
  }

  Var ln(Var x, int g, int b) { return tape.layer_norm(x, p[g], p[b]); }

  Var attend(Var x, Var kv_source, const AttentionParams& a, std::span<const Segment> q_segs,
             std::span<const Segment> k_segs, bool causal) {
    Var q = tape.linear(x, p[a.wq], p[a.bq]);
    Var k = tape.linear(kv_source, p[a.wk], p[a.bk]);
    Var v = tape.linear(kv_source, p[a.wv], p[a.bv]);
    Var o = tape.attention(q, k, v, q_segs, k_segs, model.config().n_heads, causal);
    return tape.linear(o, p[a.wo], p[a.bo]);
  }

  Var ffn(Var x, int w1, int b1, int w2, int b2) {
    return tape.linear(tape.relu(tape.linear(x, p[w1], p[b1])), p[w2], p[b2]);
  }

  Var encode(std::span<const int> ids, std::span<const int> pos, std::span<const Segment> segs) {
    const ParamLayout& l = model.layout();
    Var x = drop(tape.embed(p[l.tok_emb], ids, p[l.enc_pos], pos));
    for (const auto& e : l.enc) {
      Var h = ln(x, e.ln1_g, e.ln1_b);
      x = tape.add(x, drop(attend(h, h, e.self, segs, segs, false)));
      x = tape.add(x, drop(ffn(ln(x, e.ln2_g, e.ln2_b), e.w1, e.b1, e.w2, e.b2)));
    }
    return ln(x, l.enc_ln_g, l.enc_ln_b);
  }

  Var decode(Var memory, std::span<const int> ids, std::span<const int> pos, std::span<const Segment> tgt_segs,
             std::span<const Segment> src_segs) {
    const ParamLayout& l = model.layout();
    Var x = drop(tape.embed(p[l.tok_emb], ids, p[l.dec_pos], pos));
    for (const auto& e : l.dec) {
      Var h = ln(x, e.ln1_g, e.ln1_b);
      x = tape.add(x, drop(attend(h, h, e.self, tgt_segs, tgt_segs, true)));
      x = tape.add(x, drop(attend(ln(x, e.ln2_g, e.ln2_b), memory, e.cross, tgt_segs, src_segs, false)));
      x = tape.add(x, drop(ffn(ln(x, e.ln3_g, e.ln3_b), e.w1, e.b1, e.w2, e.b2)));
    }
    return ln(x, l.dec_ln_g, l.dec_ln_b);
  }

  int output_table() const {
    const ParamLayout& l = model.layout();
    return l.out_proj >= 0 ? l.out_proj : l.tok_emb;
  }
};

}  // namespace

template <class T>
Matrix<T> forward(const BasicModel<T>& model, const TokenSequence& source, const TokenSequence& target_prefix) {
  PackedBatch b;
  append(b, model.config(), source.ids, target_prefix.ids);
  Tape<T> tape(false);
  Graph<T> g(tape, model, nullptr);
  auto memory = g.encode(b.src_ids, b.src_pos, b.src_segs);
  auto hidden = g.decode(memory, b.dec_ids, b.dec_pos, b.tgt_segs, b.src_segs);
  auto logits = tape.project_out(hidden, g.p[g.output_table()]);
  return tape.value(logits);
}

template <class T>
LossSum cross_entropy(const Matrix<T>& logits, const TokenSequence& target) {
  if (static_cast<std::size_t>(logits.rows()) != target.ids.size()) {
    throw ValidationError("cross_entropy: logits rows do not match target length");
  }
  LossSum out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = target.ids[static_cast<std::size_t>(r)];
    if (t == kPadId) continue;
    const double mx = static_cast<double>(logits.row(r).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(static_cast<double>(logits(r, c)) - mx);
    out.total += mx + std::log(sum) - static_cast<double>(logits(r, t));
    ++out.tokens;
  }
  return out;
}

template <class T>
LossSum batch_loss(const BasicModel<T>& model, std::span<const TrainingPair> batch, std::vector<Matrix<T>>* grads,
                   std::mt19937_64* dropout_rng) {
  PackedBatch b;
  for (const auto& pair : batch) append(b, model.config(), pair.source.ids, pair.target.ids);
  Tape<T> tape(grads != nullptr);
  Graph<T> g(tape, model, dropout_rng);
  auto memory = g.encode(b.src_ids, b.src_pos, b.src_segs);
  auto hidden = g.decode(memory, b.dec_ids, b.dec_pos, b.tgt_segs, b.src_segs);
  auto logits = tape.project_out(hidden, g.p[g.output_table()]);
  auto loss = tape.cross_entropy_sum(logits, b.targets, kPadId);

  LossSum out;
  out.total = static_cast<double>(tape.value(loss)(0, 0));
  for (int t : b.targets) out.tokens += (t != kPadId);

  if (grads) {
    if (out.tokens > 0) tape.backward(loss, T(1) / static_cast<T>(out.tokens));
    grads->clear();
    grads->reserve(g.p.size());
    for (std::size_t i = 0; i < g.p.size(); ++i) {
      const auto& gr = tape.grad(g.p[i]);
      const auto& v = model.params()[i].value;
      grads->push_back(gr.size() == 0 ? Matrix<T>::Zero(v.rows(), v.cols()) : gr);
    }
  }
  return out;
}

template <class T>
std::vector<bool> relu_pattern(const BasicModel<T>& model, std::span<const TrainingPair> batch) {
  PackedBatch b;
  for (const auto& pair : batch) append(b, model.config(), pair.source.ids, pair.target.ids);
  std::vector<bool> signs;
  Tape<T> tape(false);
  tape.record_relu_signs(&signs);
  Graph<T> g(tape, model, nullptr);
  auto memory = g.encode(b.src_ids, b.src_pos, b.src_segs);
  g.decode(memory, b.dec_ids, b.dec_pos, b.tgt_segs, b.src_segs);
  return signs;
}

template <class T>
double perplexity(const BasicModel<T>& model, std::span<const TrainingPair> data, std::size_t batch_size) {
  if (data.empty()) throw ValidationError("perplexity needs a nonempty dataset");
  LossSum total;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - i);
    LossSum part = batch_loss(model, data.subspan(i, n), static_cast<std::vector<Matrix<T>>*>(nullptr));
    total.total += part.total;
    total.tokens += part.tokens;
  }
  return std::exp(total.total / static_cast<double>(total.tokens));
}

DecodeSession::DecodeSession(const Seq2SeqModel& model, const TokenSequence& source)
    : model_(model), source_len_(static_cast<int>(source.ids.size())) {
  PackedBatch b;
  append(b, model.config(), source.ids, {});
  Tape<float> tape(false);
  Graph<float> g(tape, model, nullptr);
  memory_ = tape.value(g.encode(b.src_ids, b.src_pos, b.src_segs));
}

Eigen::VectorXf DecodeSession::next_logits(std::span<const int> prefix) const {
  const ModelConfig& cfg = model_.config();
  const std::size_t len = prefix.size() + 1;
  if (len > static_cast<std::size_t>(cfg.max_target_len)) throw ValidationError("decode prefix exceeds max_target_len");
  std::vector<int> ids{kBosId}, pos;
  ids.insert(ids.end(), prefix.begin(), prefix.end());
  for (std::size_t i = 0; i < len; ++i) pos.push_back(static_cast<int>(i));
  const std::vector<Segment> tgt_segs{{0, static_cast<int>(len)}};
  const std::vector<Segment> src_segs{{0, source_len_}};
  Tape<float> tape(false);
  Graph<float> g(tape, model_, nullptr);
  auto memory = tape.constant(memory_);
  auto hidden = g.decode(memory, ids, pos, tgt_segs, src_segs);
  const auto& h = tape.value(hidden);
  const auto& table = model_.param(g.output_table());
  return table * h.row(h.rows() - 1).transpose();
}

template class BasicModel<float>;
template class BasicModel<double>;
template Matrix<float> forward(const BasicModel<float>&, const TokenSequence&, const TokenSequence&);
template Matrix<double> forward(const BasicModel<double>&, const TokenSequence&, const TokenSequence&);
template LossSum cross_entropy(const Matrix<float>&, const TokenSequence&);
template LossSum cross_entropy(const Matrix<double>&, const TokenSequence&);
template LossSum batch_loss(const BasicModel<float>&, std::span<const TrainingPair>, std::vector<Matrix<float>>*,
                            std::mt19937_64*);
template LossSum batch_loss(const BasicModel<double>&, std::span<const TrainingPair>, std::vector<Matrix<double>>*,
                            std::mt19937_64*);
template std::vector<bool> relu_pattern(const BasicModel<float>&, std::span<const TrainingPair>);
template std::vector<bool> relu_pattern(const BasicModel<double>&, std::span<const TrainingPair>);
template double perplexity(const BasicModel<float>&, std::span<const TrainingPair>, std::size_t);
template double perplexity(const BasicModel<double>&, std::span<const TrainingPair>, std::size_t);

}  // namespace genret
