#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "genret/tape.hpp"
#include "genret/tokenizer.hpp"

namespace genret {

struct TrainingPair;

enum class SizeTag { tiny, small, medium };

std::string_view to_string(SizeTag tag);
SizeTag size_tag_from_string(std::string_view name);

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 256;
  int vocab_size = 2048;
  int max_source_len = 32;
  int max_target_len = 64;
  double dropout = 0.0;
  double param_init_scale = 0.02;
  SizeTag size_tag = SizeTag::tiny;
  // Output projection shares the token embedding table.
  bool tie_output = true;

  /// Size ladder: tiny (64 wide, 2+2 layers), small (128, 4+4), medium (256, 6+6).
  static ModelConfig for_size(SizeTag tag, int vocab_size, int max_source_len, int max_target_len);

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Indices into the parameter list, one struct per sublayer.
struct AttentionParams {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};

struct EncoderLayerParams {
  int ln1_g, ln1_b;
  AttentionParams self;
  int ln2_g, ln2_b, w1, b1, w2, b2;
};

struct DecoderLayerParams {
  int ln1_g, ln1_b;
  AttentionParams self;
  int ln2_g, ln2_b;
  AttentionParams cross;
  int ln3_g, ln3_b, w1, b1, w2, b2;
};

enum class InitKind { normal, zeros, ones };

struct ParamShape {
  std::string name;
  int rows;
  int cols;
  InitKind init;
};

/// Parameter order (also the checkpoint payload order):
///   tok_emb, enc_pos, dec_pos,
///   per encoder layer: ln1, self-attention (q, k, v, o), ln2, ffn (w1, b1, w2, b2),
///   enc_ln,
///   per decoder layer: ln1, self-attention, ln2, cross-attention, ln3, ffn,
///   dec_ln, out_proj (untied only).
struct ParamLayout {
  int tok_emb = -1;
  int enc_pos = -1;
  int dec_pos = -1;
  std::vector<EncoderLayerParams> enc;
  int enc_ln_g = -1, enc_ln_b = -1;
  std::vector<DecoderLayerParams> dec;
  int dec_ln_g = -1, dec_ln_b = -1;
  int out_proj = -1;
  std::vector<ParamShape> shapes;

  static ParamLayout build(const ModelConfig& cfg);
};

template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
};

/// Encoder-decoder transformer (pre-norm, learned positions, ReLU FFN).
template <class T>
class BasicModel {
 public:
  explicit BasicModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  const Matrix<T>& param(int index) const { return params_[static_cast<std::size_t>(index)].value; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  std::int64_t step = 0;
  // Hash of the tokenizer whose ids this model reads and writes.
  std::string tokenizer_hash;

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<Parameter<T>> params_;
};

using Seq2SeqModel = BasicModel<float>;
// Float64 copy for finite-difference gradient checks.
using ProbeModel = BasicModel<double>;

/// Normal(0, param_init_scale) weights, zero biases, unit layer-norm gains.
Seq2SeqModel init_model(const ModelConfig& cfg, std::uint64_t seed);

template <class To, class From>
BasicModel<To> cast_model(const BasicModel<From>& src) {
  BasicModel<To> out(src.config());
  for (std::size_t i = 0; i < src.params().size(); ++i) {
    out.params()[i].value = src.params()[i].value.template cast<To>();
  }
  out.step = src.step;
  out.tokenizer_hash = src.tokenizer_hash;
  return out;
}

struct LossSum {
  double total = 0.0;       // summed -log p over counted target tokens
  std::size_t tokens = 0;   // non-PAD target tokens
};

/// Teacher-forced logits, one row per target position. Row t sees the
/// source and target_prefix[0..t-1] (decoder input is BOS + prefix[..-1]).
template <class T>
Matrix<T> forward(const BasicModel<T>& model, const TokenSequence& source, const TokenSequence& target_prefix);

/// -sum_i log softmax(logits_i)[target_i] over non-PAD positions.
template <class T>
LossSum cross_entropy(const Matrix<T>& logits, const TokenSequence& target);

/// Loss over a packed batch. When `grads` is non-null it receives the
/// gradient of the mean per-token loss, one matrix per parameter.
/// `dropout_rng` enables dropout (training mode).
template <class T>
LossSum batch_loss(const BasicModel<T>& model, std::span<const TrainingPair> batch,
                   std::vector<Matrix<T>>* grads, std::mt19937_64* dropout_rng = nullptr);

/// Sign of every ReLU input in the forward pass over `batch`. A parameter
/// step that changes this pattern crosses a kink of the loss.
template <class T>
std::vector<bool> relu_pattern(const BasicModel<T>& model, std::span<const TrainingPair> batch);

/// exp(total cross-entropy / total target tokens), evaluated in batches.
template <class T>
double perplexity(const BasicModel<T>& model, std::span<const TrainingPair> data, std::size_t batch_size = 64);

/// Incremental greedy-decoding helper: encodes the source once, then scores
/// the next token for any target prefix.
class DecodeSession {
 public:
  DecodeSession(const Seq2SeqModel& model, const TokenSequence& source);
  /// Logits for the token following `prefix` (ids after BOS).
  Eigen::VectorXf next_logits(std::span<const int> prefix) const;
  const Seq2SeqModel& model() const { return model_; }

 private:
  const Seq2SeqModel& model_;
  Matrix<float> memory_;
  int source_len_;
};

}  // namespace genret
