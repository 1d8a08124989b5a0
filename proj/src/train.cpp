#include "genret/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "genret/dataset.hpp"
#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr_peak > 0.0)) throw ValidationError("lr_peak must be positive");
  if (warmup_steps < 0 || max_steps < 0) throw ValidationError("step counts must be >= 0");
  if (warmup_steps > max_steps) throw ValidationError("warmup_steps must be <= max_steps");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("Adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ValidationError("Adam eps must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) throw ValidationError("grad_clip must be positive");
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
}

json TrainConfig::to_json() const {
  return {{"lr_peak", lr_peak},
          {"warmup_steps", warmup_steps},
          {"max_steps", max_steps},
          {"batch_size", batch_size},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"grad_clip", grad_clip ? json(*grad_clip) : json(nullptr)},
          {"seed", seed},
          {"eval_every", eval_every}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.lr_peak = j.value("lr_peak", c.lr_peak);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  if (auto it = j.find("grad_clip"); it != j.end()) {
    c.grad_clip = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  }
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  return c;
}

double learning_rate(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.warmup_steps <= 0) return cfg.lr_peak;
  return cfg.lr_peak * std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.warmup_steps));
}

AdamState AdamState::zeros_like(const Seq2SeqModel& model) {
  AdamState s;
  for (const auto& p : model.params()) {
    s.m.push_back(Matrix<float>::Zero(p.value.rows(), p.value.cols()));
    s.v.push_back(Matrix<float>::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

std::vector<std::size_t> batch_indices(std::size_t n, const TrainConfig& cfg, std::int64_t step) {
  if (n == 0) throw ValidationError("cannot draw a batch from an empty dataset");
  std::vector<std::size_t> out;
  const auto bs = static_cast<std::uint64_t>(cfg.batch_size);
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> perm(n);
  for (std::uint64_t i = 0; i < bs; ++i) {
    const std::uint64_t pos = static_cast<std::uint64_t>(step) * bs + i;
    const std::uint64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed(cfg.seed, epoch));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

TrainStats backward_and_step(Seq2SeqModel& model, AdamState& adam, std::span<const TrainingPair> batch,
                             const TrainConfig& cfg) {
  if (model.step >= cfg.max_steps) throw ValidationError("model already at max_steps");
  if (batch.empty()) throw ValidationError("empty batch");
  if (adam.m.size() != model.params().size()) throw ValidationError("optimizer state does not match model");

  std::vector<Matrix<float>> grads;
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed ^ 0xd50f, static_cast<std::uint64_t>(model.step)));
  LossSum loss = batch_loss(model, batch, &grads, model.config().dropout > 0.0 ? &dropout_rng : nullptr);
  const double mean_loss = loss.tokens ? loss.total / static_cast<double>(loss.tokens) : 0.0;
  if (!std::isfinite(mean_loss)) {
    throw RuntimeFailure("non-finite loss at step " + std::to_string(model.step) + " (sum " +
                         std::to_string(loss.total) + " over " + std::to_string(loss.tokens) + " tokens)");
  }

  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw RuntimeFailure("non-finite gradient at step " + std::to_string(model.step));
  float scale = 1.0f;
  if (cfg.grad_clip && norm > *cfg.grad_clip) scale = static_cast<float>(*cfg.grad_clip / norm);

  const std::int64_t t = model.step + 1;
  const double lr = learning_rate(cfg, t);
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const float bc2 = static_cast<float>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const float step_size = static_cast<float>(lr);
  const float eps = static_cast<float>(cfg.eps);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto g = grads[i].array() * scale;
    adam.m[i].array() = b1 * adam.m[i].array() + (1.0f - b1) * g;
    adam.v[i].array() = b2 * adam.v[i].array() + (1.0f - b2) * g.square();
    model.params()[i].value.array() -=
        step_size * (adam.m[i].array() / bc1) / ((adam.v[i].array() / bc2).sqrt() + eps);
  }
  model.step = t;
  return {t, mean_loss, lr, norm, std::nullopt};
}

void train(Seq2SeqModel& model, AdamState& adam, std::span<const TrainingPair> data,
           std::span<const TrainingPair> eval_data, const TrainConfig& cfg, const TrainHooks& hooks,
           std::optional<std::int64_t> until_step) {
  cfg.validate();
  if (data.empty()) throw ValidationError("training data is empty");
  const std::int64_t stop = std::min<std::int64_t>(until_step.value_or(cfg.max_steps), cfg.max_steps);
  std::vector<TrainingPair> batch;
  while (model.step < stop) {
    batch.clear();
    for (std::size_t i : batch_indices(data.size(), cfg, model.step)) batch.push_back(data[i]);
    TrainStats s = backward_and_step(model, adam, batch, cfg);
    const bool eval_now = s.step % cfg.eval_every == 0 || s.step == stop;
    if (eval_now && !eval_data.empty()) s.ppl = perplexity(model, eval_data);
    if (hooks.on_step) hooks.on_step(s);
    if (eval_now && hooks.on_eval) hooks.on_eval(s);
  }
}

std::string stats_csv_header() { return "step,loss,lr,ppl\n"; }

std::string stats_csv_row(const TrainStats& s) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << s.step << ',' << s.loss << ',' << s.lr << ',';
  if (s.ppl) out << *s.ppl;
  out << '\n';
  return out.str();
}

}  // namespace genret
