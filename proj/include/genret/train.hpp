#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "genret/model.hpp"

namespace genret {

struct TrainingPair;

struct TrainConfig {
  double lr_peak = 3e-4;
  int warmup_steps = 200;
  int max_steps = 2000;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> grad_clip = 1.0;
  std::uint64_t seed = 0;
  int eval_every = 100;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// lr_peak * min(1, step / warmup_steps). The update that completes step s
/// (1-based) uses learning_rate(s), so learning_rate(0) == 0 is never applied.
double learning_rate(const TrainConfig& cfg, std::int64_t step);

/// First and second moment estimates, one matrix per parameter.
struct AdamState {
  std::vector<Matrix<float>> m;
  std::vector<Matrix<float>> v;

  static AdamState zeros_like(const Seq2SeqModel& model);
};

struct TrainStats {
  std::int64_t step = 0;
  double loss = 0.0;  // mean per-token cross-entropy of the batch
  double lr = 0.0;
  double grad_norm = 0.0;
  std::optional<double> ppl;
};

/// Rows of `n` examples used for the batch that completes step `step`+1.
/// Pure function of (seed, step): each epoch is a seeded permutation.
std::vector<std::size_t> batch_indices(std::size_t n, const TrainConfig& cfg, std::int64_t step);

/// One Adam step on the mean per-token loss of `batch`. Throws RuntimeFailure
/// if the loss or any gradient is non-finite.
TrainStats backward_and_step(Seq2SeqModel& model, AdamState& adam, std::span<const TrainingPair> batch,
                             const TrainConfig& cfg);

struct TrainHooks {
  // Called after every step; ppl is set on eval steps.
  std::function<void(const TrainStats&)> on_step;
  // Called after each eval step (e.g. to checkpoint).
  std::function<void(const TrainStats&)> on_eval;
};

/// Trains until model.step == until_step (default cfg.max_steps). Perplexity
/// is measured on `eval_data` every cfg.eval_every steps and at the end.
void train(Seq2SeqModel& model, AdamState& adam, std::span<const TrainingPair> data,
           std::span<const TrainingPair> eval_data, const TrainConfig& cfg, const TrainHooks& hooks = {},
           std::optional<std::int64_t> until_step = std::nullopt);

/// "step,loss,lr,ppl" rows; ppl is blank on non-eval steps.
std::string stats_csv_header();
std::string stats_csv_row(const TrainStats& s);

}  // namespace genret
