#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "boostedseq/att_lstm.hpp"
#include "boostedseq/corpus.hpp"

namespace boostedseq {

enum class LrMode { Adam, EpochDecay };
// Sgd is a plain gradient step, used to check the update algebra in isolation.
enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  std::size_t epochs_per_round = 40;
  std::size_t batch_size = 50;
  double learning_rate = 1e-3;
  double l2_lambda = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double dropout = 0.5;
  std::size_t lstm_dim = 350;
  std::size_t lstm_layers = 1;
  std::size_t unrolled_steps = 70;
  std::size_t word_dim = 50;
  std::size_t pos_dim = 5;
  int max_dist = 35;
  double grad_clip = 5.0;  // <= 0 disables
  LrMode lr_mode = LrMode::Adam;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t threads = 1;

  // Throws std::invalid_argument naming the offending key.
  void validate() const;
  EncodingConfig encoding() const { return {unrolled_steps, max_dist}; }
  ModelConfig model_config(std::size_t vocab_size, std::size_t num_classes) const;
};

std::string to_string(LrMode m);
std::string to_string(OptimizerKind k);
LrMode parse_lr_mode(const std::string& s);
OptimizerKind parse_optimizer(const std::string& s);

inline constexpr double kLogClamp = 1e-12;

// L0 = -sum_k log q[k, y_k], summed over the batch.
double cross_entropy(const Matrix& probs, std::span<const int> labels);
// dL0/dq, scaled by `scale`.
Matrix cross_entropy_grad(const Matrix& probs, std::span<const int> labels, double scale = 1.0);

// lambda * sum of squared entries over weight matrices (biases and embeddings excluded).
double l2_penalty(const ModelParams& params, double lambda);
void add_l2_gradient(const ModelParams& params, double lambda, ModelParams& grads);

double global_grad_norm(const ModelParams& grads);

// lr_{t} = lr_{t-1} * sqrt(1 - beta2^2) / (1 - beta1^t), exactly as printed.
double epoch_decay(double lr_prev, std::uint64_t t, double beta1, double beta2);
// Bias-corrected Adam step size lr * sqrt(1 - beta2^t) / (1 - beta1^t).
double adam_step_size(double lr, std::uint64_t t, double beta1, double beta2);

struct OptimizerState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double epoch_lr = 0.0;  // lr in force for the current epoch (epoch-decay mode)

  static OptimizerState for_model(const ClassifierModel& model, const TrainConfig& cfg);
};

// Advances the epoch counter; in epoch-decay mode decays epoch_lr once. Returns
// the learning rate in force for the new epoch.
double decay_learning_rate(OptimizerState& state, const TrainConfig& cfg);

// Effective gradient = clip(data_grads) * boost_scale + 2*lambda*W, then one optimizer step.
// Throws std::domain_error on a non-finite update.
void apply_update(ClassifierModel& model, const ModelParams& data_grads, OptimizerState& opt,
                  const TrainConfig& cfg, double boost_scale);

// boost_scale_i = D_i * beta with beta = 1 / max_j D_j.
std::vector<double> boost_scales(std::span<const double> batch_weights);

// Fraction of rows whose argmax differs from the label.
double batch_error(const Matrix& probs, std::span<const int> labels);
std::size_t argmax(std::span<const double> v);

struct EpochResult {
  std::vector<double> batch_errors;  // tau_i from the training pass
  double mean_loss = 0.0;            // mean cross-entropy per sentence
  double lr = 0.0;
};

EpochResult train_epoch(ClassifierModel& model, const std::vector<Batch>& batches,
                        std::span<const double> batch_weights, const TrainConfig& cfg,
                        OptimizerState& opt, Rng& dropout_rng);

// Inference-mode tau_i for every batch.
std::vector<double> evaluate_batch_errors(const ClassifierModel& model,
                                          const std::vector<Batch>& batches,
                                          std::size_t threads = 1);

}  // namespace boostedseq
