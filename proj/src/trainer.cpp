#include "boostedseq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boostedseq/parallel.hpp"

namespace boostedseq {

namespace {

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(key) + ": " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs_per_round >= 1, "epochs_per_round", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(l2_lambda >= 0.0, "l2_lambda", "must be non-negative");
  require(beta1 > 0.0 && beta1 < 1.0, "beta1", "must be in (0, 1)");
  require(beta2 > 0.0 && beta2 < 1.0, "beta2", "must be in (0, 1)");
  require(adam_epsilon > 0.0, "adam_epsilon", "must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must be in [0, 1)");
  require(lstm_dim >= 1, "lstm_dim", "must be >= 1");
  require(lstm_layers >= 1, "lstm_layers", "must be >= 1");
  require(unrolled_steps >= 1, "unrolled_steps", "must be >= 1");
  require(word_dim >= 1, "word_dim", "must be >= 1");
  require(pos_dim >= 1, "pos_dim", "must be >= 1");
  require(max_dist >= 1, "max_dist", "must be >= 1");
  require(threads >= 1, "threads", "must be >= 1");
}

ModelConfig TrainConfig::model_config(std::size_t vocab_size, std::size_t num_classes) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.num_classes = num_classes;
  m.word_dim = word_dim;
  m.pos_dim = pos_dim;
  m.position_rows = static_cast<std::size_t>(2 * max_dist + 1);
  m.hidden = lstm_dim;
  m.layers = lstm_layers;
  m.dropout = dropout;
  return m;
}

std::string to_string(LrMode m) { return m == LrMode::Adam ? "adam" : "epoch-decay"; }
std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

LrMode parse_lr_mode(const std::string& s) {
  if (s == "adam") return LrMode::Adam;
  if (s == "epoch-decay") return LrMode::EpochDecay;
  throw std::invalid_argument("lr_mode: expected adam or epoch-decay, got '" + s + "'");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw std::invalid_argument("optimizer: expected adam or sgd, got '" + s + "'");
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
  require_size(labels.size(), probs.rows(), "cross_entropy labels");
  double loss = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double q = probs.at(k, static_cast<std::size_t>(labels[k]));
    loss -= std::log(std::max(q, kLogClamp));
  }
  return loss;
}

Matrix cross_entropy_grad(const Matrix& probs, std::span<const int> labels, double scale) {
  require_size(labels.size(), probs.rows(), "cross_entropy_grad labels");
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto y = static_cast<std::size_t>(labels[k]);
    const double q = probs.at(k, y);
    // Zero gradient inside the clamped region.
    if (q > kLogClamp) g(k, y) = -scale / q;
  }
  return g;
}

double l2_penalty(const ModelParams& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  params.for_each([&sum](const std::string&, const Matrix& m, ParamKind kind) {
    if (kind == ParamKind::Weight) sum += squared_norm(m.flat());
  });
  return lambda * sum;
}

void add_l2_gradient(const ModelParams& params, double lambda, ModelParams& grads) {
  if (lambda == 0.0) return;
  std::vector<const Matrix*> weights;
  params.for_each([&weights](const std::string&, const Matrix& m, ParamKind kind) {
    weights.push_back(kind == ParamKind::Weight ? &m : nullptr);
  });
  std::size_t i = 0;
  grads.for_each([&](const std::string&, Matrix& g, ParamKind) {
    if (const Matrix* w = weights[i++]) axpy(2.0 * lambda, w->flat(), g.flat());
  });
}

double global_grad_norm(const ModelParams& grads) {
  double sum = 0.0;
  grads.for_each(
      [&sum](const std::string&, const Matrix& m, ParamKind) { sum += squared_norm(m.flat()); });
  return std::sqrt(sum);
}

double epoch_decay(double lr_prev, std::uint64_t t, double beta1, double beta2) {
  if (t < 1) throw std::invalid_argument("epoch_decay: t must be >= 1");
  return lr_prev * std::sqrt(1.0 - beta2 * beta2) / (1.0 - std::pow(beta1, static_cast<double>(t)));
}

double adam_step_size(double lr, std::uint64_t t, double beta1, double beta2) {
  if (t < 1) throw std::invalid_argument("adam_step_size: t must be >= 1");
  const double td = static_cast<double>(t);
  return lr * std::sqrt(1.0 - std::pow(beta2, td)) / (1.0 - std::pow(beta1, td));
}

OptimizerState OptimizerState::for_model(const ClassifierModel& model, const TrainConfig& cfg) {
  OptimizerState s;
  s.first_moment = model.params.zeros_like();
  s.second_moment = model.params.zeros_like();
  s.epoch_lr = cfg.learning_rate;
  return s;
}

double decay_learning_rate(OptimizerState& state, const TrainConfig& cfg) {
  ++state.epoch;
  if (cfg.lr_mode == LrMode::EpochDecay) {
    state.epoch_lr = epoch_decay(state.epoch_lr, state.epoch, cfg.beta1, cfg.beta2);
  }
  return state.epoch_lr;
}

void apply_update(ClassifierModel& model, const ModelParams& data_grads, OptimizerState& opt,
                  const TrainConfig& cfg, double boost_scale) {
  if (!(boost_scale > 0.0 && boost_scale <= 1.0)) {
    throw std::invalid_argument("apply_update: boost_scale must be in (0, 1]");
  }
  double scale = boost_scale;
  if (cfg.grad_clip > 0.0) {
    const double norm = global_grad_norm(data_grads);
    if (norm > cfg.grad_clip) scale *= cfg.grad_clip / norm;
  }
  ModelParams grads = data_grads;
  if (scale != 1.0) {
    grads.for_each([scale](const std::string&, Matrix& g, ParamKind) { g *= scale; });
  }
  add_l2_gradient(model.params, cfg.l2_lambda, grads);

  ++opt.step;
  // Flatten the parallel walks over params, grads and moments.
  std::vector<Matrix*> ps, gs, ms, vs;
  model.params.for_each([&](const std::string&, Matrix& m, ParamKind) { ps.push_back(&m); });
  grads.for_each([&](const std::string&, Matrix& m, ParamKind) { gs.push_back(&m); });
  opt.first_moment.for_each([&](const std::string&, Matrix& m, ParamKind) { ms.push_back(&m); });
  opt.second_moment.for_each([&](const std::string&, Matrix& m, ParamKind) { vs.push_back(&m); });

  double step_size = opt.epoch_lr;
  if (cfg.optimizer == OptimizerKind::Adam && cfg.lr_mode == LrMode::Adam) {
    step_size = adam_step_size(cfg.learning_rate, opt.step, cfg.beta1, cfg.beta2);
  }

  for (std::size_t b = 0; b < ps.size(); ++b) {
    require_shape(*ps[b], *gs[b], "apply_update");
    auto p = ps[b]->flat();
    auto g = gs[b]->flat();
    if (cfg.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step_size * g[i];
    } else {
      auto m = ms[b]->flat();
      auto v = vs[b]->flat();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        p[i] -= step_size * m[i] / (std::sqrt(v[i]) + cfg.adam_epsilon);
      }
    }
    if (!all_finite(p)) throw std::domain_error("apply_update: non-finite parameter update");
  }
  for (double& v : model.params.embeddings.word.row(Vocabulary::kPad)) v = 0.0;
}

std::vector<double> boost_scales(std::span<const double> batch_weights) {
  if (batch_weights.empty()) return {};
  const double mx = *std::max_element(batch_weights.begin(), batch_weights.end());
  if (!(mx > 0.0)) throw std::invalid_argument("boost_scales: weights must be positive");
  const double beta = 1.0 / mx;
  std::vector<double> out;
  out.reserve(batch_weights.size());
  for (double d : batch_weights) out.push_back(std::min(1.0, d * beta));
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double batch_error(const Matrix& probs, std::span<const int> labels) {
  require_size(labels.size(), probs.rows(), "batch_error labels");
  if (labels.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (argmax(probs.row(k)) != static_cast<std::size_t>(labels[k])) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

EpochResult train_epoch(ClassifierModel& model, const std::vector<Batch>& batches,
                        std::span<const double> batch_weights, const TrainConfig& cfg,
                        OptimizerState& opt, Rng& dropout_rng) {
  require_size(batch_weights.size(), batches.size(), "train_epoch batch weights");
  const auto scales = boost_scales(batch_weights);
  EpochResult r;
  r.lr = opt.epoch_lr;
  r.batch_errors.reserve(batches.size());
  double loss_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const Batch& b = batches[i];
    const auto labels = b.labels();
    auto fwd = classifier_forward(b, model, true, dropout_rng);
    r.batch_errors.push_back(batch_error(fwd.probs, labels));
    loss_sum += cross_entropy(fwd.probs, labels);
    count += b.size();
    const Matrix dq = cross_entropy_grad(fwd.probs, labels);
    const ModelParams grads = classifier_backward(b, fwd, dq, model);
    apply_update(model, grads, opt, cfg, scales[i]);
  }
  r.mean_loss = count ? loss_sum / static_cast<double>(count) : 0.0;
  return r;
}

std::vector<double> evaluate_batch_errors(const ClassifierModel& model,
                                          const std::vector<Batch>& batches,
                                          std::size_t threads) {
  std::vector<double> errors(batches.size());
  parallel_for(batches.size(), threads, [&](std::size_t i) {
    Rng unused(0);
    auto fwd = classifier_forward(batches[i], model, false, unused);
    errors[i] = batch_error(fwd.probs, batches[i].labels());
  });
  return errors;
}

}  // namespace boostedseq
