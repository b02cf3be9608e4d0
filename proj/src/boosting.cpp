#include "boostedseq/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "boostedseq/parallel.hpp"

namespace boostedseq {

std::vector<double> init_weights(std::size_t n) {
  if (n == 0) throw std::invalid_argument("init_weights: need at least one batch");
  std::vector<double> d(n, 1.0 / static_cast<double>(n));
  // The last entry absorbs the rounding so a left-to-right sum is exactly 1.
  // The others sum to at least 1/2, so the subtraction is exact.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) head += d[i];
  d[n - 1] = 1.0 - head;
  return d;
}

double weighted_error_raw(std::span<const double> batch_errors, std::span<const double> weights) {
  require_size(batch_errors.size(), weights.size(), "weighted_error");
  double eps = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) eps += weights[i] * batch_errors[i];
  return eps;
}

double weighted_error(std::span<const double> batch_errors, std::span<const double> weights) {
  return std::clamp(weighted_error_raw(batch_errors, weights), kErrorClamp, 0.5 - kErrorClamp);
}

double classifier_weight(double error, std::size_t num_classes, bool samme) {
  if (!(error > 0.0 && error < 1.0)) {
    throw std::invalid_argument("classifier_weight: error must be in (0, 1)");
  }
  double a = 0.5 * std::log((1.0 - error) / error);
  if (samme && num_classes > 2) a += std::log(static_cast<double>(num_classes - 1));
  return a;
}

std::vector<double> update_weights(std::span<const double> weights, double clf_weight,
                                   std::span<const double> batch_errors) {
  require_size(batch_errors.size(), weights.size(), "update_weights");
  std::vector<double> next(weights.size());
  double z = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double margin = 1.0 - 2.0 * batch_errors[i];
    next[i] = weights[i] * std::exp(-clf_weight * margin);
    z += next[i];
  }
  for (double& d : next) d /= z;
  return next;
}

BoostResult run_boosting(const Dataset& train, const Vocabulary& vocab, const TrainConfig& cfg,
                         const BoostConfig& boost, const std::optional<Matrix>& word_table,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (boost.rounds < 1) throw std::invalid_argument("rounds: must be >= 1");
  const Rng root(boost.seed);

  // One seeded shuffle; the partition is then fixed for every round.
  Rng shuffle_rng = root.split(streams::kShuffle);
  const auto batches = batchify(train, vocab, cfg.encoding(), cfg.batch_size, shuffle_rng, true);

  BoostResult result;
  result.partition_fingerprint = partition_fingerprint(batches);
  std::vector<double> weights = init_weights(batches.size());
  const ModelConfig mcfg = cfg.model_config(vocab.size(), train.num_relations());

  for (std::size_t t = 1; t <= boost.rounds; ++t) {
    Rng init_rng = root.split(streams::kInitBase + t);
    Rng dropout_rng = root.split(streams::kDropoutBase + t);
    ClassifierModel model = init_model(mcfg, init_rng);
    if (word_table) set_word_table(model, *word_table);
    OptimizerState opt = OptimizerState::for_model(model, cfg);

    std::optional<ClassifierModel> best;
    std::vector<double> best_errors;
    double best_eps = 0.0;
    std::size_t best_epoch = 0;
    for (std::size_t e = 1; e <= cfg.epochs_per_round; ++e) {
      const EpochResult er = train_epoch(model, batches, weights, cfg, opt, dropout_rng);
      auto errors = evaluate_batch_errors(model, batches, cfg.threads);
      const double eps = weighted_error_raw(errors, weights);
      if (on_epoch) on_epoch({t, e, er.mean_loss, eps, er.lr});
      if (!best || eps < best_eps) {
        best = model;
        best_errors = std::move(errors);
        best_eps = eps;
        best_epoch = e;
      }
      decay_learning_rate(opt, cfg);
    }

    RoundRecord rec;
    rec.round = t;
    rec.error = weighted_error(best_errors, weights);
    rec.clf_weight = classifier_weight(rec.error, train.num_relations(), boost.samme);
    rec.selected_epoch = best_epoch;
    rec.batch_weights = weights;
    weights = update_weights(weights, rec.clf_weight, best_errors);

    result.ensemble.models.push_back(std::move(*best));
    result.ensemble.clf_weights.push_back(rec.clf_weight);
    result.history.push_back(std::move(rec));
  }
  result.final_weights = std::move(weights);
  return result;
}

Vector ensemble_vote(std::span<const Vector> member_probs, std::span<const double> clf_weights) {
  require_size(member_probs.size(), clf_weights.size(), "ensemble_vote");
  if (member_probs.empty()) throw std::invalid_argument("ensemble_vote: empty ensemble");
  Vector votes(member_probs[0].size(), 0.0);
  for (std::size_t t = 0; t < member_probs.size(); ++t) axpy(clf_weights[t], member_probs[t], votes);
  return softmax(votes);
}

Vector ensemble_predict(const EncodedSentence& row, const Ensemble& ensemble) {
  std::vector<Vector> probs;
  probs.reserve(ensemble.size());
  for (const auto& m : ensemble.models) probs.push_back(predict_proba(row, m));
  return ensemble_vote(probs, ensemble.clf_weights);
}

Matrix ensemble_predict(const Batch& batch, const Ensemble& ensemble, std::size_t threads) {
  if (ensemble.size() == 0) throw std::invalid_argument("ensemble_predict: empty ensemble");
  const std::size_t classes = ensemble.models[0].config.num_classes;
  Matrix out(batch.size(), classes);
  parallel_for(batch.size(), threads, [&](std::size_t k) {
    const Vector y = ensemble_predict(batch.rows[k], ensemble);
    std::copy(y.begin(), y.end(), out.row(k).begin());
  });
  return out;
}

}  // namespace boostedseq
