#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "boostedseq/att_lstm.hpp"
#include "boostedseq/corpus.hpp"
#include "boostedseq/trainer.hpp"

namespace boostedseq {

inline constexpr double kErrorClamp = 1e-6;

// Uniform batch weights D_1 = 1/n.
std::vector<double> init_weights(std::size_t n);

// Sum_i D_i tau_i, clamped to [1e-6, 0.5 - 1e-6].
double weighted_error(std::span<const double> batch_errors, std::span<const double> weights);
double weighted_error_raw(std::span<const double> batch_errors, std::span<const double> weights);

// 0.5 ln((1 - eps) / eps), plus ln(C - 1) when the SAMME correction is enabled.
double classifier_weight(double error, std::size_t num_classes = 2, bool samme = false);

// D_{t+1,i} = D_{t,i} exp(-clf_weight * (1 - 2 tau_i)) / Z_t.
std::vector<double> update_weights(std::span<const double> weights, double clf_weight,
                                   std::span<const double> batch_errors);

struct BoostConfig {
  std::size_t rounds = 20;
  std::uint64_t seed = 1;
  bool samme = false;
};

struct Ensemble {
  std::vector<ClassifierModel> models;
  std::vector<double> clf_weights;

  std::size_t size() const { return models.size(); }
};

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  double error = 0.0;     // clamped epsilon_t
  double clf_weight = 0.0;
  std::size_t selected_epoch = 0;  // 1-based epoch whose snapshot was kept
  std::vector<double> batch_weights;  // D_t used while training this round
};

struct EpochLog {
  std::size_t round = 0;
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double weighted_error = 0.0;
  double lr = 0.0;
};

struct BoostResult {
  Ensemble ensemble;
  std::vector<RoundRecord> history;
  std::vector<double> final_weights;  // D_{T+1}
  std::uint64_t partition_fingerprint = 0;
};

// Seed streams split from the root seed.
namespace streams {
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kInitBase = 1000;
inline constexpr std::uint64_t kDropoutBase = 2000;
inline constexpr std::uint64_t kEvalSampling = 3;
inline constexpr std::uint64_t kSynth = 4;
inline constexpr std::uint64_t kWordVectors = 5;
}  // namespace streams

using EpochCallback = std::function<void(const EpochLog&)>;

// Full boosting loop. `word_table`, when given, replaces the random word
// embeddings of every round's fresh classifier.
BoostResult run_boosting(const Dataset& train, const Vocabulary& vocab, const TrainConfig& cfg,
                         const BoostConfig& boost, const std::optional<Matrix>& word_table = {},
                         const EpochCallback& on_epoch = {});

// Y(x) = softmax(sum_t clf_weight_t q_t(x)).
Vector ensemble_vote(std::span<const Vector> member_probs, std::span<const double> clf_weights);
Vector ensemble_predict(const EncodedSentence& row, const Ensemble& ensemble);
Matrix ensemble_predict(const Batch& batch, const Ensemble& ensemble, std::size_t threads = 1);

}  // namespace boostedseq
