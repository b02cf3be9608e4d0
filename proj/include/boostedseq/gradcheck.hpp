#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boostedseq/att_lstm.hpp"
#include "boostedseq/corpus.hpp"

namespace boostedseq {

struct ToyProblem {
  ClassifierModel model;
  Batch batch;
};

struct ToySpec {
  std::size_t hidden = 3;
  std::size_t max_len = 6;
  std::size_t num_classes = 3;
  std::size_t vocab_size = 12;
  std::size_t sentences = 2;
  std::size_t word_dim = 4;
  std::size_t pos_dim = 2;
  int max_dist = 3;
  std::size_t layers = 1;
  double param_scale = 0.5;
};

// Random small model plus a batch of random sentences (true lengths in
// [1, max_len], padded to max_len). Dropout is off.
ToyProblem make_toy_problem(const ToySpec& spec, std::uint64_t seed);

struct BlockCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_err = 0.0;
};

struct GradCheckResult {
  std::vector<BlockCheck> blocks;
  double max_rel_err = 0.0;
  std::string worst_block;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double loss_scale = 1.0;  // multiplies the cross-entropy term
  double l2_lambda = 0.0;
  // Test hook: adds a perturbation to the analytic gradient of this block.
  std::string corrupt_block;
};

// |analytic - numeric| / max(|analytic|, |numeric|, kRelErrFloor).
inline constexpr double kRelErrFloor = 1e-6;
double relative_error(double analytic, double numeric);

// Objective: loss_scale * cross_entropy + l2_penalty.
double toy_objective(const ClassifierModel& model, const Batch& batch, double loss_scale,
                     double l2_lambda);
ModelParams toy_gradient(const ClassifierModel& model, const Batch& batch, double loss_scale,
                         double l2_lambda);

struct GradCheckCase {
  ToySpec spec;
  double loss_scale = 1.0;
  double l2_lambda = 0.0;
  std::string label;
};

// Five small configurations (d <= 4, l <= 6, C <= 4, V <= 16), including a
// stacked model and one with the L2 term and a non-unit loss scale.
std::vector<GradCheckCase> standard_gradcheck_cases();

GradCheckResult check_gradients(const ClassifierModel& model, const Batch& batch,
                                const GradCheckOptions& opts);

}  // namespace boostedseq
