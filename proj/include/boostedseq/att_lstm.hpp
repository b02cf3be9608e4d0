#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boostedseq/corpus.hpp"
#include "boostedseq/embeddings.hpp"
#include "boostedseq/numerics.hpp"

namespace boostedseq {

struct ModelConfig {
  std::size_t vocab_size = 2;
  std::size_t num_classes = 2;
  std::size_t word_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t position_rows = 71;
  std::size_t hidden = 350;  // per direction
  std::size_t layers = 1;    // stacked layers per direction
  double dropout = 0.5;

  std::size_t input_dim() const { return word_dim + 2 * pos_dim; }
  bool operator==(const ModelConfig&) const = default;
};

// Gate projection over [x; h_prev], rows stacked as input, forget, output, candidate.
struct LstmParams {
  Matrix weight;  // 4d x (in + d)
  Matrix bias;    // 4d x 1

  std::size_t hidden() const { return weight.rows() / 4; }
  std::size_t input_dim() const { return weight.cols() - hidden(); }
  bool operator==(const LstmParams&) const = default;
};

// Scoring function e_t = tanh(w . h_t + b).
struct AttentionParams {
  Matrix weight;  // 1 x 2d
  Matrix bias;    // 1 x 1
  bool operator==(const AttentionParams&) const = default;
};

enum class ParamKind { Weight, Bias, Embedding };

// Every trainable tensor of the classifier. Gradients use the same type.
struct ModelParams {
  EmbeddingTables embeddings;
  std::vector<LstmParams> forward;   // one per layer
  std::vector<LstmParams> backward;  // one per layer
  AttentionParams attention;
  Matrix output_weight;  // C x 2d
  Matrix output_bias;    // C x 1

  // Visits (name, tensor, kind) in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f("word", embeddings.word, ParamKind::Embedding);
    f("pos1", embeddings.pos1, ParamKind::Embedding);
    f("pos2", embeddings.pos2, ParamKind::Embedding);
    for (std::size_t l = 0; l < forward.size(); ++l) {
      const std::string s = std::to_string(l);
      f("lstm_fwd" + s + ".weight", forward[l].weight, ParamKind::Weight);
      f("lstm_fwd" + s + ".bias", forward[l].bias, ParamKind::Bias);
      f("lstm_bwd" + s + ".weight", backward[l].weight, ParamKind::Weight);
      f("lstm_bwd" + s + ".bias", backward[l].bias, ParamKind::Bias);
    }
    f("attn.weight", attention.weight, ParamKind::Weight);
    f("attn.bias", attention.bias, ParamKind::Bias);
    f("out.weight", output_weight, ParamKind::Weight);
    f("out.bias", output_bias, ParamKind::Bias);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&f](const std::string& name, Matrix& m, ParamKind k) { f(name, std::as_const(m), k); });
  }

  ModelParams zeros_like() const;
  std::size_t num_values() const;
  bool operator==(const ModelParams&) const = default;
};

// Concatenation of every tensor in for_each order, and its inverse.
Vector flatten(const ModelParams& params);
void unflatten(std::span<const double> values, ModelParams& params);

struct ClassifierModel {
  ModelConfig config;
  ModelParams params;

  bool operator==(const ClassifierModel&) const = default;
};

inline constexpr double kGateInitScale = 0.1;
inline constexpr double kOutputInitScale = 0.1;
inline constexpr double kForgetBiasInit = 1.0;
inline constexpr double kWordInitScale = 0.1;
inline constexpr double kPositionInitScale = 0.1;

ClassifierModel init_model(const ModelConfig& config, Rng& rng);
// Replaces the word table (e.g. with loaded vectors); shapes must agree.
void set_word_table(ClassifierModel& model, Matrix word);

struct LstmStepCache {
  Vector input_hidden;  // [x_t; h_prev]
  Vector in_gate, forget_gate, out_gate, candidate;
  Vector c_prev, c, tanh_c, h;
};

LstmStepCache lstm_step(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmParams& params);

struct LstmStepGrads {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

// dh and dc are the total gradients flowing into h_t and c_t.
LstmStepGrads lstm_step_backward(const LstmStepCache& cache, std::span<const double> dh,
                                 std::span<const double> dc, const LstmParams& params,
                                 LstmParams& grads);

struct BiLstmLayerCache {
  std::vector<LstmStepCache> forward;   // indexed by time
  std::vector<LstmStepCache> backward;  // indexed by time
  std::vector<Vector> outputs;          // [fwd_t; bwd_t], 2d each
};

// Runs every layer over the sequence; the last layer's outputs are h_k.
std::vector<BiLstmLayerCache> bilstm_forward(const std::vector<Vector>& xs,
                                             const std::vector<LstmParams>& forward,
                                             const std::vector<LstmParams>& backward);

// Returns gradients with respect to the first layer's inputs.
std::vector<Vector> bilstm_backward(const std::vector<BiLstmLayerCache>& caches,
                                    std::vector<Vector> d_outputs,
                                    const std::vector<LstmParams>& forward,
                                    const std::vector<LstmParams>& backward,
                                    std::vector<LstmParams>& grad_forward,
                                    std::vector<LstmParams>& grad_backward);

struct AttentionResult {
  Vector scores;       // e_t
  Vector attn_weight;  // softmax over e
  Vector context;      // sum_t attn_weight_t h_t
};

AttentionResult attention_forward(const std::vector<Vector>& hs, const AttentionParams& params);

// Returns dL/dh_t given dL/dcontext.
std::vector<Vector> attention_backward(const std::vector<Vector>& hs,
                                       const AttentionResult& fwd,
                                       std::span<const double> d_context,
                                       const AttentionParams& params, AttentionParams& grads);

// Inverted dropout. Returns the multiplicative mask (0 or 1/(1-p)); empty in
// inference mode or when p == 0, meaning identity.
Vector dropout_mask(std::size_t n, double p, bool training, Rng& rng);
Vector apply_dropout(std::span<const double> v, const Vector& mask);

struct SentenceCache {
  std::vector<Vector> inputs;
  std::vector<BiLstmLayerCache> lstm;
  std::vector<Vector> hk_masks;  // dropout masks on the LSTM outputs
  std::vector<Vector> hk;        // after dropout
  AttentionResult attention;
  Vector context_mask;
  Vector context;  // after dropout
  Vector logits;
  Vector probs;
};

SentenceCache sentence_forward(const EncodedSentence& row, const ClassifierModel& model,
                               bool training, Rng& rng);

struct ForwardResult {
  Matrix probs;  // K x C
  std::vector<SentenceCache> caches;
};

ForwardResult classifier_forward(const Batch& batch, const ClassifierModel& model, bool training,
                                 Rng& rng);

// Accumulates into `grads` the gradient of sum_k <d_probs_k, q_k> through the network.
void sentence_backward(const EncodedSentence& row, const SentenceCache& cache,
                       std::span<const double> d_probs, const ClassifierModel& model,
                       ModelParams& grads);

ModelParams classifier_backward(const Batch& batch, const ForwardResult& fwd,
                                const Matrix& d_probs, const ClassifierModel& model);

// Inference-mode class probabilities for one sentence.
Vector predict_proba(const EncodedSentence& row, const ClassifierModel& model);

}  // namespace boostedseq
