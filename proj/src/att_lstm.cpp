#include "boostedseq/att_lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace boostedseq {

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](const std::string&, Matrix& m, ParamKind) { m.fill(0.0); });
  return z;
}

std::size_t ModelParams::num_values() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Matrix& m, ParamKind) { n += m.size(); });
  return n;
}

Vector flatten(const ModelParams& params) {
  Vector out;
  out.reserve(params.num_values());
  params.for_each([&out](const std::string&, const Matrix& m, ParamKind) {
    out.insert(out.end(), m.flat().begin(), m.flat().end());
  });
  return out;
}

void unflatten(std::span<const double> values, ModelParams& params) {
  require_size(values.size(), params.num_values(), "unflatten");
  std::size_t at = 0;
  params.for_each([&](const std::string&, Matrix& m, ParamKind) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(at), m.size(), m.flat().begin());
    at += m.size();
  });
}

namespace {

LstmParams make_lstm(std::size_t in, std::size_t d, Rng& rng) {
  LstmParams p;
  p.weight = gaussian_init(4 * d, in + d, kGateInitScale, rng);
  p.bias = Matrix(4 * d, 1);
  for (std::size_t j = d; j < 2 * d; ++j) p.bias(j, 0) = kForgetBiasInit;
  return p;
}

}  // namespace

ClassifierModel init_model(const ModelConfig& config, Rng& rng) {
  if (config.hidden == 0 || config.layers == 0 || config.num_classes < 2) {
    throw std::invalid_argument("init_model: hidden, layers must be >= 1 and classes >= 2");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw std::invalid_argument("init_model: dropout must be in [0, 1)");
  }
  ClassifierModel m;
  m.config = config;
  auto& p = m.params;
  p.embeddings = make_embedding_tables(config.vocab_size, config.word_dim, config.position_rows,
                                       config.pos_dim, kWordInitScale, kPositionInitScale, rng);
  const std::size_t d = config.hidden;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.input_dim() : 2 * d;
    p.forward.push_back(make_lstm(in, d, rng));
    p.backward.push_back(make_lstm(in, d, rng));
  }
  p.attention.weight = gaussian_init(1, 2 * d, kGateInitScale, rng);
  p.attention.bias = Matrix(1, 1);
  p.output_weight = gaussian_init(config.num_classes, 2 * d, kOutputInitScale, rng);
  p.output_bias = Matrix(config.num_classes, 1);
  return m;
}

void set_word_table(ClassifierModel& model, Matrix word) {
  require_shape(model.params.embeddings.word, word, "set_word_table");
  model.params.embeddings.word = std::move(word);
}

LstmStepCache lstm_step(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmParams& params) {
  const std::size_t d = params.hidden();
  require_size(x.size(), params.input_dim(), "lstm_step x");
  require_size(h_prev.size(), d, "lstm_step h_prev");
  require_size(c_prev.size(), d, "lstm_step c_prev");

  LstmStepCache s;
  s.input_hidden.reserve(x.size() + d);
  s.input_hidden.insert(s.input_hidden.end(), x.begin(), x.end());
  s.input_hidden.insert(s.input_hidden.end(), h_prev.begin(), h_prev.end());
  Vector z = matvec(params.weight, s.input_hidden);
  auto b = params.bias.flat();

  s.in_gate.resize(d);
  s.forget_gate.resize(d);
  s.out_gate.resize(d);
  s.candidate.resize(d);
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.c.resize(d);
  s.tanh_c.resize(d);
  s.h.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    s.in_gate[j] = sigmoid(z[j] + b[j]);
    s.forget_gate[j] = sigmoid(z[d + j] + b[d + j]);
    s.out_gate[j] = sigmoid(z[2 * d + j] + b[2 * d + j]);
    s.candidate[j] = std::tanh(z[3 * d + j] + b[3 * d + j]);
    s.c[j] = s.forget_gate[j] * c_prev[j] + s.in_gate[j] * s.candidate[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.out_gate[j] * s.tanh_c[j];
  }
  if (!all_finite(s.c) || !all_finite(s.h)) {
    throw std::domain_error("lstm_step: non-finite activation");
  }
  return s;
}

LstmStepGrads lstm_step_backward(const LstmStepCache& s, std::span<const double> dh,
                                 std::span<const double> dc_in, const LstmParams& params,
                                 LstmParams& grads) {
  const std::size_t d = params.hidden();
  require_size(dh.size(), d, "lstm_step_backward dh");
  require_size(dc_in.size(), d, "lstm_step_backward dc");
  Vector dz(4 * d);
  LstmStepGrads out;
  out.dc_prev.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double i = s.in_gate[j], f = s.forget_gate[j], o = s.out_gate[j], g = s.candidate[j];
    const double tc = s.tanh_c[j];
    const double dc = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
    dz[j] = dc * g * i * (1.0 - i);
    dz[d + j] = dc * s.c_prev[j] * f * (1.0 - f);
    dz[2 * d + j] = dh[j] * tc * o * (1.0 - o);
    dz[3 * d + j] = dc * i * (1.0 - g * g);
    out.dc_prev[j] = dc * f;
  }
  outer_add(grads.weight, dz, s.input_hidden);
  axpy(1.0, dz, grads.bias.flat());
  Vector dxh(s.input_hidden.size(), 0.0);
  matvec_transposed_add(params.weight, dz, dxh);
  const std::size_t in = params.input_dim();
  out.dx.assign(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(in));
  out.dh_prev.assign(dxh.begin() + static_cast<std::ptrdiff_t>(in), dxh.end());
  return out;
}

namespace {

// One direction over xs; step caches are stored by time index.
std::vector<LstmStepCache> run_direction(const std::vector<Vector>& xs, const LstmParams& p,
                                         bool reverse) {
  const std::size_t n = xs.size();
  const std::size_t d = p.hidden();
  std::vector<LstmStepCache> steps(n);
  Vector h(d, 0.0), c(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    steps[t] = lstm_step(xs[t], h, c, p);
    h = steps[t].h;
    c = steps[t].c;
  }
  return steps;
}

// BPTT for one direction. d_h[t] is the external gradient on h_t.
std::vector<Vector> backprop_direction(const std::vector<LstmStepCache>& steps,
                                       const std::vector<Vector>& d_h, const LstmParams& p,
                                       LstmParams& g, bool reverse) {
  const std::size_t n = steps.size();
  const std::size_t d = p.hidden();
  std::vector<Vector> dx(n);
  Vector dh_next(d, 0.0), dc_next(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    // Walk opposite to the forward processing order.
    const std::size_t t = reverse ? k : n - 1 - k;
    Vector dh = d_h[t];
    axpy(1.0, dh_next, dh);
    auto r = lstm_step_backward(steps[t], dh, dc_next, p, g);
    dx[t] = std::move(r.dx);
    dh_next = std::move(r.dh_prev);
    dc_next = std::move(r.dc_prev);
  }
  return dx;
}

}  // namespace

std::vector<BiLstmLayerCache> bilstm_forward(const std::vector<Vector>& xs,
                                             const std::vector<LstmParams>& forward,
                                             const std::vector<LstmParams>& backward) {
  if (xs.empty()) throw std::invalid_argument("bilstm_forward: zero-length sequence");
  require_size(backward.size(), forward.size(), "bilstm_forward layer count");
  std::vector<BiLstmLayerCache> layers;
  const std::vector<Vector>* input = &xs;
  for (std::size_t l = 0; l < forward.size(); ++l) {
    BiLstmLayerCache cache;
    cache.forward = run_direction(*input, forward[l], false);
    cache.backward = run_direction(*input, backward[l], true);
    cache.outputs.resize(input->size());
    for (std::size_t t = 0; t < input->size(); ++t) {
      Vector& o = cache.outputs[t];
      o = cache.forward[t].h;
      o.insert(o.end(), cache.backward[t].h.begin(), cache.backward[t].h.end());
    }
    layers.push_back(std::move(cache));
    input = &layers.back().outputs;
  }
  return layers;
}

std::vector<Vector> bilstm_backward(const std::vector<BiLstmLayerCache>& caches,
                                    std::vector<Vector> d_outputs,
                                    const std::vector<LstmParams>& forward,
                                    const std::vector<LstmParams>& backward,
                                    std::vector<LstmParams>& grad_forward,
                                    std::vector<LstmParams>& grad_backward) {
  for (std::size_t l = caches.size(); l-- > 0;) {
    const std::size_t d = forward[l].hidden();
    const std::size_t n = d_outputs.size();
    std::vector<Vector> dh_f(n), dh_b(n);
    for (std::size_t t = 0; t < n; ++t) {
      require_size(d_outputs[t].size(), 2 * d, "bilstm_backward output gradient");
      dh_f[t].assign(d_outputs[t].begin(), d_outputs[t].begin() + static_cast<std::ptrdiff_t>(d));
      dh_b[t].assign(d_outputs[t].begin() + static_cast<std::ptrdiff_t>(d), d_outputs[t].end());
    }
    auto dx_f = backprop_direction(caches[l].forward, dh_f, forward[l], grad_forward[l], false);
    auto dx_b = backprop_direction(caches[l].backward, dh_b, backward[l], grad_backward[l], true);
    for (std::size_t t = 0; t < n; ++t) axpy(1.0, dx_b[t], dx_f[t]);
    d_outputs = std::move(dx_f);
  }
  return d_outputs;
}

AttentionResult attention_forward(const std::vector<Vector>& hs, const AttentionParams& params) {
  if (hs.empty()) throw std::invalid_argument("attention_forward: empty sequence");
  AttentionResult r;
  const double b = params.bias(0, 0);
  r.scores.reserve(hs.size());
  for (const auto& h : hs) r.scores.push_back(std::tanh(dot(params.weight.row(0), h) + b));
  r.attn_weight = softmax(r.scores);
  r.context.assign(hs[0].size(), 0.0);
  for (std::size_t t = 0; t < hs.size(); ++t) axpy(r.attn_weight[t], hs[t], r.context);
  return r;
}

std::vector<Vector> attention_backward(const std::vector<Vector>& hs,
                                       const AttentionResult& fwd,
                                       std::span<const double> d_context,
                                       const AttentionParams& params, AttentionParams& grads) {
  const std::size_t n = hs.size();
  Vector d_weight(n);
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    d_weight[t] = dot(d_context, hs[t]);
    mean += fwd.attn_weight[t] * d_weight[t];
  }
  std::vector<Vector> dh(n);
  auto w = params.weight.row(0);
  for (std::size_t t = 0; t < n; ++t) {
    const double a = fwd.attn_weight[t];
    const double de = a * (d_weight[t] - mean);
    const double e = fwd.scores[t];
    const double ds = de * (1.0 - e * e);
    dh[t].assign(d_context.begin(), d_context.end());
    for (double& v : dh[t]) v *= a;
    axpy(ds, w, dh[t]);
    axpy(ds, hs[t], grads.weight.row(0));
    grads.bias(0, 0) += ds;
  }
  return dh;
}

Vector dropout_mask(std::size_t n, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return {};
  Vector mask(n);
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

Vector apply_dropout(std::span<const double> v, const Vector& mask) {
  Vector out(v.begin(), v.end());
  if (mask.empty()) return out;
  require_size(mask.size(), v.size(), "apply_dropout");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

SentenceCache sentence_forward(const EncodedSentence& row, const ClassifierModel& model,
                               bool training, Rng& rng) {
  if (row.length == 0) throw std::invalid_argument("sentence_forward: zero-length sentence");
  const auto& p = model.params;
  const double drop = model.config.dropout;
  SentenceCache c;
  c.inputs = embed_sentence(row, p.embeddings);
  c.lstm = bilstm_forward(c.inputs, p.forward, p.backward);
  const auto& outputs = c.lstm.back().outputs;
  c.hk.reserve(outputs.size());
  c.hk_masks.reserve(outputs.size());
  for (const auto& h : outputs) {
    c.hk_masks.push_back(dropout_mask(h.size(), drop, training, rng));
    c.hk.push_back(apply_dropout(h, c.hk_masks.back()));
  }
  c.attention = attention_forward(c.hk, p.attention);
  c.context_mask = dropout_mask(c.attention.context.size(), drop, training, rng);
  c.context = apply_dropout(c.attention.context, c.context_mask);
  c.logits = matvec(p.output_weight, c.context);
  axpy(1.0, p.output_bias.flat(), c.logits);
  c.probs = softmax(c.logits);
  return c;
}

ForwardResult classifier_forward(const Batch& batch, const ClassifierModel& model, bool training,
                                 Rng& rng) {
  ForwardResult r;
  r.probs = Matrix(batch.size(), model.config.num_classes);
  r.caches.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    r.caches.push_back(sentence_forward(batch.rows[k], model, training, rng));
    const auto& q = r.caches.back().probs;
    if (!all_finite(q)) throw std::domain_error("classifier_forward: non-finite probabilities");
    std::copy(q.begin(), q.end(), r.probs.row(k).begin());
  }
  return r;
}

void sentence_backward(const EncodedSentence& row, const SentenceCache& c,
                       std::span<const double> d_probs, const ClassifierModel& model,
                       ModelParams& g) {
  const auto& p = model.params;
  const std::size_t classes = model.config.num_classes;
  require_size(d_probs.size(), classes, "sentence_backward d_probs");

  // Softmax Jacobian: dz_j = q_j (dq_j - sum_k q_k dq_k).
  const double inner = dot(c.probs, d_probs);
  Vector dz(classes);
  for (std::size_t j = 0; j < classes; ++j) dz[j] = c.probs[j] * (d_probs[j] - inner);

  outer_add(g.output_weight, dz, c.context);
  axpy(1.0, dz, g.output_bias.flat());
  Vector d_context(c.context.size(), 0.0);
  matvec_transposed_add(p.output_weight, dz, d_context);
  d_context = apply_dropout(d_context, c.context_mask);

  auto d_hk = attention_backward(c.hk, c.attention, d_context, p.attention, g.attention);
  for (std::size_t t = 0; t < d_hk.size(); ++t) d_hk[t] = apply_dropout(d_hk[t], c.hk_masks[t]);

  auto d_inputs = bilstm_backward(c.lstm, std::move(d_hk), p.forward, p.backward, g.forward,
                                  g.backward);
  accumulate_embedding_gradients(row, d_inputs, g.embeddings);
}

ModelParams classifier_backward(const Batch& batch, const ForwardResult& fwd,
                                const Matrix& d_probs, const ClassifierModel& model) {
  require_size(d_probs.rows(), batch.size(), "classifier_backward rows");
  require_size(d_probs.cols(), model.config.num_classes, "classifier_backward cols");
  require_size(fwd.caches.size(), batch.size(), "classifier_backward caches");
  ModelParams g = model.params.zeros_like();
  for (std::size_t k = 0; k < batch.size(); ++k) {
    sentence_backward(batch.rows[k], fwd.caches[k], d_probs.row(k), model, g);
  }
  return g;
}

Vector predict_proba(const EncodedSentence& row, const ClassifierModel& model) {
  Rng unused(0);
  return sentence_forward(row, model, false, unused).probs;
}

}  // namespace boostedseq
