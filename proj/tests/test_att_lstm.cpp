#include <cmath>
#include <numeric>

#include "boostedseq/att_lstm.hpp"
#include "boostedseq/gradcheck.hpp"
#include "doctest.h"

using namespace boostedseq;

namespace {

LstmParams random_lstm(std::size_t in, std::size_t d, double scale, Rng& rng) {
  return {gaussian_init(4 * d, in + d, scale, rng), gaussian_init(4 * d, 1, scale, rng)};
}

Vector random_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

ClassifierModel small_model(std::uint64_t seed, double dropout = 0.0) {
  ModelConfig mc;
  mc.vocab_size = 30;
  mc.num_classes = 4;
  mc.word_dim = 6;
  mc.pos_dim = 2;
  mc.position_rows = 71;
  mc.hidden = 5;
  mc.dropout = dropout;
  Rng rng(seed);
  return init_model(mc, rng);
}

EncodedSentence random_row(std::size_t len, std::size_t padded, std::size_t vocab, Rng& rng) {
  EncodedSentence r;
  r.words.assign(padded, Vocabulary::kPad);
  r.pos1.assign(padded, 70);
  r.pos2.assign(padded, 70);
  for (std::size_t t = 0; t < len; ++t) {
    r.words[t] = 1 + static_cast<int>(rng.uniform_int(vocab - 1));
    r.pos1[t] = static_cast<int>(rng.uniform_int(71));
    r.pos2[t] = static_cast<int>(rng.uniform_int(71));
  }
  r.length = len;
  r.label = static_cast<int>(rng.uniform_int(4));
  return r;
}

}  // namespace

TEST_CASE("lstm step with zero parameters and zero state outputs zero") {
  const LstmParams p{Matrix(8, 5), Matrix(8, 1)};
  const auto c = lstm_step(Vector{1, -2, 3}, Vector{0, 0}, Vector{0, 0}, p);
  CHECK(c.h == Vector{0, 0});
  CHECK(c.c == Vector{0, 0});
  CHECK(c.in_gate == Vector{0.5, 0.5});
}

TEST_CASE("saturated forget gate carries the previous cell through") {
  Rng rng(1);
  LstmParams p = random_lstm(3, 2, 0.5, rng);
  for (std::size_t k = 2; k < 4; ++k) p.bias(k, 0) = 1e3;  // forget rows
  const Vector c_prev = {0.7, -1.3};
  const auto c = lstm_step(Vector{0.2, 0.1, -0.4}, Vector{0.3, 0.5}, c_prev, p);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(c.forget_gate[j] == 1.0);
    CHECK(c.c[j] == doctest::Approx(c_prev[j] + c.in_gate[j] * c.candidate[j]).epsilon(1e-15));
  }
}

TEST_CASE("lstm step backward matches finite differences") {
  Rng rng(2);
  const std::size_t d = 2, in = 3;
  const LstmParams p = random_lstm(in, d, 0.8, rng);
  const Vector x = random_vector(in, rng), h0 = random_vector(d, rng), c0 = random_vector(d, rng);
  const Vector a = random_vector(d, rng), b = random_vector(d, rng);
  // Scalar probe L = a.h + b.c.
  auto loss = [&](const LstmParams& q, const Vector& xv, const Vector& hv, const Vector& cv) {
    const auto s = lstm_step(xv, hv, cv, q);
    return dot(a, s.h) + dot(b, s.c);
  };
  LstmParams g{Matrix(4 * d, in + d), Matrix(4 * d, 1)};
  const auto grads = lstm_step_backward(lstm_step(x, h0, c0, p), a, b, p, g);

  Vector flat(p.weight.flat().begin(), p.weight.flat().end());
  flat.insert(flat.end(), p.bias.flat().begin(), p.bias.flat().end());
  flat.insert(flat.end(), x.begin(), x.end());
  flat.insert(flat.end(), h0.begin(), h0.end());
  flat.insert(flat.end(), c0.begin(), c0.end());
  const ScalarFn f = [&](const Vector& v) {
    LstmParams q = p;
    std::size_t k = 0;
    for (double& w : q.weight.flat()) w = v[k++];
    for (double& w : q.bias.flat()) w = v[k++];
    Vector xv(v.begin() + k, v.begin() + k + in);
    k += in;
    Vector hv(v.begin() + k, v.begin() + k + d);
    k += d;
    Vector cv(v.begin() + k, v.begin() + k + d);
    return loss(q, xv, hv, cv);
  };
  const auto numeric = finite_diff_gradient(f, flat, 1e-5);
  Vector analytic(g.weight.flat().begin(), g.weight.flat().end());
  analytic.insert(analytic.end(), g.bias.flat().begin(), g.bias.flat().end());
  analytic.insert(analytic.end(), grads.dx.begin(), grads.dx.end());
  analytic.insert(analytic.end(), grads.dh_prev.begin(), grads.dh_prev.end());
  analytic.insert(analytic.end(), grads.dc_prev.begin(), grads.dc_prev.end());
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CHECK(relative_error(analytic[i], numeric[i]) <= 1e-4);
  }
}

TEST_CASE("length-1 sentence: both directions see the same token") {
  Rng rng(3);
  const auto p = random_lstm(4, 3, 0.5, rng);
  const auto caches = bilstm_forward({random_vector(4, rng)}, {p}, {p});
  const auto& out = caches.back().outputs;
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].size() == 6);
  for (std::size_t j = 0; j < 3; ++j) CHECK(out[0][j] == out[0][3 + j]);
}

TEST_CASE("palindromic input with shared parameters mirrors the two directions") {
  Rng rng(4);
  const auto p = random_lstm(3, 2, 0.6, rng);
  const Vector a = random_vector(3, rng), b = random_vector(3, rng), c = random_vector(3, rng);
  const std::vector<Vector> xs = {a, b, c, b, a};
  const auto caches = bilstm_forward(xs, {p}, {p});
  const auto& out = caches.back().outputs;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(out[t][j] == out[xs.size() - 1 - t][2 + j]);
  }
}

TEST_CASE("stacked layers feed the concatenated outputs upward") {
  Rng rng(5);
  const std::vector<LstmParams> fwd = {random_lstm(3, 2, 0.5, rng), random_lstm(4, 2, 0.5, rng)};
  const std::vector<LstmParams> bwd = {random_lstm(3, 2, 0.5, rng), random_lstm(4, 2, 0.5, rng)};
  const auto caches = bilstm_forward({random_vector(3, rng), random_vector(3, rng)}, fwd, bwd);
  REQUIRE(caches.size() == 2);
  CHECK(caches[1].forward[0].input_hidden.size() == 4 + 2);
  CHECK(caches[1].outputs[0].size() == 4);
}

TEST_CASE("padding from length 5 to 70 leaves the LSTM outputs unchanged") {
  const auto model = small_model(6);
  Rng rng(6);
  const auto short_row = random_row(5, 5, 30, rng);
  EncodedSentence long_row = short_row;
  long_row.words.resize(70, Vocabulary::kPad);
  long_row.pos1.resize(70, 70);
  long_row.pos2.resize(70, 70);
  Rng r1(0), r2(0);
  const auto a = sentence_forward(short_row, model, false, r1);
  const auto b = sentence_forward(long_row, model, false, r2);
  REQUIRE(a.hk.size() == 5);
  REQUIRE(b.hk.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) CHECK(a.hk[t] == b.hk[t]);
  CHECK(a.probs == b.probs);
}

TEST_CASE("attention with zero parameters averages the inputs") {
  const std::vector<Vector> hs = {{1, 2}, {3, -4}, {5, 0}};
  const AttentionParams p{Matrix(1, 2), Matrix(1, 1)};
  const auto r = attention_forward(hs, p);
  for (double w : r.attn_weight) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.context[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.context[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("attention saturates toward the highest-scoring step") {
  // Scores pass through tanh, so the largest possible gap is e^1 versus e^-1.
  const std::vector<Vector> hs = {{1, 0}, {0, 1}, {0, 1}};
  AttentionParams p{Matrix(1, 2), Matrix(1, 1)};
  p.weight(0, 0) = 50.0;
  p.weight(0, 1) = -50.0;
  const auto r = attention_forward(hs, p);
  const double e2 = std::exp(2.0);
  CHECK(r.attn_weight[0] == doctest::Approx(e2 / (e2 + 2.0)).epsilon(1e-12));
  CHECK(r.attn_weight[0] > r.attn_weight[1]);
  CHECK(r.context[0] > r.context[1]);
}

TEST_CASE("attention on a 3-step toy matches hand evaluation") {
  const std::vector<Vector> hs = {{1, 0}, {0, 1}, {1, 1}};
  AttentionParams p{Matrix(1, 2), Matrix(1, 1)};
  p.weight(0, 0) = 0.5;
  p.weight(0, 1) = -0.5;
  p.bias(0, 0) = 0.1;
  const double e[3] = {std::tanh(0.6), std::tanh(-0.4), std::tanh(0.1)};
  const double z = std::exp(e[0]) + std::exp(e[1]) + std::exp(e[2]);
  const double w[3] = {std::exp(e[0]) / z, std::exp(e[1]) / z, std::exp(e[2]) / z};
  const auto r = attention_forward(hs, p);
  for (int t = 0; t < 3; ++t) {
    CHECK(r.scores[t] == doctest::Approx(e[t]).epsilon(1e-15));
    CHECK(r.attn_weight[t] == doctest::Approx(w[t]).epsilon(1e-14));
  }
  CHECK(r.context[0] == doctest::Approx(w[0] + w[2]).epsilon(1e-14));
  CHECK(r.context[1] == doctest::Approx(w[1] + w[2]).epsilon(1e-14));
}

TEST_CASE("dropout modes") {
  Rng rng(7);
  const Vector v = {1, 2, 3};
  CHECK(apply_dropout(v, dropout_mask(3, 0.0, true, rng)) == v);
  CHECK(apply_dropout(v, dropout_mask(3, 0.7, false, rng)) == v);
  CHECK(dropout_mask(3, 0.5, false, rng).empty());
  CHECK_THROWS(dropout_mask(3, 1.0, true, rng));

  const std::size_t n = 100000;
  const Vector ones(n, 1.0);
  const auto out = apply_dropout(ones, dropout_mask(n, 0.5, true, rng));
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
  CHECK(std::abs(mean - 1.0) < 0.02);
  for (double x : out) CHECK((x == 0.0 || x == 2.0));
}

TEST_CASE("classifier forward contracts") {
  const auto model = small_model(8, 0.5);
  Rng rng(8);
  Batch batch;
  batch.max_len = 12;
  for (int k = 0; k < 4; ++k) batch.rows.push_back(random_row(3 + k * 2, 12, 30, rng));

  Rng r0(0);
  const auto inf1 = classifier_forward(batch, model, false, r0);
  const auto inf2 = classifier_forward(batch, model, false, r0);
  CHECK(inf1.probs == inf2.probs);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    double s = 0.0;
    for (double v : inf1.probs.row(k)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
    const auto& aw = inf1.caches[k].attention.attn_weight;
    CHECK(aw.size() == batch.rows[k].length);
    CHECK(std::abs(std::accumulate(aw.begin(), aw.end(), 0.0) - 1.0) < 1e-9);
  }

  Rng a(99), b(99);
  const auto t1 = classifier_forward(batch, model, true, a);
  const auto t2 = classifier_forward(batch, model, true, b);
  CHECK(t1.probs == t2.probs);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    CHECK(t1.caches[k].context_mask == t2.caches[k].context_mask);
    CHECK(t1.caches[k].hk_masks == t2.caches[k].hk_masks);
    CHECK_FALSE(t1.caches[k].context_mask.empty());
  }
}

TEST_CASE("classifier backward is linear in the upstream gradient") {
  const auto toy = make_toy_problem({}, 9);
  Rng r(0);
  const auto fwd = classifier_forward(toy.batch, toy.model, false, r);
  const Matrix zero(fwd.probs.rows(), fwd.probs.cols());
  const auto gz = classifier_backward(toy.batch, fwd, zero, toy.model);
  for (double v : flatten(gz)) CHECK(v == 0.0);

  Rng urng(10);
  Matrix up = gaussian_init(fwd.probs.rows(), fwd.probs.cols(), 1.0, urng);
  Matrix up2 = up;
  up2 *= 2.0;
  const auto g1 = flatten(classifier_backward(toy.batch, fwd, up, toy.model));
  const auto g2 = flatten(classifier_backward(toy.batch, fwd, up2, toy.model));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-13));
}

TEST_CASE("whole-model gradient check on the 2-sentence d=3 C=3 V=12 toy") {
  const auto toy = make_toy_problem({}, 10);
  const auto r = check_gradients(toy.model, toy.batch, {});
  CHECK(r.passed);
  CHECK(r.max_rel_err <= 1e-4);
}

TEST_CASE("gradient check holds across random small models") {
  Rng rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    ToySpec s;
    s.hidden = 1 + rng.uniform_int(4);
    s.max_len = 1 + rng.uniform_int(6);
    s.num_classes = 2 + rng.uniform_int(3);
    s.vocab_size = 4 + rng.uniform_int(13);
    s.sentences = 1 + rng.uniform_int(3);
    s.layers = 1 + rng.uniform_int(2);
    const auto toy = make_toy_problem(s, 100 + trial);
    const auto r = check_gradients(toy.model, toy.batch, {});
    INFO("trial ", trial, " worst block ", r.worst_block, " err ", r.max_rel_err);
    CHECK(r.passed);
  }
}

TEST_CASE("a corrupted gradient block is reported") {
  const auto toy = make_toy_problem({}, 12);
  GradCheckOptions opts;
  opts.corrupt_block = "out.weight";
  const auto r = check_gradients(toy.model, toy.batch, opts);
  CHECK_FALSE(r.passed);
  CHECK(r.worst_block == "out.weight");
  opts.corrupt_block = "no.such.block";
  CHECK_THROWS(check_gradients(toy.model, toy.batch, opts));
}

TEST_CASE("mutating a cloned model leaves the original bit-identical") {
  const auto original = small_model(13);
  const auto snapshot = flatten(original.params);
  ClassifierModel clone = original;
  clone.params.for_each([](const std::string&, Matrix& m, ParamKind) { m *= 3.0; });
  clone.params.output_bias(0, 0) += 1.0;
  CHECK(flatten(original.params) == snapshot);
  CHECK_FALSE(clone == original);
}

TEST_CASE("initialization conventions") {
  const auto m = small_model(14);
  const std::size_t d = m.config.hidden;
  for (std::size_t k = 0; k < 4 * d; ++k) {
    const double want = (k >= d && k < 2 * d) ? kForgetBiasInit : 0.0;
    CHECK(m.params.forward[0].bias(k, 0) == want);
    CHECK(m.params.backward[0].bias(k, 0) == want);
  }
  for (double v : m.params.embeddings.word.row(Vocabulary::kPad)) CHECK(v == 0.0);
  CHECK(m.params.attention.weight.cols() == 2 * d);
  CHECK(m.params.output_weight.rows() == 4);
  ModelParams copy = m.params.zeros_like();
  unflatten(flatten(m.params), copy);
  CHECK(copy == m.params);
  CHECK(flatten(m.params).size() == m.params.num_values());
}
