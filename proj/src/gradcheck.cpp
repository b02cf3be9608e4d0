#include "boostedseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "boostedseq/trainer.hpp"

namespace boostedseq {

ToyProblem make_toy_problem(const ToySpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig mc;
  mc.vocab_size = spec.vocab_size;
  mc.num_classes = spec.num_classes;
  mc.word_dim = spec.word_dim;
  mc.pos_dim = spec.pos_dim;
  mc.position_rows = static_cast<std::size_t>(2 * spec.max_dist + 1);
  mc.hidden = spec.hidden;
  mc.layers = spec.layers;
  mc.dropout = 0.0;

  ToyProblem p;
  p.model = init_model(mc, rng);
  // Larger-than-default weights so every nonlinearity leaves its linear regime.
  p.model.params.for_each([&](const std::string& name, Matrix& m, ParamKind) {
    for (double& v : m.flat()) v = spec.param_scale * rng.normal();
    if (name == "word") {
      for (double& v : m.row(Vocabulary::kPad)) v = 0.0;
    }
  });

  const EncodingConfig enc{spec.max_len, spec.max_dist};
  p.batch.max_len = spec.max_len;
  for (std::size_t k = 0; k < spec.sentences; ++k) {
    Sentence s;
    const std::size_t len = 1 + rng.uniform_int(spec.max_len);
    for (std::size_t t = 0; t < len; ++t) {
      // Indices >= 1 so real tokens are never PAD; index 1 (UNK) is allowed.
      s.tokens.push_back("t" + std::to_string(1 + rng.uniform_int(spec.vocab_size - 1)));
    }
    const std::size_t a = rng.uniform_int(len);
    const std::size_t b = rng.uniform_int(len);
    s.e1 = {a, a + 1};
    s.e2 = {b, b + 1};
    s.relation = static_cast<int>(rng.uniform_int(spec.num_classes));

    EncodedSentence e;
    e.words.assign(spec.max_len, Vocabulary::kPad);
    e.pos1.assign(spec.max_len, enc.pad_position());
    e.pos2.assign(spec.max_len, enc.pad_position());
    e.length = len;
    e.label = s.relation;
    const auto pf = position_features(s, spec.max_dist);
    for (std::size_t t = 0; t < len; ++t) {
      e.words[t] = std::stoi(s.tokens[t].substr(1));
      e.pos1[t] = pf.to_e1[t];
      e.pos2[t] = pf.to_e2[t];
    }
    p.batch.indices.push_back(k);
    p.batch.rows.push_back(std::move(e));
  }
  return p;
}

std::vector<GradCheckCase> standard_gradcheck_cases() {
  std::vector<GradCheckCase> cases;
  auto add = [&cases](std::size_t d, std::size_t l, std::size_t c, std::size_t v,
                      std::size_t layers, double scale, double l2) {
    GradCheckCase g;
    g.spec.hidden = d;
    g.spec.max_len = l;
    g.spec.num_classes = c;
    g.spec.vocab_size = v;
    g.spec.layers = layers;
    g.loss_scale = scale;
    g.l2_lambda = l2;
    g.label = "d=" + std::to_string(d) + " l=" + std::to_string(l) + " C=" + std::to_string(c) +
              " V=" + std::to_string(v) + " layers=" + std::to_string(layers);
    cases.push_back(g);
  };
  add(3, 6, 3, 12, 1, 1.0, 0.0);
  add(2, 4, 2, 8, 1, 1.0, 0.0);
  add(4, 6, 4, 16, 1, 1.0, 0.0);
  add(3, 5, 4, 10, 2, 1.0, 0.0);
  add(2, 6, 3, 16, 1, 0.37, 0.01);
  return cases;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrFloor});
  return std::abs(analytic - numeric) / denom;
}

double toy_objective(const ClassifierModel& model, const Batch& batch, double loss_scale,
                     double l2_lambda) {
  Rng unused(0);
  const auto fwd = classifier_forward(batch, model, false, unused);
  return loss_scale * cross_entropy(fwd.probs, batch.labels()) +
         l2_penalty(model.params, l2_lambda);
}

ModelParams toy_gradient(const ClassifierModel& model, const Batch& batch, double loss_scale,
                         double l2_lambda) {
  Rng unused(0);
  const auto fwd = classifier_forward(batch, model, false, unused);
  const auto labels = batch.labels();
  ModelParams g =
      classifier_backward(batch, fwd, cross_entropy_grad(fwd.probs, labels, loss_scale), model);
  add_l2_gradient(model.params, l2_lambda, g);
  return g;
}

GradCheckResult check_gradients(const ClassifierModel& model, const Batch& batch,
                                const GradCheckOptions& opts) {
  ModelParams analytic = toy_gradient(model, batch, opts.loss_scale, opts.l2_lambda);
  if (!opts.corrupt_block.empty()) {
    bool found = false;
    analytic.for_each([&](const std::string& name, Matrix& m, ParamKind) {
      if (name != opts.corrupt_block) return;
      found = true;
      for (double& v : m.flat()) v = v * 1.01 + 1e-3;
    });
    if (!found) throw std::invalid_argument("gradcheck: no parameter block '" + opts.corrupt_block + "'");
  }

  ClassifierModel probe = model;
  const Vector x0 = flatten(model.params);
  const ScalarFn objective = [&](const Vector& x) {
    unflatten(x, probe.params);
    return toy_objective(probe, batch, opts.loss_scale, opts.l2_lambda);
  };
  const Vector numeric = finite_diff_gradient(objective, x0, opts.step);
  const Vector flat_analytic = flatten(analytic);

  GradCheckResult r;
  std::size_t at = 0;
  analytic.for_each([&](const std::string& name, const Matrix& m, ParamKind) {
    BlockCheck b;
    b.name = name;
    b.entries = m.size();
    for (std::size_t i = 0; i < m.size(); ++i, ++at) {
      b.max_rel_err = std::max(b.max_rel_err, relative_error(flat_analytic[at], numeric[at]));
    }
    if (b.max_rel_err > r.max_rel_err || r.worst_block.empty()) {
      r.max_rel_err = std::max(r.max_rel_err, b.max_rel_err);
      r.worst_block = name;
    }
    r.blocks.push_back(std::move(b));
  });
  r.passed = r.max_rel_err <= opts.tolerance;
  return r;
}

}  // namespace boostedseq
