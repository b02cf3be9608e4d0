#include <cmath>
#include <numeric>

#include "boostedseq/numerics.hpp"
#include "doctest.h"

using namespace boostedseq;

TEST_CASE("softmax of equal entries is uniform") {
  const auto p = softmax(Vector{0.0, 0.0, 0.0});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax matches exp-normalize by hand") {
  const auto p = softmax(Vector{std::log(2.0), 0.0});
  CHECK(std::abs(p[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(p[1] - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("softmax does not overflow on large inputs") {
  const auto p = softmax(Vector{1000.0, 0.0});
  CHECK(all_finite(p));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);
}

TEST_CASE("softmax rejects empty and non-finite input") {
  CHECK_THROWS_AS(softmax(Vector{}), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Vector{1.0, NAN}), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Vector{INFINITY, 0.0}), std::invalid_argument);
}

TEST_CASE("softmax properties on random vectors") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v(1 + rng.uniform_int(12));
    for (double& x : v) x = 20.0 * (rng.uniform() - 0.5);
    const auto p = softmax(v);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);

    // Shift invariance.
    const double c = 50.0 * (rng.uniform() - 0.5);
    Vector shifted = v;
    for (double& x : shifted) x += c;
    const auto ps = softmax(shifted);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(ps[i] - p[i]) < 1e-12);

    // Permutation equivariance.
    std::vector<std::size_t> perm(v.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Vector permuted(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) permuted[i] = v[perm[i]];
    const auto pp = softmax(permuted);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(pp[i] - p[perm[i]]) < 1e-15);
  }
}

TEST_CASE("sigmoid and tanh identities") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(tanh_act(0.0) == 0.0);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double x = 40.0 * (rng.uniform() - 0.5);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(std::isfinite(sigmoid(800.0)));
}

TEST_CASE("finite differences of x^2 at 3") {
  const ScalarFn f = [](const Vector& x) { return x[0] * x[0]; };
  const auto g = finite_diff_gradient(f, {3.0}, 1e-5);
  CHECK(std::abs(g[0] - 6.0) < 1e-6);
}

TEST_CASE("finite differences of a linear function return its coefficients") {
  const Vector a = {1.5, -2.0, 0.25, 7.0};
  const ScalarFn f = [&a](const Vector& x) { return dot(a, x); };
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Vector x(4);
    for (double& v : x) v = rng.normal();
    const auto g = finite_diff_gradient(f, x, 1e-4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(g[i] - a[i]) < 1e-9);
  }
}

TEST_CASE("finite differences are exact on quadratics up to rounding") {
  // f(x) = x^T Q x / 2 + b^T x with gradient Qx + b.
  const Matrix q = [] {
    Matrix m(3, 3);
    const double vals[] = {2, 1, 0, 1, 3, -1, 0, -1, 4};
    std::copy(std::begin(vals), std::end(vals), m.flat().begin());
    return m;
  }();
  const Vector b = {0.5, -1.0, 2.0};
  const ScalarFn f = [&](const Vector& x) { return 0.5 * dot(x, matvec(q, x)) + dot(b, x); };
  const Vector x = {0.3, -0.7, 1.1};
  const double h = 1e-3;
  const auto g = finite_diff_gradient(f, x, h);
  auto want = matvec(q, x);
  axpy(1.0, b, want);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(g[i] - want[i]) < 1e-16 * 50 / h);
}

TEST_CASE("finite differences match analytic backprop of a three-layer toy net") {
  // y = w3 . tanh(W2 tanh(W1 x)), loss = y^2 / 2, gradient with respect to all weights.
  Rng rng(6);
  const std::size_t n0 = 3, n1 = 4, n2 = 3;
  const Matrix w1 = gaussian_init(n1, n0, 0.7, rng);
  const Matrix w2 = gaussian_init(n2, n1, 0.7, rng);
  const Matrix w3 = gaussian_init(1, n2, 0.7, rng);
  const Vector x = {0.4, -1.2, 0.9};

  auto unpack = [&](const Vector& p, Matrix& a, Matrix& b, Matrix& c) {
    a = w1, b = w2, c = w3;
    std::size_t k = 0;
    for (auto* m : {&a, &b, &c})
      for (double& v : m->flat()) v = p[k++];
  };
  auto loss = [&](const Matrix& a, const Matrix& b, const Matrix& c) {
    Vector h1 = matvec(a, x);
    for (double& v : h1) v = std::tanh(v);
    Vector h2 = matvec(b, h1);
    for (double& v : h2) v = std::tanh(v);
    const double y = dot(c.row(0), h2);
    return 0.5 * y * y;
  };
  Vector p0;
  for (const auto* m : {&w1, &w2, &w3}) p0.insert(p0.end(), m->flat().begin(), m->flat().end());

  // Analytic backprop.
  Vector h1 = matvec(w1, x);
  for (double& v : h1) v = std::tanh(v);
  Vector h2 = matvec(w2, h1);
  for (double& v : h2) v = std::tanh(v);
  const double y = dot(w3.row(0), h2);
  Matrix g1(n1, n0), g2(n2, n1), g3(1, n2);
  outer_add(g3, Vector{y}, h2);
  Vector dz2(n2);
  for (std::size_t i = 0; i < n2; ++i) dz2[i] = y * w3(0, i) * (1 - h2[i] * h2[i]);
  outer_add(g2, dz2, h1);
  Vector dh1(n1, 0.0);
  matvec_transposed_add(w2, dz2, dh1);
  for (std::size_t i = 0; i < n1; ++i) dh1[i] *= 1 - h1[i] * h1[i];
  outer_add(g1, dh1, x);
  Vector analytic;
  for (const auto* m : {&g1, &g2, &g3}) analytic.insert(analytic.end(), m->flat().begin(), m->flat().end());

  const ScalarFn f = [&](const Vector& p) {
    Matrix a, b, c;
    unpack(p, a, b, c);
    return loss(a, b, c);
  };
  const auto numeric = finite_diff_gradient(f, p0, 1e-5);
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    CHECK(std::abs(analytic[i] - numeric[i]) / denom <= 1e-4);
  }
}

TEST_CASE("finite differences refuse non-finite evaluations") {
  const ScalarFn f = [](const Vector& x) { return x[0] > 0 ? std::log(-1.0) : 0.0; };
  CHECK_THROWS(finite_diff_gradient(f, {0.0}, 1e-3));
}

TEST_CASE("gaussian_init is deterministic and scaled") {
  Rng a(42), b(42);
  CHECK(gaussian_init(2, 2, 0.1, a) == gaussian_init(2, 2, 0.1, b));
  Rng c(1);
  const Matrix z = gaussian_init(3, 4, 0.0, c);
  for (double v : z.flat()) CHECK(v == 0.0);

  Rng d(7);
  const Matrix big = gaussian_init(1, 100000, 0.1, d);
  double mean = 0.0;
  for (double v : big.flat()) mean += v;
  mean /= 1e5;
  double var = 0.0;
  for (double v : big.flat()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (1e5 - 1));
  CHECK(std::abs(sd - 0.1) < 0.005);
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  const Rng root(9);
  Rng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  const auto x = s1.next_u64();
  CHECK(x == s1b.next_u64());
  CHECK(x != s2.next_u64());
  Rng u(10);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(u.uniform_int(7) < 7);
  }
}

TEST_CASE("matrix operations check shapes") {
  Matrix a(2, 3, 1.0), b(3, 2, 1.0);
  CHECK_THROWS_AS(a += b, ShapeError);
  CHECK_THROWS_AS(matvec(a, Vector{1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(a.at(2, 0), std::out_of_range);
  const auto y = matvec(a, Vector{1.0, 2.0, 3.0});
  CHECK(y == Vector{6.0, 6.0});
}
