#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boostedseq {

using Vector = std::vector<double>;

// Thrown on any dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix of doubles. Column vectors are (n x 1) matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  // Bounds-checked element access.
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_shape(const Matrix& a, const Matrix& b, const char* what);
void require_size(std::size_t got, std::size_t want, const char* what);

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y += A^T x
void matvec_transposed_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// A += scale * u v^T
void outer_add(Matrix& a, std::span<const double> u, std::span<const double> v,
               double scale = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);
double squared_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

double sigmoid(double x);
double tanh_act(double x);

// Numerically stable softmax (max-subtracted). Throws on empty or non-finite input.
Vector softmax(std::span<const double> v);

// Deterministic 64-bit generator (splitmix64 seeding + xoshiro256**). Draw sequences
// depend only on the seed, never on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Child generator for an independent consumer; depends only on (seed, stream).
  Rng split(std::uint64_t stream) const;

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Entries i.i.d. N(0, scale^2).
Matrix gaussian_init(std::size_t rows, std::size_t cols, double scale, Rng& rng);

using ScalarFn = std::function<double(const Vector&)>;

// Central-difference gradient estimate. Throws if any evaluation is non-finite.
Vector finite_diff_gradient(const ScalarFn& f, const Vector& x, double h);

}  // namespace boostedseq
