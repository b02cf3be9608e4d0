#include "boostedseq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace boostedseq {

double& Matrix::at(std::size_t r, std::size_t c) {
  if (r >= rows_ || c >= cols_) {
    throw std::out_of_range("matrix index (" + std::to_string(r) + "," + std::to_string(c) +
                            ") outside " + shape_string());
  }
  return (*this)(r, c);
}

double Matrix::at(std::size_t r, std::size_t c) const {
  return const_cast<Matrix*>(this)->at(r, c);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_shape(*this, o, "matrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_shape(*this, o, "matrix -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void require_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) +
                     ", got " + std::to_string(got));
  }
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  require_size(x.size(), a.cols(), "matvec");
  Vector y(a.rows(), 0.0);
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

void matvec_transposed_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  require_size(x.size(), a.rows(), "matvec_transposed_add (x)");
  require_size(y.size(), a.cols(), "matvec_transposed_add (y)");
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = a.row(r).data();
    for (std::size_t c = 0; c < n; ++c) y[c] += row[c] * xr;
  }
}

void outer_add(Matrix& a, std::span<const double> u, std::span<const double> v, double scale) {
  require_size(u.size(), a.rows(), "outer_add (u)");
  require_size(v.size(), a.cols(), "outer_add (v)");
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double ur = u[r] * scale;
    if (ur == 0.0) continue;
    double* row = a.row(r).data();
    for (std::size_t c = 0; c < n; ++c) row[c] += ur * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
  require_size(y.size(), x.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double tanh_act(double x) { return std::tanh(x); }

Vector softmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  if (!all_finite(v)) throw std::invalid_argument("softmax: non-finite input");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

Rng Rng::split(std::uint64_t stream) const {
  std::uint64_t st = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return Rng(splitmix64(st));
}

Matrix gaussian_init(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  if (scale < 0.0) throw std::invalid_argument("gaussian_init: negative scale");
  Matrix m(rows, cols);
  if (scale == 0.0) return m;
  for (double& x : m.flat()) x = scale * rng.normal();
  return m;
}

Vector finite_diff_gradient(const ScalarFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
  Vector probe = x;
  Vector grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("finite_diff_gradient: non-finite evaluation at coordinate " +
                              std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace boostedseq
