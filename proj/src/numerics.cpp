#include "sabr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sabr/errors.hpp"

namespace sabr {

Matrix::Matrix(std::size_t rows, std::size_t cols, Real fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "matrix data of length " << data_.size() << " does not fit shape " << rows << "x"
        << cols;
    throw DimensionError(msg.str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const Real> v) {
  return Matrix(v.size(), 1, std::vector<Real>(v.begin(), v.end()));
}

Vec Matrix::col(std::size_t c) const {
  Vec out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const {
  std::ostringstream s;
  s << rows_ << "x" << cols_;
  return s.str();
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const std::string& a, const std::string& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << a << " and " << b;
  throw DimensionError(msg.str());
}

std::string vec_shape(std::size_t n) {
  std::ostringstream s;
  s << "vector[" << n << "]";
  return s.str();
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.shape_string(), b.shape_string());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Real aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Vec matvec(const Matrix& w, std::span<const Real> x) {
  if (w.cols() != x.size()) shape_mismatch("matvec", w.shape_string(), vec_shape(x.size()));
  Vec y(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) y[i] = dot(w.row(i), x);
  return y;
}

Vec matvec_transposed(const Matrix& w, std::span<const Real> x) {
  if (w.rows() != x.size()) {
    shape_mismatch("matvec_transposed", w.shape_string(), vec_shape(x.size()));
  }
  Vec y(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (x[i] == 0.0) continue;
    add_into(y, w.row(i), x[i]);
  }
  return y;
}

void add_outer(Matrix& w, std::span<const Real> a, std::span<const Real> b, Real scale) {
  if (w.rows() != a.size() || w.cols() != b.size()) {
    shape_mismatch("add_outer", w.shape_string(),
                   vec_shape(a.size()) + " (x) " + vec_shape(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real ai = scale * a[i];
    if (ai == 0.0) continue;
    add_into(w.row(i), b, ai);
  }
}

void add_into(std::span<Real> dst, std::span<const Real> src, Real scale) {
  if (dst.size() != src.size()) {
    shape_mismatch("add_into", vec_shape(dst.size()), vec_shape(src.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) shape_mismatch("dot", vec_shape(a.size()), vec_shape(b.size()));
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Real sigmoid(Real x) {
  // Branching keeps exp() from overflowing for large |x|.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

template <class F>
Vec map_vec(std::span<const Real> v, F f) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), f);
  return out;
}

template <class F>
Matrix map_matrix(const Matrix& m, F f) {
  Matrix out(m.rows(), m.cols());
  std::transform(m.data().begin(), m.data().end(), out.data().begin(), f);
  return out;
}

Real relu_scalar(Real x) { return x > 0.0 ? x : 0.0; }
Real tanh_scalar(Real x) { return std::tanh(x); }
Real sigmoid_scalar(Real x) { return sigmoid(x); }

}  // namespace

Matrix relu(const Matrix& m) { return map_matrix(m, relu_scalar); }
Matrix sigmoid(const Matrix& m) { return map_matrix(m, sigmoid_scalar); }
Matrix tanh(const Matrix& m) { return map_matrix(m, tanh_scalar); }
Vec relu(std::span<const Real> v) { return map_vec(v, relu_scalar); }
Vec sigmoid(std::span<const Real> v) { return map_vec(v, sigmoid_scalar); }
Vec tanh(std::span<const Real> v) { return map_vec(v, tanh_scalar); }

Vec softmax(std::span<const Real> v) {
  if (v.empty()) throw ArgumentError("softmax of an empty vector");
  const Real mx = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  Real denom = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    denom += out[i];
  }
  for (auto& x : out) x /= denom;
  return out;
}

Vec log_softmax(std::span<const Real> v) {
  if (v.empty()) throw ArgumentError("log_softmax of an empty vector");
  const Real mx = *std::max_element(v.begin(), v.end());
  Real denom = 0.0;
  for (Real x : v) denom += std::exp(x - mx);
  const Real log_z = mx + std::log(denom);
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - log_z;
  return out;
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Real Rng::uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index over an empty range");
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x = next_u64();
  while (x < threshold) x = next_u64();
  return x % n;
}

Matrix rng_uniform(Rng& rng, Real lo, Real hi, std::size_t rows, std::size_t cols) {
  if (!(lo < hi)) {
    std::ostringstream msg;
    msg << "rng_uniform requires lo < hi, got lo=" << lo << " hi=" << hi;
    throw ArgumentError(msg.str());
  }
  Matrix out(rows, cols);
  for (auto& x : out.data()) {
    x = lo + (hi - lo) * rng.uniform();
    // Rounding can land exactly on hi when the span is tiny.
    if (x >= hi) x = std::nextafter(hi, lo);
  }
  return out;
}

}  // namespace sabr
