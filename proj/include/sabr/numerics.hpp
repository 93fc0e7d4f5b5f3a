#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sabr {

using Real = double;
using Vec = std::vector<Real>;

// Dense row-major matrix. Vectors that need a shape (biases, scoring vectors)
// are stored as n x 1 matrices when they live inside parameter blocks.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const Real> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }

  Vec col(std::size_t c) const;
  void fill(Real value);

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// y = W x
Vec matvec(const Matrix& w, std::span<const Real> x);
// y = W^T x
Vec matvec_transposed(const Matrix& w, std::span<const Real> x);
// W += scale * a b^T
void add_outer(Matrix& w, std::span<const Real> a, std::span<const Real> b, Real scale = 1.0);

void add_into(std::span<Real> dst, std::span<const Real> src, Real scale = 1.0);
Real dot(std::span<const Real> a, std::span<const Real> b);

Real sigmoid(Real x);
Matrix relu(const Matrix& m);
Matrix sigmoid(const Matrix& m);
Matrix tanh(const Matrix& m);
Vec relu(std::span<const Real> v);
Vec sigmoid(std::span<const Real> v);
Vec tanh(std::span<const Real> v);

// Max-shifted softmax. Throws ArgumentError on empty input.
Vec softmax(std::span<const Real> v);
Vec log_softmax(std::span<const Real> v);

// SplitMix64 generator. The full update rule is documented in README.md so
// streams can be reproduced bit-exactly elsewhere:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // (next_u64() >> 11) * 2^-53, in [0, 1).
  Real uniform();
  // Uniform integer in [0, n): redraw while x < (2^64 - n) mod n, then x mod n.
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

Matrix rng_uniform(Rng& rng, Real lo, Real hi, std::size_t rows, std::size_t cols);

// Fisher-Yates, drawing j = uniform_index(i + 1) for i = n-1 down to 1.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sabr
