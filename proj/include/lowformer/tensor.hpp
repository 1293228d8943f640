#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lowformer {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense NCHW tensor, contiguous row-major.
template <typename T>
class TensorT {
 public:
  using value_type = T;

  TensorT() = default;
  explicit TensorT(Shape s, T fill = T(0)) : shape_(s), data_(s.numel(), fill) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw ShapeError("negative extent in " + s.str());
  }
  TensorT(int n, int c, int h, int w, T fill = T(0)) : TensorT(Shape{n, c, h, w}, fill) {}
  TensorT(Shape s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
    if (data_.size() != s.numel()) throw ShapeError("element count does not match " + s.str());
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int ni, int ci, int hi, int wi) const {
    return ((static_cast<std::size_t>(ni) * shape_.c + ci) * shape_.h + hi) * shape_.w + wi;
  }
  T& at(int ni, int ci, int hi, int wi) { return data_[index(ni, ci, hi, wi)]; }
  const T& at(int ni, int ci, int hi, int wi) const { return data_[index(ni, ci, hi, wi)]; }

  // Pointer to the start of plane (ni, ci).
  T* plane(int ni, int ci) { return data_.data() + index(ni, ci, 0, 0); }
  const T* plane(int ni, int ci) const { return data_.data() + index(ni, ci, 0, 0); }

  bool all_finite() const;

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Row-major 2-D value used by linear / softmax / attention.
template <typename T>
struct MatrixT {
  int rows = 0, cols = 0;
  std::vector<T> data;

  MatrixT() = default;
  MatrixT(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  MatrixT(int r, int c, std::vector<T> v) : rows(r), cols(c), data(std::move(v)) {
    if (data.size() != static_cast<std::size_t>(r) * c) throw ShapeError("matrix element count mismatch");
  }

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

using Matrix = MatrixT<float>;
using MatrixD = MatrixT<double>;

// Fills with N(0, stddev) from a seeded engine; deterministic for a given seed.
template <typename T>
void fill_normal(std::vector<T>& v, std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

template <typename T>
void fill_uniform(std::vector<T>& v, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

template <typename T>
TensorT<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  TensorT<T> t(s);
  fill_uniform(t.values(), seed, lo, hi);
  return t;
}

template <typename T>
MatrixT<T> random_matrix(int r, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  MatrixT<T> m(r, c);
  fill_uniform(m.data, seed, lo, hi);
  return m;
}

// Throws std::domain_error if any element is NaN/Inf.
template <typename T>
void require_finite(const TensorT<T>& t, const char* where);

}  // namespace lowformer
