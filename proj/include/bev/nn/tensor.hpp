#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#if defined(__SSE3__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "bev/errors.hpp"

namespace bev::nn {

/// Flushes subnormal floats to zero on the calling thread.
inline void flush_denormals() {
#if defined(__SSE3__)
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

/// NCHW extents. Dense (N, F) matrices use h = w = 1 with c = F.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t sample() const { return static_cast<std::size_t>(c) * plane(); }

  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Numeric storage aligned to the widest SIMD packet, so vectorised reductions
/// take the same path regardless of where the allocator places the buffer.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
using MatrixR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatrixR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatrixR<T>>;

/// Dense NCHW feature map.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape) {
    if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
    data_.assign(shape.size(), fill);
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T* sample(int n) { return data_.data() + n * shape_.sample(); }
  const T* sample(int n) const { return data_.data() + n * shape_.sample(); }
  T* plane(int n, int c) { return sample(n) + c * shape_.plane(); }
  const T* plane(int n, int c) const { return sample(n) + c * shape_.plane(); }

  T& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  T operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  void require_same_shape(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) throw ShapeError(std::string(what) + ": shape " + shape_.str() + " vs " + o.shape_.str());
  }

  /// Same values, reinterpreted with a compatible shape.
  Tensor reshaped(Shape s) const {
    if (s.size() != data_.size()) throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
    Tensor out;
    out.shape_ = s;
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  AlignedVector<T> data_;
};

/// Channel concatenation of two maps with equal N, H, W.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat: " + a.shape().str() + " with " + b.shape().str());
  }
  Tensor<T> out(Shape{a.n(), a.c() + b.c(), a.h(), a.w()});
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.shape().sample(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.shape().sample(), out.sample(n) + a.shape().sample());
  }
  return out;
}

/// Inverse of concat_channels for gradients: splits off the first `ca` channels.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int ca) {
  const Shape s = g.shape();
  if (ca <= 0 || ca >= s.c) throw ShapeError("split_channels: bad split point");
  Tensor<T> a(Shape{s.n, ca, s.h, s.w});
  Tensor<T> b(Shape{s.n, s.c - ca, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    std::copy(g.sample(n), g.sample(n) + a.shape().sample(), a.sample(n));
    std::copy(g.sample(n) + a.shape().sample(), g.sample(n) + s.sample(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

/// Portable pseudo-random source for weight initialisation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    // Box-Muller; u1 is kept away from zero.
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace bev::nn
