#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bev/nn/tensor.hpp"

namespace bev::nn {

/// Named view of a learnable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& p : params) p.grad->zero();
}

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

/// 2-D convolution, square kernel, zero padding. Weights are (out, in, k, k).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = 0)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding),
        weight_(Shape{out_channels, in_channels, kernel, kernel}),
        bias_(Shape{1, out_channels, 1, 1}),
        dweight_(weight_.shape()),
        dbias_(bias_.shape()) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || padding < 0) {
      throw std::invalid_argument("invalid convolution geometry");
    }
  }

  /// He-normal weights, zero bias.
  void init(Rng& rng) {
    const double std = std::sqrt(2.0 / (in_ * k_ * k_));
    for (auto& v : weight_.values()) v = static_cast<T>(std * rng.normal());
    bias_.zero();
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }

  Shape output_shape(const Shape& s) const {
    if (s.c != in_) throw ShapeError("conv expects " + std::to_string(in_) + " channels, got " + s.str());
    const int ho = (s.h + 2 * pad_ - k_) / stride_ + 1;
    const int wo = (s.w + 2 * pad_ - k_) / stride_ + 1;
    if (s.h + 2 * pad_ < k_ || s.w + 2 * pad_ < k_) throw ShapeError("conv input smaller than kernel: " + s.str());
    return {s.n, out_, ho, wo};
  }

  Tensor<T> apply(const Tensor<T>& x) const { return run(x, nullptr); }

  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape();
    return run(x, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Shape os = output_shape(in_shape_);
    if (dy.shape() != os) throw ShapeError("conv backward: gradient " + dy.shape().str() + " vs output " + os.str());
    if (static_cast<int>(cache_.size()) != in_shape_.n) throw std::logic_error("conv backward without forward");
    return pointwise() || stride_ != 1 ? backward_im2col(dy, os) : backward_shifted(dy, os);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }
  const Tensor<T>& weight_grad() const { return dweight_; }
  const Tensor<T>& bias_grad() const { return dbias_; }

 private:
  bool pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  // Stride-1 convolutions run as k*k shifted GEMMs over a zero-padded copy of
  // the input. Output is computed on an ho x wp grid; the last k-1 columns of
  // each row are discarded.
  struct Padded {
    int hp, wp, ho, wo;
    Eigen::Index len;    // ho * wp
    Eigen::Index total;  // hp * wp + k - 1
  };

  Padded padded_geometry(const Shape& s) const {
    Padded g;
    g.hp = s.h + 2 * pad_;
    g.wp = s.w + 2 * pad_;
    g.ho = g.hp - k_ + 1;
    g.wo = g.wp - k_ + 1;
    g.len = static_cast<Eigen::Index>(g.ho) * g.wp;
    g.total = static_cast<Eigen::Index>(g.hp) * g.wp + k_ - 1;
    return g;
  }

  MatrixR<T> pad_sample(const Tensor<T>& x, int n, const Padded& g) const {
    MatrixR<T> xp = MatrixR<T>::Zero(in_, g.total);
    for (int c = 0; c < in_; ++c) {
      const T* src = x.plane(n, c);
      T* dst = xp.row(c).data();
      for (int y = 0; y < x.h(); ++y) {
        std::copy(src + static_cast<std::size_t>(y) * x.w(), src + static_cast<std::size_t>(y + 1) * x.w(),
                  dst + static_cast<std::size_t>(y + pad_) * g.wp + pad_);
      }
    }
    return xp;
  }

  // Weight slice for tap (ky, kx) as an (out, in) matrix.
  std::vector<MatrixR<T>> tap_matrices() const {
    std::vector<MatrixR<T>> taps(static_cast<std::size_t>(k_ * k_), MatrixR<T>(out_, in_));
    for (int o = 0; o < out_; ++o)
      for (int i = 0; i < in_; ++i)
        for (int t = 0; t < k_ * k_; ++t) taps[t](o, i) = weight_[(static_cast<std::size_t>(o) * in_ + i) * k_ * k_ + t];
    return taps;
  }

  Eigen::Index tap_offset(int t, const Padded& g) const { return static_cast<Eigen::Index>(t / k_) * g.wp + t % k_; }

  Tensor<T> run(const Tensor<T>& x, std::vector<MatrixR<T>>* cache) const {
    const Shape os = output_shape(x.shape());
    Tensor<T> y(os);
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.data(), out_);
    if (cache) cache->assign(static_cast<std::size_t>(x.n()), MatrixR<T>());
    if (pointwise() || stride_ != 1) {
      const std::size_t cols = os.plane();
      const CMapR<T> wm(weight_.data(), out_, in_ * k_ * k_);
      AlignedVector<T> col;
      for (int n = 0; n < x.n(); ++n) {
        MapR<T> ym(y.sample(n), out_, static_cast<Eigen::Index>(cols));
        ym.noalias() = wm * column_view(x, n, os, col);
        ym.colwise() += b;
        if (cache) (*cache)[n] = CMapR<T>(x.sample(n), in_, x.shape().plane());
      }
      return y;
    }
    const Padded g = padded_geometry(x.shape());
    const auto taps = tap_matrices();
    MatrixR<T> acc(out_, g.len);
    for (int n = 0; n < x.n(); ++n) {
      MatrixR<T> xp = pad_sample(x, n, g);
      acc.setZero();
      for (int t = 0; t < k_ * k_; ++t) acc.noalias() += taps[t] * xp.middleCols(tap_offset(t, g), g.len);
      for (int o = 0; o < out_; ++o) {
        T* dst = y.plane(n, o);
        const T* src = acc.row(o).data();
        const T bo = b[o];
        for (int yy = 0; yy < g.ho; ++yy)
          for (int xx = 0; xx < g.wo; ++xx) dst[yy * g.wo + xx] = src[static_cast<std::size_t>(yy) * g.wp + xx] + bo;
      }
      if (cache) (*cache)[n] = std::move(xp);
    }
    return y;
  }

  Tensor<T> backward_shifted(const Tensor<T>& dy, const Shape& os) {
    const Padded g = padded_geometry(in_shape_);
    const auto taps = tap_matrices();
    std::vector<MatrixR<T>> dtaps(taps.size(), MatrixR<T>::Zero(out_, in_));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(dbias_.data(), out_);
    Tensor<T> dx(in_shape_);
    MatrixR<T> dyw(out_, g.len);
    MatrixR<T> dxp(in_, g.total);
    for (int n = 0; n < in_shape_.n; ++n) {
      dyw.setZero();
      for (int o = 0; o < out_; ++o) {
        const T* src = dy.plane(n, o);
        T* dst = dyw.row(o).data();
        for (int yy = 0; yy < os.h; ++yy)
          for (int xx = 0; xx < os.w; ++xx) dst[static_cast<std::size_t>(yy) * g.wp + xx] = src[yy * os.w + xx];
      }
      db += dyw.rowwise().sum();
      const MatrixR<T>& xp = cache_[n];
      dxp.setZero();
      for (int t = 0; t < k_ * k_; ++t) {
        const Eigen::Index off = tap_offset(t, g);
        dtaps[t].noalias() += dyw * xp.middleCols(off, g.len).transpose();
        dxp.middleCols(off, g.len).noalias() += taps[t].transpose() * dyw;
      }
      for (int c = 0; c < in_; ++c) {
        const T* src = dxp.row(c).data();
        T* dst = dx.plane(n, c);
        for (int yy = 0; yy < in_shape_.h; ++yy) {
          const T* srow = src + static_cast<std::size_t>(yy + pad_) * g.wp + pad_;
          std::copy(srow, srow + in_shape_.w, dst + static_cast<std::size_t>(yy) * in_shape_.w);
        }
      }
    }
    for (int o = 0; o < out_; ++o)
      for (int i = 0; i < in_; ++i)
        for (int t = 0; t < k_ * k_; ++t) dweight_[(static_cast<std::size_t>(o) * in_ + i) * k_ * k_ + t] += dtaps[t](o, i);
    return dx;
  }

  // (in*k*k, Ho*Wo) patch matrix for sample n; pointwise convs read the input directly.
  CMapR<T> column_view(const Tensor<T>& x, int n, const Shape& os, AlignedVector<T>& col) const {
    const auto rows = static_cast<Eigen::Index>(in_ * k_ * k_);
    const auto cols = static_cast<Eigen::Index>(os.plane());
    if (pointwise()) return CMapR<T>(x.sample(n), rows, cols);
    col.resize(static_cast<std::size_t>(rows * cols));
    const int h = x.h(), w = x.w();
    for (int c = 0; c < in_; ++c) {
      const T* src = x.plane(n, c);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          T* dst = col.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * cols;
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            T* drow = dst + static_cast<std::size_t>(oy) * os.w;
            if (iy < 0 || iy >= h) {
              std::fill(drow, drow + os.w, T(0));
              continue;
            }
            const T* srow = src + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              drow[ox] = ix >= 0 && ix < w ? srow[ix] : T(0);
            }
          }
        }
      }
    }
    return CMapR<T>(col.data(), rows, cols);
  }

  void col2im(const MatrixR<T>& dcol, Tensor<T>& dx, int n, const Shape& os) const {
    const int h = dx.h(), w = dx.w();
    const std::size_t cols = os.plane();
    for (int c = 0; c < in_; ++c) {
      T* dst = dx.plane(n, c);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const T* src = dcol.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * cols;
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            const T* srow = src + static_cast<std::size_t>(oy) * os.w;
            T* drow = dst + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }

  // Used for pointwise and strided convolutions; the cache holds the raw input planes.
  Tensor<T> backward_im2col(const Tensor<T>& dy, const Shape& os) {
    const auto rows = static_cast<Eigen::Index>(in_ * k_ * k_);
    const auto cols = static_cast<Eigen::Index>(os.plane());
    const CMapR<T> wm(weight_.data(), out_, rows);
    MapR<T> dwm(dweight_.data(), out_, rows);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(dbias_.data(), out_);
    Tensor<T> dx(in_shape_);
    Tensor<T> xn(Shape{1, in_, in_shape_.h, in_shape_.w});
    AlignedVector<T> col;
    MatrixR<T> dcol;
    for (int n = 0; n < in_shape_.n; ++n) {
      std::copy(cache_[n].data(), cache_[n].data() + cache_[n].size(), xn.data());
      const CMapR<T> dym(dy.sample(n), out_, cols);
      const CMapR<T> cm = column_view(xn, 0, os, col);
      dwm.noalias() += dym * cm.transpose();
      db += dym.rowwise().sum();
      if (pointwise()) {
        MapR<T> dxm(dx.sample(n), rows, cols);
        dxm.noalias() = wm.transpose() * dym;
      } else {
        dcol.noalias() = wm.transpose() * dym;
        col2im(dcol, dx, n, os);
      }
    }
    return dx;
  }

  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Shape in_shape_;
  std::vector<MatrixR<T>> cache_;
};

template <typename T>
class Relu {
 public:
  static Tensor<T> apply(Tensor<T> x) {
    for (auto& v : x.values()) v = v > T(0) ? v : T(0);
    return x;
  }

  Tensor<T> forward(const Tensor<T>& x) {
    output_ = apply(x);
    return output_;
  }

  Tensor<T> backward(Tensor<T> dy) const {
    output_.require_same_shape(dy, "relu backward");
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(output_[i] > T(0))) dy[i] = T(0);
    }
    return dy;
  }

 private:
  Tensor<T> output_;
};

template <typename T>
class Sigmoid {
 public:
  static Tensor<T> apply(Tensor<T> x) {
    for (auto& v : x.values()) v = T(1) / (T(1) + std::exp(-v));
    return x;
  }

  Tensor<T> forward(const Tensor<T>& x) {
    output_ = apply(x);
    return output_;
  }

  Tensor<T> backward(Tensor<T> dy) const {
    output_.require_same_shape(dy, "sigmoid backward");
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= output_[i] * (T(1) - output_[i]);
    return dy;
  }

 private:
  Tensor<T> output_;
};

/// 2x2 max pooling, stride 2.
template <typename T>
class MaxPool2 {
 public:
  static Shape output_shape(const Shape& s) {
    if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("max pool needs even spatial dims, got " + s.str());
    return {s.n, s.c, s.h / 2, s.w / 2};
  }

  static Tensor<T> apply(const Tensor<T>& x) { return run(x, nullptr); }

  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape();
    return run(x, &argmax_);
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    if (dy.shape() != output_shape(in_shape_)) throw ShapeError("max pool backward shape");
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }

 private:
  static Tensor<T> run(const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
    const Shape os = output_shape(x.shape());
    Tensor<T> y(os);
    if (argmax) argmax->assign(os.size(), 0);
    std::size_t o = 0;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        const T* p = x.plane(n, c);
        const std::size_t base = p - x.data();
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox, ++o) {
            std::size_t best = static_cast<std::size_t>(2 * oy) * x.w() + 2 * ox;
            // Ties resolve to the first element in row-major order.
            for (std::size_t cand : {best + 1, best + x.w(), best + x.w() + 1}) {
              if (p[cand] > p[best]) best = cand;
            }
            y[o] = p[best];
            if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(base + best);
          }
        }
      }
    }
    return y;
  }

  Shape in_shape_{};
  std::vector<std::uint32_t> argmax_;
};

/// 2x2 transpose convolution with stride 2: doubles H and W, in -> out channels.
/// Weights are (in, out, 2, 2).
template <typename T>
class ConvTranspose2x2 {
 public:
  ConvTranspose2x2() = default;
  ConvTranspose2x2(int in_channels, int out_channels)
      : in_(in_channels), out_(out_channels),
        weight_(Shape{in_channels, out_channels, 2, 2}),
        bias_(Shape{1, out_channels, 1, 1}),
        dweight_(weight_.shape()),
        dbias_(bias_.shape()) {
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("invalid transpose conv channels");
  }

  /// Decoder upsampling: channels halve as resolution doubles.
  static ConvTranspose2x2 halving(int channels) {
    if (channels < 2 || channels % 2 != 0) {
      throw ShapeError("upsampling needs an even channel count, got " + std::to_string(channels));
    }
    return ConvTranspose2x2(channels, channels / 2);
  }

  void init(Rng& rng) {
    const double std = std::sqrt(2.0 / in_);
    for (auto& v : weight_.values()) v = static_cast<T>(std * rng.normal());
    bias_.zero();
  }

  Shape output_shape(const Shape& s) const {
    if (s.c != in_) throw ShapeError("transpose conv expects " + std::to_string(in_) + " channels, got " + s.str());
    return {s.n, out_, 2 * s.h, 2 * s.w};
  }

  Tensor<T> apply(const Tensor<T>& x) const {
    const Shape os = output_shape(x.shape());
    Tensor<T> y(os);
    const auto hw = static_cast<Eigen::Index>(x.shape().plane());
    const CMapR<T> wm(weight_.data(), in_, out_ * 4);
    MatrixR<T> z;
    for (int n = 0; n < x.n(); ++n) {
      const CMapR<T> xm(x.sample(n), in_, hw);
      z.noalias() = wm.transpose() * xm;
      for (int co = 0; co < out_; ++co) {
        T* dst = y.plane(n, co);
        const T b = bias_[co];
        for (int k = 0; k < 4; ++k) {
          const int dy = k / 2, dx = k % 2;
          const T* src = z.data() + static_cast<std::size_t>(co * 4 + k) * hw;
          for (int iy = 0; iy < x.h(); ++iy) {
            T* row = dst + static_cast<std::size_t>(2 * iy + dy) * os.w + dx;
            const T* srow = src + static_cast<std::size_t>(iy) * x.w();
            for (int ix = 0; ix < x.w(); ++ix) row[2 * ix] = srow[ix] + b;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    return apply(x);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Shape is = input_.shape();
    if (dy.shape() != output_shape(is)) throw ShapeError("transpose conv backward shape");
    const auto hw = static_cast<Eigen::Index>(is.plane());
    const CMapR<T> wm(weight_.data(), in_, out_ * 4);
    MapR<T> dwm(dweight_.data(), in_, out_ * 4);
    Tensor<T> dx(is);
    MatrixR<T> dz(out_ * 4, hw);
    for (int n = 0; n < is.n; ++n) {
      for (int co = 0; co < out_; ++co) {
        const T* src = dy.plane(n, co);
        T bsum = T(0);
        for (int k = 0; k < 4; ++k) {
          const int ky = k / 2, kx = k % 2;
          T* dst = dz.data() + static_cast<std::size_t>(co * 4 + k) * hw;
          for (int iy = 0; iy < is.h; ++iy) {
            const T* row = src + static_cast<std::size_t>(2 * iy + ky) * dy.w() + kx;
            T* drow = dst + static_cast<std::size_t>(iy) * is.w;
            for (int ix = 0; ix < is.w; ++ix) {
              drow[ix] = row[2 * ix];
              bsum += row[2 * ix];
            }
          }
        }
        dbias_[co] += bsum;
      }
      const CMapR<T> xm(input_.sample(n), in_, hw);
      dwm.noalias() += xm * dz.transpose();
      MapR<T> dxm(dx.sample(n), in_, hw);
      dxm.noalias() = wm * dz;
    }
    return dx;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Tensor<T> input_;
};

/// Fully connected layer on (N, F, 1, 1) tensors; any input shape is flattened per sample.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_(Shape{out_features, in_features, 1, 1}),
        bias_(Shape{1, out_features, 1, 1}),
        dweight_(weight_.shape()),
        dbias_(bias_.shape()) {
    if (in_features < 1 || out_features < 1) throw std::invalid_argument("invalid linear layer size");
  }

  void init(Rng& rng) {
    const double std = std::sqrt(2.0 / in_);
    for (auto& v : weight_.values()) v = static_cast<T>(std * rng.normal());
    bias_.zero();
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Tensor<T> apply(const Tensor<T>& x) const {
    if (x.shape().sample() != static_cast<std::size_t>(in_)) {
      throw ShapeError("linear expects " + std::to_string(in_) + " features, got " + x.shape().str());
    }
    Tensor<T> y(Shape{x.n(), out_, 1, 1});
    const CMapR<T> xm(x.data(), x.n(), in_);
    const CMapR<T> wm(weight_.data(), out_, in_);
    MapR<T> ym(y.data(), x.n(), out_);
    ym.noalias() = xm * wm.transpose();
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.data(), out_);
    ym.rowwise() += b;
    return y;
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    return apply(x);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (dy.shape() != Shape{input_.n(), out_, 1, 1}) throw ShapeError("linear backward shape");
    const CMapR<T> xm(input_.data(), input_.n(), in_);
    const CMapR<T> wm(weight_.data(), out_, in_);
    const CMapR<T> dym(dy.data(), input_.n(), out_);
    MapR<T> dwm(dweight_.data(), out_, in_);
    dwm.noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(dbias_.data(), out_);
    db += dym.colwise().sum();
    Tensor<T> dx(input_.shape());
    MapR<T> dxm(dx.data(), input_.n(), in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Tensor<T> input_;
};

/// Two 3x3 same-padding convolutions, each followed by ReLU.
template <typename T>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(int in_channels, int width) : conv1_(in_channels, width, 3, 1, 1), conv2_(width, width, 3, 1, 1) {}

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
  }

  int width() const { return conv2_.out_channels(); }

  Tensor<T> apply(const Tensor<T>& x) const {
    return Relu<T>::apply(conv2_.apply(Relu<T>::apply(conv1_.apply(x))));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    return relu2_.forward(conv2_.forward(relu1_.forward(conv1_.forward(x))));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    return conv1_.backward(relu1_.backward(conv2_.backward(relu2_.backward(dy))));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
  }

  Conv2d<T>& conv1() { return conv1_; }
  Conv2d<T>& conv2() { return conv2_; }

 private:
  Conv2d<T> conv1_, conv2_;
  Relu<T> relu1_, relu2_;
};

}  // namespace bev::nn
