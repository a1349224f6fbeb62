#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "bev/nn/layers.hpp"

namespace bev::nn {

/// Eight projective parameters per batch element, shape (N, 8, 1, 1), laid out
/// as (t11, t12, t13, t21, t22, t23, t31, t32) with t33 fixed to 1.
template <typename T>
using ThetaParams = Tensor<T>;

inline constexpr int kThetaSize = 8;
inline constexpr std::array<double, kThetaSize> kIdentityTheta = {1, 0, 0, 0, 1, 0, 0, 0};

template <typename T>
ThetaParams<T> identity_theta(int batch) {
  ThetaParams<T> theta(Shape{batch, kThetaSize, 1, 1});
  for (int n = 0; n < batch; ++n)
    for (int k = 0; k < kThetaSize; ++k) theta(n, k, 0, 0) = static_cast<T>(kIdentityTheta[k]);
  return theta;
}

/// Source coordinates (x_s, y_s) per output location, normalized to [-1, 1].
template <typename T>
struct SamplingGrid {
  int n = 0;
  int h = 0;
  int w = 0;
  AlignedVector<T> xy;  // (n, h, w, 2)

  SamplingGrid() = default;
  SamplingGrid(int n_, int h_, int w_) : n(n_), h(h_), w(w_), xy(static_cast<std::size_t>(n_) * h_ * w_ * 2, T(0)) {}

  T* at(int b, int y, int x) { return xy.data() + ((static_cast<std::size_t>(b) * h + y) * w + x) * 2; }
  const T* at(int b, int y, int x) const {
    return xy.data() + ((static_cast<std::size_t>(b) * h + y) * w + x) * 2;
  }
};

/// Normalized lattice coordinate of pixel i along an axis of the given size;
/// pixel 0 sits at -1 and pixel size-1 at +1.
template <typename T>
T lattice_coordinate(int i, int size) {
  if (size <= 1) return T(0);
  return static_cast<T>(-1.0 + 2.0 * i / (size - 1));
}

inline constexpr double kHorizonEpsilon = 1e-6;

/// Projective grid generator: source = perspective division of theta * (x_t, y_t, 1).
template <typename T>
class GridGenerator {
 public:
  static SamplingGrid<T> apply(const ThetaParams<T>& theta, int out_h, int out_w, std::size_t* clamped = nullptr) {
    check_theta(theta);
    SamplingGrid<T> grid(theta.n(), out_h, out_w);
    std::size_t flagged = 0;
    for (int b = 0; b < theta.n(); ++b) {
      const T* t = theta.sample(b);
      for (int y = 0; y < out_h; ++y) {
        const T yt = lattice_coordinate<T>(y, out_h);
        for (int x = 0; x < out_w; ++x) {
          const T xt = lattice_coordinate<T>(x, out_w);
          const T w = denominator(t, xt, yt, flagged);
          T* g = grid.at(b, y, x);
          g[0] = (t[0] * xt + t[1] * yt + t[2]) / w;
          g[1] = (t[3] * xt + t[4] * yt + t[5]) / w;
        }
      }
    }
    if (clamped) *clamped = flagged;
    return grid;
  }

  SamplingGrid<T> forward(const ThetaParams<T>& theta, int out_h, int out_w) {
    theta_ = theta;
    out_h_ = out_h;
    out_w_ = out_w;
    grid_ = apply(theta, out_h, out_w, &clamped_);
    return grid_;
  }

  /// Gradient with respect to theta. Clamped denominators pass gradients
  /// through as if the clamped value were exact.
  ThetaParams<T> backward(const SamplingGrid<T>& dgrid) const {
    if (dgrid.n != theta_.n() || dgrid.h != out_h_ || dgrid.w != out_w_) throw ShapeError("grid generator backward shape");
    ThetaParams<T> dtheta(theta_.shape());
    std::size_t unused = 0;
    for (int b = 0; b < theta_.n(); ++b) {
      const T* t = theta_.sample(b);
      T* dt = dtheta.sample(b);
      for (int y = 0; y < out_h_; ++y) {
        const T yt = lattice_coordinate<T>(y, out_h_);
        for (int x = 0; x < out_w_; ++x) {
          const T xt = lattice_coordinate<T>(x, out_w_);
          const T w = denominator(t, xt, yt, unused);
          const T* g = grid_.at(b, y, x);
          const T* dg = dgrid.at(b, y, x);
          const T gx = dg[0] / w, gy = dg[1] / w;
          dt[0] += gx * xt;
          dt[1] += gx * yt;
          dt[2] += gx;
          dt[3] += gy * xt;
          dt[4] += gy * yt;
          dt[5] += gy;
          const T common = -(gx * g[0] + gy * g[1]);
          dt[6] += common * xt;
          dt[7] += common * yt;
        }
      }
    }
    return dtheta;
  }

  /// Number of target locations whose denominator was clamped in the last forward pass.
  std::size_t clamped() const { return clamped_; }

 private:
  static void check_theta(const ThetaParams<T>& theta) {
    if (theta.shape().sample() != kThetaSize) throw ShapeError("theta must have 8 entries per sample, got " + theta.shape().str());
    if (!theta.all_finite()) throw NumericError("theta has non-finite entries");
  }

  static T denominator(const T* t, T xt, T yt, std::size_t& flagged) {
    T w = t[6] * xt + t[7] * yt + T(1);
    if (!(std::abs(w) > static_cast<T>(kHorizonEpsilon))) {
      ++flagged;
      w = std::signbit(w) ? static_cast<T>(-kHorizonEpsilon) : static_cast<T>(kHorizonEpsilon);
    }
    return w;
  }

  ThetaParams<T> theta_;
  SamplingGrid<T> grid_;
  int out_h_ = 0, out_w_ = 0;
  std::size_t clamped_ = 0;
};

namespace detail {

// Grid coordinates within this distance of a pixel centre snap onto it, so
// an identity grid reproduces its input exactly despite round-off in the
// normalized <-> pixel conversion.
template <typename T>
T snap_to_pixel(T v) {
  const T r = std::nearbyint(v);
  const T tol = std::numeric_limits<T>::epsilon() * T(64) * std::max(T(1), std::abs(v));
  return std::abs(v - r) <= tol ? r : v;
}

template <typename T>
T to_pixel(T normalized, int size) {
  return (normalized + T(1)) * T(0.5) * static_cast<T>(size - 1);
}

}  // namespace detail

/// Bilinear sampler with zero padding outside the input.
template <typename T>
class GridSampler {
 public:
  static Tensor<T> apply(const Tensor<T>& u, const SamplingGrid<T>& grid) {
    if (grid.n != u.n()) throw ShapeError("grid batch differs from input batch");
    Tensor<T> v(Shape{u.n(), u.c(), grid.h, grid.w});
    const int hin = u.h(), win = u.w();
    for (int b = 0; b < u.n(); ++b) {
      for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
          const Taps taps = make_taps(grid.at(b, y, x), hin, win);
          const std::size_t o = static_cast<std::size_t>(y) * grid.w + x;
          for (int c = 0; c < u.c(); ++c) {
            const T* src = u.plane(b, c);
            T acc = T(0);
            for (int k = 0; k < 4; ++k) {
              if (taps.valid[k]) acc += taps.weight[k] * src[taps.index[k]];
            }
            v.plane(b, c)[o] = acc;
          }
        }
      }
    }
    return v;
  }

  Tensor<T> forward(const Tensor<T>& u, const SamplingGrid<T>& grid) {
    input_ = u;
    grid_ = grid;
    return apply(u, grid);
  }

  struct Gradients {
    Tensor<T> input;
    SamplingGrid<T> grid;
  };

  Gradients backward(const Tensor<T>& dv) const {
    if (dv.shape() != Shape{input_.n(), input_.c(), grid_.h, grid_.w}) throw ShapeError("sampler backward shape");
    Gradients g{Tensor<T>(input_.shape()), SamplingGrid<T>(grid_.n, grid_.h, grid_.w)};
    const int hin = input_.h(), win = input_.w();
    const T sx = static_cast<T>(win - 1) * T(0.5);
    const T sy = static_cast<T>(hin - 1) * T(0.5);
    for (int b = 0; b < input_.n(); ++b) {
      for (int y = 0; y < grid_.h; ++y) {
        for (int x = 0; x < grid_.w; ++x) {
          const Taps taps = make_taps(grid_.at(b, y, x), hin, win);
          const std::size_t o = static_cast<std::size_t>(y) * grid_.w + x;
          T dpx = T(0), dpy = T(0);
          for (int c = 0; c < input_.c(); ++c) {
            const T go = dv.plane(b, c)[o];
            if (go == T(0)) continue;
            const T* src = input_.plane(b, c);
            T* dsrc = g.input.plane(b, c);
            for (int k = 0; k < 4; ++k) {
              if (!taps.valid[k]) continue;
              dsrc[taps.index[k]] += go * taps.weight[k];
              const T val = go * src[taps.index[k]];
              dpx += val * taps.dwx[k];
              dpy += val * taps.dwy[k];
            }
          }
          T* dg = g.grid.at(b, y, x);
          dg[0] = dpx * sx;
          dg[1] = dpy * sy;
        }
      }
    }
    return g;
  }

 private:
  struct Taps {
    std::array<std::size_t, 4> index{};
    std::array<T, 4> weight{};
    std::array<T, 4> dwx{};  // d weight / d pixel x
    std::array<T, 4> dwy{};
    std::array<bool, 4> valid{};
  };

  static Taps make_taps(const T* g, int hin, int win) {
    Taps t;
    if (!std::isfinite(g[0]) || !std::isfinite(g[1])) return t;
    const T px = detail::snap_to_pixel(detail::to_pixel(g[0], win));
    const T py = detail::snap_to_pixel(detail::to_pixel(g[1], hin));
    const T fx = std::floor(px), fy = std::floor(py);
    if (fx < T(-1) || fy < T(-1) || fx > T(win) || fy > T(hin)) return t;
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const T ax = px - fx, ay = py - fy;
    for (int k = 0; k < 4; ++k) {
      const int dx = k % 2, dy = k / 2;
      const int xi = x0 + dx, yi = y0 + dy;
      const T wx = dx ? ax : T(1) - ax;
      const T wy = dy ? ay : T(1) - ay;
      t.valid[k] = xi >= 0 && xi < win && yi >= 0 && yi < hin;
      t.index[k] = t.valid[k] ? static_cast<std::size_t>(yi) * win + xi : 0;
      t.weight[k] = wx * wy;
      t.dwx[k] = (dx ? T(1) : T(-1)) * wy;
      t.dwy[k] = (dy ? T(1) : T(-1)) * wx;
    }
    return t;
  }

  Tensor<T> input_;
  SamplingGrid<T> grid_;
};

struct LocalizationConfig {
  int conv1_channels = 8;
  int conv1_kernel = 11;
  int conv1_stride = 5;
  int conv2_channels = 16;
  int conv2_kernel = 7;
  int conv2_stride = 3;
  int hidden = 32;
  int output = kThetaSize;

  // Smallest feature map accepted; padding of kernel / 2 keeps both strided
  // convolutions defined down to this size.
  static constexpr int kMinInput = 8;

  void validate() const {
    if (conv1_kernel != 11 || conv1_stride != 5 || conv2_kernel != 7 || conv2_stride != 3) {
      throw std::invalid_argument("localization convolutions are 11x11/5 and 7x7/3");
    }
    if (output != kThetaSize) throw std::invalid_argument("localization output width must be 8");
    if (conv1_channels < 1 || conv2_channels < 1 || hidden < 1) throw std::invalid_argument("localization widths must be positive");
  }

  static int conv_out(int size, int k, int s) { return (size + 2 * (k / 2) - k) / s + 1; }
  int flat_features(int h, int w) const {
    return conv2_channels * conv_out(conv_out(h, conv1_kernel, conv1_stride), conv2_kernel, conv2_stride) *
           conv_out(conv_out(w, conv1_kernel, conv1_stride), conv2_kernel, conv2_stride);
  }
};

/// conv 11x11/5 -> ReLU -> conv 7x7/3 -> ReLU -> FC -> ReLU -> FC(8).
/// The last layer starts with zero weights and an identity-encoding bias.
template <typename T>
class LocalizationNet {
 public:
  LocalizationNet() = default;
  LocalizationNet(int in_channels, int in_h, int in_w, const LocalizationConfig& cfg = {})
      : in_h_(in_h), in_w_(in_w),
        conv1_(in_channels, cfg.conv1_channels, cfg.conv1_kernel, cfg.conv1_stride, cfg.conv1_kernel / 2),
        conv2_(cfg.conv1_channels, cfg.conv2_channels, cfg.conv2_kernel, cfg.conv2_stride, cfg.conv2_kernel / 2),
        fc1_(cfg.flat_features(in_h, in_w), cfg.hidden),
        fc2_(cfg.hidden, cfg.output) {
    cfg.validate();
    if (in_h < LocalizationConfig::kMinInput || in_w < LocalizationConfig::kMinInput) {
      throw ShapeError("localization input too small: " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                       ", minimum " + std::to_string(LocalizationConfig::kMinInput));
    }
  }

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    fc1_.init(rng);
    reset_to_identity();
  }

  void reset_to_identity() {
    fc2_.weight().zero();
    for (int k = 0; k < kThetaSize; ++k) fc2_.bias()[k] = static_cast<T>(kIdentityTheta[k]);
  }

  ThetaParams<T> apply(const Tensor<T>& u) const {
    check(u);
    const Tensor<T> h = Relu<T>::apply(conv2_.apply(Relu<T>::apply(conv1_.apply(u))));
    return fc2_.apply(Relu<T>::apply(fc1_.apply(h)));
  }

  ThetaParams<T> forward(const Tensor<T>& u) {
    check(u);
    const Tensor<T> h = relu2_.forward(conv2_.forward(relu1_.forward(conv1_.forward(u))));
    return fc2_.forward(relu3_.forward(fc1_.forward(h)));
  }

  Tensor<T> backward(const ThetaParams<T>& dtheta) {
    Tensor<T> g = relu3_.backward(fc2_.backward(dtheta));
    g = fc1_.backward(g);
    return conv1_.backward(relu1_.backward(conv2_.backward(relu2_.backward(g))));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
    fc1_.collect(out, prefix + ".fc1");
    fc2_.collect(out, prefix + ".fc2");
  }

  Linear<T>& fc2() { return fc2_; }

 private:
  void check(const Tensor<T>& u) const {
    if (u.h() != in_h_ || u.w() != in_w_) {
      throw ShapeError("localization net built for " + std::to_string(in_h_) + "x" + std::to_string(in_w_) +
                       ", got " + u.shape().str());
    }
  }

  int in_h_ = 0, in_w_ = 0;
  Conv2d<T> conv1_, conv2_;
  Linear<T> fc1_, fc2_;
  Relu<T> relu1_, relu2_, relu3_;
};

/// Localization, grid generation and sampling; output shape equals input shape.
template <typename T>
class SpatialTransformer {
 public:
  SpatialTransformer() = default;
  SpatialTransformer(int channels, int h, int w, const LocalizationConfig& cfg = {})
      : h_(h), w_(w), loc_(channels, h, w, cfg) {}

  void init(Rng& rng) { loc_.init(rng); }

  Tensor<T> apply(const Tensor<T>& u) const {
    return GridSampler<T>::apply(u, GridGenerator<T>::apply(loc_.apply(u), u.h(), u.w()));
  }

  Tensor<T> forward(const Tensor<T>& u) {
    theta_ = loc_.forward(u);
    return sampler_.forward(u, generator_.forward(theta_, u.h(), u.w()));
  }

  Tensor<T> backward(const Tensor<T>& dv) {
    auto g = sampler_.backward(dv);
    Tensor<T> du = loc_.backward(generator_.backward(g.grid));
    du += g.input;
    return du;
  }

  ThetaParams<T> theta(const Tensor<T>& u) const { return loc_.apply(u); }
  const ThetaParams<T>& last_theta() const { return theta_; }
  std::size_t clamped() const { return generator_.clamped(); }

  void collect(ParamList<T>& out, const std::string& prefix) { loc_.collect(out, prefix + ".loc"); }

  LocalizationNet<T>& localization() { return loc_; }

 private:
  int h_ = 0, w_ = 0;
  LocalizationNet<T> loc_;
  GridGenerator<T> generator_;
  GridSampler<T> sampler_;
  ThetaParams<T> theta_;
};

}  // namespace bev::nn
