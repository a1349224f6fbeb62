#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bev/errors.hpp"
#include "bev/geometry.hpp"

namespace bev {

/// Row-major interleaved image with values in [0, 1].
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) throw ShapeError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ShapeError("images have 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const RasterImage& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const RasterImage& a, const RasterImage& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

namespace detail {

// Coordinates within this distance of a pixel centre are treated as exactly
// on it, so maps that are the identity up to round-off reproduce the input.
inline constexpr double kPixelSnap = 1e-6;

inline double snap_coordinate(double v) {
  const double r = std::nearbyint(v);
  return std::abs(v - r) < kPixelSnap ? r : v;
}

}  // namespace detail

/// Bilinear interpolation with zero padding; pixel (m, n) sits at (m, n).
inline void bilinear_sample(const RasterImage& image, double xs, double ys, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  if (!std::isfinite(xs) || !std::isfinite(ys)) return;
  xs = detail::snap_coordinate(xs);
  ys = detail::snap_coordinate(ys);
  const double x0f = std::floor(xs);
  const double y0f = std::floor(ys);
  if (x0f < -1.0 || y0f < -1.0 || x0f > image.width() || y0f > image.height()) return;
  const int x0 = static_cast<int>(x0f);
  const int y0 = static_cast<int>(y0f);
  const double ax = xs - x0f;
  const double ay = ys - y0f;
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  for (int dy = 0; dy < 2; ++dy) {
    const int y = y0 + dy;
    if (y < 0 || y >= image.height() || wy[dy] == 0.0) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx;
      if (x < 0 || x >= image.width() || wx[dx] == 0.0) continue;
      const double w = wx[dx] * wy[dy];
      for (int c = 0; c < image.channels(); ++c) {
        out[c] = static_cast<float>(out[c] + w * image.at(x, y, c));
      }
    }
  }
}

inline std::vector<float> bilinear_sample(const RasterImage& image, double xs, double ys) {
  std::vector<float> out(image.channels());
  bilinear_sample(image, xs, ys, out);
  return out;
}

/// Inverse-mapping warp: output pixel p takes the input value at
/// `output_to_input(p)`. Pixels that map to infinity are left at zero.
inline RasterImage warp_image(const RasterImage& image, const Mat3& output_to_input, int out_width,
                              int out_height) {
  if (!output_to_input.allFinite() || !(std::abs(output_to_input.determinant()) > 1e-12)) {
    throw GeometryError(GeometryErrc::kSingularHomography, "cannot warp with a singular map");
  }
  RasterImage out(out_width, out_height, image.channels());
  const Mat3& h = output_to_input;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const double w = h(2, 0) * x + h(2, 1) * y + h(2, 2);
      if (!(std::abs(w) > 1e-12)) continue;
      const double xs = (h(0, 0) * x + h(0, 1) * y + h(0, 2)) / w;
      const double ys = (h(1, 0) * x + h(1, 1) * y + h(1, 2)) / w;
      bilinear_sample(image, xs, ys, std::span<float>(&out.at(x, y, 0), image.channels()));
    }
  }
  return out;
}

inline RasterImage warp_image(const RasterImage& image, const Homography& output_to_input, int out_width,
                              int out_height) {
  return warp_image(image, output_to_input.matrix(), out_width, out_height);
}

/// Luma for RGB, identity for single channel.
inline RasterImage to_grayscale(const RasterImage& image) {
  if (image.channels() == 1) return image;
  RasterImage out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y) = 0.299f * image.at(x, y, 0) + 0.587f * image.at(x, y, 1) + 0.114f * image.at(x, y, 2);
    }
  }
  return out;
}

}  // namespace bev
