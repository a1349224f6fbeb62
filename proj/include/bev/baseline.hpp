#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "bev/dataset.hpp"
#include "bev/geometry.hpp"
#include "bev/raster.hpp"
#include "bev/scene.hpp"

namespace bev::baseline {

/// Ground-plane reference points (meters) used for the classical warp.
inline constexpr std::array<std::array<double, 2>, 4> kReferenceGroundPoints = {
    {{-6.0, -6.0}, {6.0, -6.0}, {6.0, 6.0}, {-6.0, 6.0}}};

/// Pole-image pixel to BEV pixel correspondences of the four reference points.
inline std::vector<PointCorrespondence> reference_correspondences(const scene::SceneConfig& cfg) {
  const Homography to_pole = cfg.ground_to_pole();
  const Homography to_bev = cfg.ground_to_bev();
  std::vector<PointCorrespondence> out;
  for (const auto& g : kReferenceGroundPoints) {
    const Vec2 p(g[0], g[1]);
    out.push_back({to_pole.apply(p), to_bev.apply(p)});
  }
  return out;
}

/// Warps a source image into a `width` x `height` target frame given the
/// source-to-target homography.
inline RasterImage warp_to_target(const RasterImage& source, const Homography& source_to_target, int width,
                                  int height) {
  return warp_image(source, source_to_target.inverse(), width, height);
}

/// Pixels that look like the red vehicle paint.
inline RasterImage vehicle_color_mask(const RasterImage& rgb) {
  if (rgb.channels() != 3) throw ShapeError("vehicle colour mask needs an RGB image");
  RasterImage mask(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const float r = rgb.at(x, y, 0), g = rgb.at(x, y, 1), b = rgb.at(x, y, 2);
      mask.at(x, y) = (r > 0.2f && r > 2.0f * g && r > 2.0f * b) ? 1.0f : 0.0f;
    }
  }
  return mask;
}

inline RasterImage binarize(RasterImage m, float threshold = 0.5f) {
  for (auto& v : m.data()) v = v > threshold ? 1.0f : 0.0f;
  return m;
}

/// Classical BEV mask: segment the vehicle by colour, then warp the mask with
/// the perspective-to-BEV homography.
inline RasterImage predict_mask(const RasterImage& perspective, const Homography& persp_to_bev, int width,
                                int height) {
  return binarize(warp_to_target(vehicle_color_mask(perspective), persp_to_bev, width, height));
}

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  /// Longer side over shorter side.
  double elongation() const {
    const double a = width(), b = height();
    return a > b ? a / b : b / a;
  }
};

inline std::optional<BoundingBox> mask_bbox(const RasterImage& mask) {
  BoundingBox bb{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) > 0.5f) {
        bb.x0 = std::min(bb.x0, x);
        bb.y0 = std::min(bb.y0, y);
        bb.x1 = std::max(bb.x1, x);
        bb.y1 = std::max(bb.y1, y);
      }
    }
  }
  if (bb.x1 < 0) return std::nullopt;
  return bb;
}

/// Relative difference of bounding-box aspect ratios (width / height).
inline double aspect_ratio_error(const RasterImage& warped, const RasterImage& truth) {
  const auto a = mask_bbox(warped);
  const auto b = mask_bbox(truth);
  if (!b) throw DataError("aspect ratio needs a non-empty reference mask");
  if (!a) return 1.0;
  const double ra = static_cast<double>(a->width()) / a->height();
  const double rb = static_cast<double>(b->width()) / b->height();
  return std::abs(ra - rb) / rb;
}

}  // namespace bev::baseline
