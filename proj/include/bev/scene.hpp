#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "bev/errors.hpp"
#include "bev/geometry.hpp"
#include "bev/raster.hpp"

namespace bev::scene {

using Json = nlohmann::json;

/// Four-arm intersection centred on the world origin. Roads run along the
/// world X and Y axes; z is up.
struct SceneConfig {
  double road_half_width = 7.0;
  // Vehicle centres are drawn from |X|,|Y| <= arm_length inside the road cross.
  double arm_length = 11.0;
  CameraIntrinsics pole_intrinsics;
  CameraExtrinsics pole_extrinsics;
  CameraIntrinsics bev_intrinsics;
  CameraExtrinsics bev_extrinsics;
  int image_size = 128;
  double lane_spacing = 3.5;
  double road_intensity = 0.35;
  double background_intensity = 0.55;
  double meters_per_bev_pixel = 0.25;

  /// Pole camera 8 m up, south of the junction and tilted toward it; BEV
  /// camera straight above the centre covering image_size * 0.25 m.
  static SceneConfig standard(int image_size = 128) {
    SceneConfig cfg;
    cfg.image_size = image_size;
    const double s = image_size / 128.0;
    const double c = (image_size - 1) / 2.0;
    cfg.pole_intrinsics = {92.0 * s, 92.0 * s, c, c, image_size, image_size};
    cfg.pole_extrinsics = CameraExtrinsics::look_at(Vec3(0.0, -21.0, 8.0), Vec3(0.0, -1.0, 0.0));
    const double bev_height = 50.0;
    cfg.meters_per_bev_pixel = 0.25 / s;
    const double f = bev_height / cfg.meters_per_bev_pixel;
    cfg.bev_intrinsics = {f, f, c, c, image_size, image_size};
    // Image x follows world +X, image y follows world -Y (north up).
    cfg.bev_extrinsics.rotation << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
    cfg.bev_extrinsics.translation = Vec3(0.0, 0.0, bev_height);
    return cfg;
  }

  void validate() const {
    if (!(road_half_width > 0.0) || !(arm_length > 0.0)) throw std::invalid_argument("road extents must be positive");
    if (image_size < 8) throw std::invalid_argument("image size too small");
    if (!(meters_per_bev_pixel > 0.0)) throw std::invalid_argument("meters per BEV pixel must be positive");
    pole_intrinsics.validate();
    pole_extrinsics.validate();
    bev_intrinsics.validate();
    bev_extrinsics.validate();
    for (const auto* k : {&pole_intrinsics, &bev_intrinsics}) {
      if (k->width != image_size || k->height != image_size) {
        throw std::invalid_argument("camera image size disagrees with image_size");
      }
    }
    const Vec3 axis = bev_extrinsics.rotation.row(2).transpose();
    if (!((axis - Vec3(0.0, 0.0, -1.0)).norm() < 1e-9)) throw std::invalid_argument("BEV camera must look straight down");
    const double height = bev_extrinsics.center().z();
    if (std::abs(height / bev_intrinsics.fx - meters_per_bev_pixel) > 1e-9 * meters_per_bev_pixel ||
        std::abs(bev_intrinsics.fx - bev_intrinsics.fy) > 1e-9 * bev_intrinsics.fx) {
      throw std::invalid_argument("meters_per_bev_pixel must equal BEV height / focal length");
    }
    const Vec3 pc = pole_extrinsics.rotation * Vec3::Zero() + pole_extrinsics.translation;
    if (!(pc.z() > 0.0)) throw std::invalid_argument("pole camera does not see the intersection centre");
    const Vec2 centre = project_ground_to_image(pole_intrinsics, pole_extrinsics, Vec2::Zero());
    if (centre.x() < 0 || centre.y() < 0 || centre.x() > image_size - 1 || centre.y() > image_size - 1) {
      throw std::invalid_argument("intersection centre is outside the pole camera frame");
    }
  }

  Homography ground_to_bev() const { return homography_from_camera(bev_intrinsics, bev_extrinsics); }
  Homography ground_to_pole() const { return homography_from_camera(pole_intrinsics, pole_extrinsics); }

  bool in_drivable_region(double x, double y) const {
    const bool ns = std::abs(x) <= road_half_width && std::abs(y) <= arm_length;
    const bool ew = std::abs(y) <= road_half_width && std::abs(x) <= arm_length;
    return ns || ew;
  }
};

inline Json camera_to_json(const CameraIntrinsics& k, const CameraExtrinsics& e) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(e.rotation(r, c));
  return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height},
              {"rotation", rot}, {"translation", {e.translation.x(), e.translation.y(), e.translation.z()}}};
}

inline void camera_from_json(const Json& j, CameraIntrinsics& k, CameraExtrinsics& e) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  const auto& rot = j.at("rotation");
  const auto& t = j.at("translation");
  if (rot.size() != 9 || t.size() != 3) throw std::invalid_argument("camera rotation/translation size");
  for (int i = 0; i < 9; ++i) e.rotation(i / 3, i % 3) = rot.at(i).get<double>();
  for (int i = 0; i < 3; ++i) e.translation(i) = t.at(i).get<double>();
}

inline Json to_json(const SceneConfig& cfg) {
  return Json{{"road_half_width", cfg.road_half_width},
              {"arm_length", cfg.arm_length},
              {"image_size", cfg.image_size},
              {"lane_spacing", cfg.lane_spacing},
              {"road_intensity", cfg.road_intensity},
              {"background_intensity", cfg.background_intensity},
              {"meters_per_bev_pixel", cfg.meters_per_bev_pixel},
              {"pole_camera", camera_to_json(cfg.pole_intrinsics, cfg.pole_extrinsics)},
              {"bev_camera", camera_to_json(cfg.bev_intrinsics, cfg.bev_extrinsics)}};
}

/// Missing keys fall back to SceneConfig::standard for the given image size.
inline SceneConfig scene_from_json(const Json& j) {
  SceneConfig cfg = SceneConfig::standard(j.value("image_size", 128));
  cfg.road_half_width = j.value("road_half_width", cfg.road_half_width);
  cfg.arm_length = j.value("arm_length", cfg.arm_length);
  cfg.lane_spacing = j.value("lane_spacing", cfg.lane_spacing);
  cfg.road_intensity = j.value("road_intensity", cfg.road_intensity);
  cfg.background_intensity = j.value("background_intensity", cfg.background_intensity);
  cfg.meters_per_bev_pixel = j.value("meters_per_bev_pixel", cfg.meters_per_bev_pixel);
  if (j.contains("pole_camera")) camera_from_json(j.at("pole_camera"), cfg.pole_intrinsics, cfg.pole_extrinsics);
  if (j.contains("bev_camera")) camera_from_json(j.at("bev_camera"), cfg.bev_intrinsics, cfg.bev_extrinsics);
  cfg.validate();
  return cfg;
}

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double length = 4.5;
  double width = 1.8;
  double height = 1.5;

  void validate() const {
    if (!(length > 0.0 && width > 0.0 && height > 0.0)) throw std::invalid_argument("vehicle dimensions must be positive");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(yaw)) throw std::invalid_argument("vehicle pose is not finite");
  }

  /// Footprint corners, counter-clockwise, in ground coordinates.
  std::array<Vec2, 4> footprint() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double hl = length / 2.0, hw = width / 2.0;
    const std::array<Vec2, 4> local = {Vec2(hl, hw), Vec2(-hl, hw), Vec2(-hl, -hw), Vec2(hl, -hw)};
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i) {
      out[i] = Vec2(x + c * local[i].x() - s * local[i].y(), y + s * local[i].x() + c * local[i].y());
    }
    return out;
  }

  bool contains(double gx, double gy) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = gx - x, dy = gy - y;
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    return std::abs(lx) <= length / 2.0 && std::abs(ly) <= width / 2.0;
  }
};

inline Json to_json(const VehicleState& v) {
  return Json{{"x", v.x}, {"y", v.y}, {"yaw", v.yaw}, {"length", v.length}, {"width", v.width}, {"height", v.height}};
}

inline VehicleState vehicle_from_json(const Json& j) {
  VehicleState v{j.at("x").get<double>(),      j.at("y").get<double>(),     j.at("yaw").get<double>(),
                 j.at("length").get<double>(), j.at("width").get<double>(), j.at("height").get<double>()};
  v.validate();
  return v;
}

namespace detail {

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; counter-clockwise in a y-up sense.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Inclusive containment for a convex polygon of either orientation.
inline bool convex_contains(const std::vector<Vec2>& poly, const Vec2& p) {
  if (poly.size() < 3) return false;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const double c = cross2(poly[i], poly[(i + 1) % poly.size()], p);
    if (c > 0) pos = true;
    if (c < 0) neg = true;
    if (pos && neg) return false;
  }
  return true;
}

struct Rgb {
  float r, g, b;
};

inline Rgb ground_color(const SceneConfig& cfg, double x, double y) {
  const double hw = cfg.road_half_width;
  const bool ns = std::abs(x) <= hw;
  const bool ew = std::abs(y) <= hw;
  const float bg = static_cast<float>(cfg.background_intensity);
  if (!ns && !ew) return {0.55f * bg, bg, 0.45f * bg};
  const float road = static_cast<float>(cfg.road_intensity);
  const Rgb line{0.9f, 0.9f, 0.85f};
  constexpr double kLine = 0.15;
  // Lane markings along each arm, stopping at the junction box.
  auto marking = [&](double across, double along) {
    if (std::abs(along) <= hw) return false;
    if (std::abs(std::abs(across) - (hw - 0.3)) < kLine) return true;
    if (std::abs(across) < kLine) return true;
    for (double off = cfg.lane_spacing; off < hw - 0.5; off += cfg.lane_spacing) {
      if (std::abs(std::abs(across) - off) < kLine && std::fmod(std::abs(along), 3.0) < 1.5) return true;
    }
    return std::abs(std::abs(along) - (hw + 0.5)) < 0.25 && std::abs(across) < hw;
  };
  if ((ns && marking(x, y)) || (ew && marking(y, x))) return line;
  return {road, road, road};
}

}  // namespace detail

/// Ground, markings and sky as seen by the pole camera, without a vehicle.
inline RasterImage render_background(const SceneConfig& cfg) {
  const auto& k = cfg.pole_intrinsics;
  const auto& e = cfg.pole_extrinsics;
  RasterImage img(k.width, k.height, 3);
  const Vec3 c = e.center();
  const Mat3 rt = e.rotation.transpose();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d = rt * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      detail::Rgb col{0.7f, 0.8f, 0.95f};
      if (d.z() < -1e-9) {
        const double t = -c.z() / d.z();
        col = detail::ground_color(cfg, c.x() + t * d.x(), c.y() + t * d.y());
      }
      img.at(u, v, 0) = col.r;
      img.at(u, v, 1) = col.g;
      img.at(u, v, 2) = col.b;
    }
  }
  return img;
}

/// Road layout seen from the BEV camera.
inline RasterImage render_bev_background(const SceneConfig& cfg) {
  const auto& k = cfg.bev_intrinsics;
  RasterImage img(k.width, k.height, 3);
  const Mat3 to_ground = cfg.ground_to_bev().inverse().matrix();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec2 g = apply_homography(to_ground, Vec2(u, v));
      const auto col = detail::ground_color(cfg, g.x(), g.y());
      img.at(u, v, 0) = col.r;
      img.at(u, v, 1) = col.g;
      img.at(u, v, 2) = col.b;
    }
  }
  return img;
}

/// Vehicle cuboid as projected into the pole camera.
struct Silhouette {
  RasterImage mask;  // binary, 1 channel
  std::vector<Vec2> hull;
  std::array<Vec2, 8> vertices{};
  bool in_front = false;
  std::size_t area = 0;
};

inline Silhouette project_vehicle(const SceneConfig& cfg, const VehicleState& v) {
  v.validate();
  const auto& k = cfg.pole_intrinsics;
  Silhouette s;
  s.mask = RasterImage(k.width, k.height, 1);
  const auto fp = v.footprint();
  const Vec3 cam = cfg.pole_extrinsics.center();
  if (cam.z() <= v.height) return s;
  for (int i = 0; i < 8; ++i) {
    const Vec3 w(fp[i % 4].x(), fp[i % 4].y(), i < 4 ? 0.0 : v.height);
    const Vec3 pc = cfg.pole_extrinsics.rotation * w + cfg.pole_extrinsics.translation;
    if (!(pc.z() > 1e-6)) return s;
    s.vertices[i] = project_point(k, cfg.pole_extrinsics, w);
  }
  s.in_front = true;
  s.hull = detail::convex_hull(std::vector<Vec2>(s.vertices.begin(), s.vertices.end()));
  if (s.hull.size() < 3) return s;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : s.hull) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::ceil(xmin)));
  const int x1 = std::min(k.width - 1, static_cast<int>(std::floor(xmax)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(ymin)));
  const int y1 = std::min(k.height - 1, static_cast<int>(std::floor(ymax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (detail::convex_contains(s.hull, Vec2(x, y))) {
        s.mask.at(x, y) = 1.0f;
        ++s.area;
      }
    }
  }
  return s;
}

struct PerspectiveRender {
  RasterImage image;
  bool vehicle_visible = false;
};

/// Pole camera frame with the vehicle drawn as a flat-shaded cuboid.
inline PerspectiveRender render_perspective(const SceneConfig& cfg, const VehicleState& v) {
  PerspectiveRender out{render_background(cfg), false};
  const Silhouette s = project_vehicle(cfg, v);
  if (s.area == 0) return out;
  out.vehicle_visible = true;

  // Visible faces of a convex solid never overlap in projection.
  struct Face {
    std::array<int, 4> idx;
    Vec3 normal;
    float shade;
  };
  const double c = std::cos(v.yaw), sn = std::sin(v.yaw);
  const Vec3 fwd(c, sn, 0.0), left(-sn, c, 0.0);
  const Vec3 light = Vec3(0.3, -0.5, 0.8).normalized();
  auto lambert = [&](const Vec3& n) { return static_cast<float>(0.45 + 0.55 * std::max(0.0, n.dot(light))); };
  const std::array<Face, 5> faces = {{
      {{4, 5, 6, 7}, Vec3::UnitZ(), 1.0f},
      {{0, 3, 7, 4}, fwd, lambert(fwd)},
      {{1, 2, 6, 5}, -fwd, lambert(-fwd)},
      {{0, 1, 5, 4}, left, lambert(left)},
      {{2, 3, 7, 6}, -left, lambert(-left)},
  }};
  const Vec3 cam = cfg.pole_extrinsics.center();
  const Vec3 centre(v.x, v.y, v.height / 2.0);
  const double half[3] = {v.length / 2.0, v.width / 2.0, v.height / 2.0};
  std::vector<std::pair<std::vector<Vec2>, float>> visible;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const double extent = f == 0 ? half[2] : (f < 3 ? half[0] : half[1]);
    const Vec3 face_centre = centre + faces[f].normal * extent;
    if (faces[f].normal.dot(cam - face_centre) <= 0.0) continue;
    std::vector<Vec2> quad;
    for (int i : faces[f].idx) quad.push_back(s.vertices[i]);
    visible.emplace_back(std::move(quad), faces[f].shade);
  }
  const float base[3] = {0.85f, 0.2f, 0.15f};
  for (int y = 0; y < s.mask.height(); ++y) {
    for (int x = 0; x < s.mask.width(); ++x) {
      if (s.mask.at(x, y) == 0.0f) continue;
      float shade = 1.0f;
      for (const auto& [quad, sh] : visible) {
        if (detail::convex_contains(quad, Vec2(x, y))) {
          shade = sh;
          break;
        }
      }
      for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = base[ch] * shade;
    }
  }
  return out;
}

/// Top-down vehicle footprint in the BEV frame: 1 = vehicle, 0 = background.
inline RasterImage render_bev_mask(const SceneConfig& cfg, const VehicleState& v) {
  v.validate();
  const auto& k = cfg.bev_intrinsics;
  RasterImage mask(k.width, k.height, 1);
  const Mat3 to_ground = cfg.ground_to_bev().inverse().matrix();
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  const Homography to_px = cfg.ground_to_bev();
  for (const auto& corner : v.footprint()) {
    const Vec2 p = to_px.apply(corner);
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(xmin)));
  const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(xmax)));
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(ymax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 g = apply_homography(to_ground, Vec2(x, y));
      if (v.contains(g.x(), g.y())) mask.at(x, y) = 1.0f;
    }
  }
  return mask;
}

/// Axis-aligned bounding box of the projected silhouette, filled with ones.
inline RasterImage bbox_mask_from_silhouette(const RasterImage& silhouette) {
  RasterImage mask(silhouette.width(), silhouette.height(), 1);
  int x0 = silhouette.width(), x1 = -1, y0 = silhouette.height(), y1 = -1;
  for (int y = 0; y < silhouette.height(); ++y) {
    for (int x = 0; x < silhouette.width(); ++x) {
      if (silhouette.at(x, y) > 0.5f) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) mask.at(x, y) = 1.0f;
  return mask;
}

inline RasterImage render_perspective_bbox_mask(const SceneConfig& cfg, const VehicleState& v) {
  return bbox_mask_from_silhouette(project_vehicle(cfg, v).mask);
}

/// Foreground centroid (x, y) of a binary mask; empty masks have none.
inline std::optional<Vec2> mask_centroid(const RasterImage& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) > 0.5f) {
        sx += x;
        sy += y;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return Vec2(sx / static_cast<double>(n), sy / static_cast<double>(n));
}

inline std::size_t mask_area(const RasterImage& mask) {
  std::size_t n = 0;
  for (float v : mask.data()) n += v > 0.5f;
  return n;
}

}  // namespace bev::scene
