#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bev/errors.hpp"

namespace bev {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw std::invalid_argument("principal point outside the image");
    }
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

/// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
/// Camera frame is x right, y down, z along the optical axis.
struct CameraExtrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho < 1e-9) || !(rotation.determinant() > 0.0)) {
      throw std::invalid_argument("rotation is not a proper orthonormal matrix");
    }
    if (!translation.allFinite()) throw std::invalid_argument("translation is not finite");
  }

  Vec3 center() const { return -rotation.transpose() * translation; }

  /// Camera at `eye` looking at `target`, with image rows running against `up`.
  static CameraExtrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) {
      // Looking straight along `up`: fall back to world +X as image right.
      right = Vec3::UnitX();
    }
    right.normalize();
    const Vec3 down = forward.cross(right);
    CameraExtrinsics e;
    e.rotation.row(0) = right.transpose();
    e.rotation.row(1) = down.transpose();
    e.rotation.row(2) = forward.transpose();
    e.translation = -e.rotation * eye;
    return e;
  }
};

struct PointCorrespondence {
  Vec2 source;
  Vec2 target;
};

/// Maps a 2-D point through a raw 3x3 matrix with perspective division.
inline Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
  if (!(std::abs(w) > 1e-12)) {
    throw GeometryError(GeometryErrc::kDegenerateDenominator, "point maps to infinity");
  }
  return {(h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2)) / w,
          (h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2)) / w};
}

/// Non-singular 3x3 projective map between planes, stored with h33 = 1
/// whenever h33 is non-zero.
class Homography {
 public:
  Homography() : h_(Mat3::Identity()) {}

  explicit Homography(const Mat3& m) : h_(m) {
    if (!m.allFinite()) {
      throw GeometryError(GeometryErrc::kSingularHomography, "matrix has non-finite entries");
    }
    if (std::abs(h_(2, 2)) > 1e-12) {
      h_ /= h_(2, 2);
    } else {
      h_ /= h_.norm();
    }
    if (!(std::abs(h_.determinant()) > 1e-12)) {
      throw GeometryError(GeometryErrc::kSingularHomography, "determinant vanishes");
    }
  }

  static Homography identity() { return Homography(); }

  static Homography translation(double dx, double dy) {
    Mat3 m = Mat3::Identity();
    m(0, 2) = dx;
    m(1, 2) = dy;
    return Homography(m);
  }

  const Mat3& matrix() const { return h_; }
  double operator()(int r, int c) const { return h_(r, c); }

  Homography inverse() const { return Homography(h_.inverse()); }

  /// Composition: (a * b) applies b first.
  friend Homography operator*(const Homography& a, const Homography& b) {
    return Homography(a.h_ * b.h_);
  }

  Vec2 apply(const Vec2& p) const { return apply_homography(h_, p); }

 private:
  Mat3 h_;
};

inline Vec2 apply_homography(const Homography& h, const Vec2& p) { return h.apply(p); }

namespace detail {

// Similarity that moves the centroid to the origin and scales the mean
// distance from it to sqrt(2).
inline Mat3 hartley_normalization(std::span<const Vec2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) {
    throw GeometryError(GeometryErrc::kDegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

inline Vec2 transform_affine(const Mat3& t, const Vec2& p) {
  return {t(0, 0) * p.x() + t(0, 1) * p.y() + t(0, 2), t(1, 0) * p.x() + t(1, 1) * p.y() + t(1, 2)};
}

}  // namespace detail

/// Direct linear transform with Hartley normalization. The returned map takes
/// each correspondence's source point to its target point.
inline Homography estimate_homography_dlt(std::span<const PointCorrespondence> corr) {
  const std::size_t n = corr.size();
  if (n < 4) {
    throw GeometryError(GeometryErrc::kInsufficientPoints,
                        "need at least 4 correspondences, got " + std::to_string(n));
  }
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!corr[i].source.allFinite() || !corr[i].target.allFinite()) {
      throw GeometryError(GeometryErrc::kDegenerateConfiguration, "non-finite correspondence");
    }
    src[i] = corr[i].source;
    dst[i] = corr[i].target;
  }
  const Mat3 t_src = detail::hartley_normalization(src);
  const Mat3 t_dst = detail::hartley_normalization(dst);
  for (auto& p : src) p = detail::transform_affine(t_src, p);
  for (auto& p : dst) p = detail::transform_affine(t_dst, p);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        const Vec2 a = src[j] - src[i];
        const Vec2 b = src[k] - src[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) * 0.5 < 1e-9) {
          throw GeometryError(GeometryErrc::kDegenerateConfiguration, "three source points are collinear");
        }
      }
    }
  }

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x(), y = src[i].y();
    const double u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(t_dst.inverse() * hn * t_src);
}

inline Homography estimate_homography_dlt(const std::vector<PointCorrespondence>& corr) {
  return estimate_homography_dlt(std::span<const PointCorrespondence>(corr));
}

/// Pinhole projection of a world point.
inline Vec2 project_point(const CameraIntrinsics& intr, const CameraExtrinsics& extr, const Vec3& world) {
  const Vec3 pc = extr.rotation * world + extr.translation;
  if (!(pc.z() > 1e-6)) {
    throw GeometryError(GeometryErrc::kBehindCamera, "camera-frame depth is not positive");
  }
  return {intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy};
}

inline Vec2 project_ground_to_image(const CameraIntrinsics& intr, const CameraExtrinsics& extr,
                                    const Vec2& ground_point) {
  return project_point(intr, extr, Vec3(ground_point.x(), ground_point.y(), 0.0));
}

/// Homography taking ground-plane (z = 0) coordinates in meters to pixels.
inline Homography homography_from_camera(const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  if (!(std::abs(extr.center().z()) > 1e-6)) {
    throw GeometryError(GeometryErrc::kCameraInPlane, "camera center lies on the ground plane");
  }
  Mat3 m;
  m.col(0) = extr.rotation.col(0);
  m.col(1) = extr.rotation.col(1);
  m.col(2) = extr.translation;
  return Homography(intr.matrix() * m);
}

}  // namespace bev
