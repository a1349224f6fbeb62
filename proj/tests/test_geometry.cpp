#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bev/geometry.hpp"
#include "bev/io.hpp"
#include "bev/raster.hpp"
#include "support.hpp"

using namespace bev;

namespace {

GeometryErrc error_code(auto&& fn) {
  try {
    fn();
  } catch (const GeometryError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a GeometryError";
  return GeometryErrc::kSingularHomography;
}

CameraExtrinsics downward_camera(double height) {
  CameraExtrinsics e;
  e.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  e.translation = Vec3(0, 0, height);
  return e;
}

}  // namespace

TEST(ApplyHomography, IdentityKeepsPoint) {
  const Vec2 p = apply_homography(Mat3::Identity(), Vec2(3.5, 7.0));
  EXPECT_EQ(p, Vec2(3.5, 7.0));
}

TEST(ApplyHomography, Translation) {
  EXPECT_EQ(Homography::translation(2, -1).apply(Vec2(0, 0)), Vec2(2, -1));
}

TEST(ApplyHomography, HomogeneousDivision) {
  Mat3 m = Mat3::Identity();
  m(2, 2) = 2.0;
  const Vec2 p = apply_homography(m, Vec2(1, 1));
  EXPECT_DOUBLE_EQ(p.x(), 0.5);
  EXPECT_DOUBLE_EQ(p.y(), 0.5);
  // Normalized storage gives the same map.
  const Homography h(m);
  EXPECT_DOUBLE_EQ(h(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(h.apply(Vec2(1, 1)).x(), 0.5);
}

TEST(ApplyHomography, PointAtInfinity) {
  Mat3 m = Mat3::Identity();
  m(2, 0) = 1.0;
  m(2, 2) = 0.0;
  m(0, 2) = 1.0;  // keep it non-singular
  EXPECT_EQ(error_code([&] { apply_homography(m, Vec2(0, 5)); }), GeometryErrc::kDegenerateDenominator);
}

TEST(ApplyHomography, ScaleInvariantAndComposes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 a = test::random_homography(rng);
    const Mat3 b = test::random_homography(rng);
    const Vec2 p = test::random_point(rng, -1, 1);
    const Vec2 pa = apply_homography(a, p);
    EXPECT_LT((apply_homography(Mat3(2.0 * a), p) - pa).cwiseAbs().maxCoeff(), 1e-12);
    const Vec2 chained = apply_homography(b, pa);
    const Vec2 composed = (Homography(b) * Homography(a)).apply(p);
    EXPECT_LT((chained - composed).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(HomographyType, RejectsSingular) {
  Mat3 m = Mat3::Identity();
  m(1, 1) = 0.0;
  EXPECT_EQ(error_code([&] { Homography h(m); }), GeometryErrc::kSingularHomography);
}

TEST(HomographyType, InverseRoundTrip) {
  std::mt19937_64 rng(3);
  const Homography h(test::random_homography(rng));
  const Vec2 p(0.3, -0.7);
  EXPECT_LT((h.inverse().apply(h.apply(p)) - p).norm(), 1e-10);
}

TEST(Dlt, UnitSquareIsIdentity) {
  std::vector<PointCorrespondence> c;
  for (const Vec2& p : {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}) c.push_back({p, p});
  const Homography h = estimate_homography_dlt(c);
  EXPECT_LT((h.matrix() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Dlt, RecoversRandomHomographies) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 truth = test::random_homography(rng);
    const Homography h = estimate_homography_dlt(test::correspondences_through(truth, rng, 4));
    const Mat3 t = truth / truth(2, 2);
    EXPECT_LT((h.matrix() - t).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    for (int k = 0; k < 50; ++k) {
      const Vec2 p = test::random_point(rng, -1, 1);
      EXPECT_LT((h.apply(p) - apply_homography(truth, p)).norm(), 1e-6);
    }
  }
}

TEST(Dlt, OverdeterminedExact) {
  std::mt19937_64 rng(5);
  const Mat3 truth = test::random_homography(rng);
  const Homography h = estimate_homography_dlt(test::correspondences_through(truth, rng, 12));
  EXPECT_LT((h.matrix() - truth / truth(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Dlt, CollinearSourcePoints) {
  std::vector<PointCorrespondence> c = {
      {Vec2(0, 0), Vec2(0, 0)}, {Vec2(1, 1), Vec2(1, 2)}, {Vec2(2, 2), Vec2(3, 1)}, {Vec2(0, 5), Vec2(1, 4)}};
  EXPECT_EQ(error_code([&] { estimate_homography_dlt(c); }), GeometryErrc::kDegenerateConfiguration);
}

TEST(Dlt, TooFewPoints) {
  std::vector<PointCorrespondence> c = {{Vec2(0, 0), Vec2(0, 0)}, {Vec2(1, 0), Vec2(1, 0)}, {Vec2(0, 1), Vec2(0, 1)}};
  EXPECT_EQ(error_code([&] { estimate_homography_dlt(c); }), GeometryErrc::kInsufficientPoints);
}

TEST(CameraHomography, DownwardCamera) {
  const CameraIntrinsics k{100, 100, 50, 50, 101, 101};
  const auto e = downward_camera(10.0);
  const Homography h = homography_from_camera(k, e);
  const Vec2 o = h.apply(Vec2(0, 0));
  EXPECT_NEAR(o.x(), 50.0, 1e-12);
  EXPECT_NEAR(o.y(), 50.0, 1e-12);
  const Vec2 p = h.apply(Vec2(1, 0));
  EXPECT_NEAR(p.x(), 60.0, 1e-12);
  EXPECT_NEAR(p.y(), 50.0, 1e-12);
}

TEST(CameraHomography, CameraInPlane) {
  const CameraIntrinsics k{100, 100, 50, 50, 101, 101};
  const auto e = CameraExtrinsics::look_at(Vec3(0, -10, 0), Vec3(0, 0, 0));
  EXPECT_EQ(error_code([&] { homography_from_camera(k, e); }), GeometryErrc::kCameraInPlane);
}

TEST(CameraHomography, AgreesWithProjection) {
  const CameraIntrinsics k{92, 92, 63.5, 63.5, 128, 128};
  const auto e = CameraExtrinsics::look_at(Vec3(0, -21, 8), Vec3(0, -1, 0));
  const Homography h = homography_from_camera(k, e);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Vec2 g = test::random_point(rng, -10, 10);
    EXPECT_LT((h.apply(g) - project_ground_to_image(k, e, g)).norm(), 1e-9);
  }
}

TEST(Projection, OpticalAxisAndBehind) {
  const CameraIntrinsics k{100, 120, 40, 30, 80, 60};
  const auto e = downward_camera(5.0);
  const Vec2 c = project_ground_to_image(k, e, Vec2(0, 0));
  EXPECT_DOUBLE_EQ(c.x(), 40.0);
  EXPECT_DOUBLE_EQ(c.y(), 30.0);
  const auto tilted = CameraExtrinsics::look_at(Vec3(0, -10, 5), Vec3(0, 0, 0));
  EXPECT_EQ(error_code([&] { project_ground_to_image(k, tilted, Vec2(0, -30)); }), GeometryErrc::kBehindCamera);
}

TEST(Extrinsics, RotationValidated) {
  CameraExtrinsics e;
  e.rotation = Mat3::Identity() * 1.1;
  EXPECT_THROW(e.validate(), std::invalid_argument);
  const auto la = CameraExtrinsics::look_at(Vec3(3, -7, 9), Vec3(0, 1, 0));
  EXPECT_NO_THROW(la.validate());
}

TEST(Bilinear, GridAlignedIsExact) {
  RasterImage img(4, 3, 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) img.at(x, y) = 0.1f * (x + 4 * y);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(bilinear_sample(img, x, y)[0], img.at(x, y));
}

TEST(Bilinear, CheckerboardMidpoint) {
  RasterImage img(2, 2, 1);
  img.at(1, 0) = 1.0f;
  img.at(0, 1) = 1.0f;
  EXPECT_FLOAT_EQ(bilinear_sample(img, 0.5, 0.5)[0], 0.5f);
}

TEST(Bilinear, ZeroPadding) {
  RasterImage img(3, 3, 3, 1.0f);
  for (float v : bilinear_sample(img, -5, -5)) EXPECT_EQ(v, 0.0f);
  // Half a pixel outside keeps half the border weight.
  EXPECT_FLOAT_EQ(bilinear_sample(img, -0.5, 1.0)[0], 0.5f);
}

TEST(Bilinear, LinearOnGradients) {
  RasterImage img(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(x, y) = 0.05f * x + 0.03f * y;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec2 p = test::random_point(rng, 0, 7);
    EXPECT_NEAR(bilinear_sample(img, p.x(), p.y())[0], 0.05 * p.x() + 0.03 * p.y(), 1e-6);
  }
}

TEST(Warp, IdentityIsExact) {
  const RasterImage img = test::random_image(17, 13, 3, 4);
  EXPECT_EQ(warp_image(img, Homography::identity(), 17, 13), img);
}

TEST(Warp, IntegerTranslation) {
  const RasterImage img = test::random_image(10, 8, 1, 5);
  // Output pixel (x, y) samples input (x - 2, y + 1): content moves right 2, up 1.
  const RasterImage out = warp_image(img, Homography::translation(-2, 1), 10, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      const int sx = x - 2, sy = y + 1;
      const float expect = (sx >= 0 && sx < 10 && sy >= 0 && sy < 8) ? img.at(sx, sy) : 0.0f;
      EXPECT_EQ(out.at(x, y), expect);
    }
  }
}

TEST(Warp, RoundTripOnSmoothImage) {
  RasterImage img(64, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = static_cast<float>(x + y) / 126.0f;
  Mat3 m = Mat3::Identity();
  m << 1.02, 0.03, -1.0, -0.02, 0.98, 1.5, 1e-4, -2e-4, 1.0;
  const Homography h(m);
  const RasterImage back = warp_image(warp_image(img, h, 64, 64), h.inverse(), 64, 64);
  double err = 0.0;
  int n = 0;
  for (int y = 4; y < 60; ++y)
    for (int x = 4; x < 60; ++x, ++n) err += std::abs(back.at(x, y) - img.at(x, y));
  EXPECT_LT(err / n, 0.02);
}

TEST(Warp, SingularMapRejected) {
  Mat3 m = Mat3::Zero();
  m(2, 2) = 1.0;
  EXPECT_EQ(error_code([&] { warp_image(RasterImage(4, 4, 1), m, 4, 4); }), GeometryErrc::kSingularHomography);
}

TEST(ImageIo, PngRoundTrip) {
  RasterImage rgb(5, 4, 3);
  for (std::size_t i = 0; i < rgb.data().size(); ++i) rgb.data()[i] = static_cast<float>(i % 256) / 255.0f;
  const auto dir = test::temp_dir("png");
  io::save_png(dir / "a.png", rgb);
  EXPECT_EQ(io::load_png(dir / "a.png"), rgb);
  RasterImage gray(3, 3, 1, 0.5f);
  io::save_png(dir / "g.png", gray);
  const RasterImage g = io::load_png(dir / "g.png");
  EXPECT_EQ(g.channels(), 1);
  EXPECT_FLOAT_EQ(g.at(1, 1), 128.0f / 255.0f);
  EXPECT_EQ(io::to_byte(1.7f), 255);
  EXPECT_EQ(io::to_byte(-0.2f), 0);
  EXPECT_THROW(io::load_png(dir / "missing.png"), DataError);
}

TEST(ImageIo, HomographyAndCorrespondenceText) {
  std::mt19937_64 rng(8);
  const Homography h(test::random_homography(rng));
  const Homography back = io::homography_from_json(io::homography_to_json(h));
  EXPECT_EQ(back.matrix(), h.matrix());
  const auto corr = io::parse_correspondences("# header\n0 0 1 1\n\n2 3 4 5  # tail\n");
  ASSERT_EQ(corr.size(), 2u);
  EXPECT_EQ(corr[1].source, Vec2(2, 3));
  EXPECT_EQ(corr[1].target, Vec2(4, 5));
  EXPECT_EQ(io::parse_correspondences(io::format_correspondences(corr))[1].target, Vec2(4, 5));
  EXPECT_THROW(io::parse_correspondences("1 2 3\n"), DataError);
  EXPECT_THROW(io::parse_correspondences("1 2 3 4 5\n"), DataError);
}
