#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bev/dataset.hpp"
#include "bev/io.hpp"
#include "bev/scene.hpp"
#include "support.hpp"

using namespace bev;
using scene::SceneConfig;
using scene::VehicleState;

namespace {

const SceneConfig& cfg() {
  static const SceneConfig c = SceneConfig::standard();
  return c;
}

VehicleState vehicle(double x, double y, double yaw, double length = 4.5, double width = 1.8) {
  VehicleState v;
  v.x = x;
  v.y = y;
  v.yaw = yaw;
  v.length = length;
  v.width = width;
  return v;
}

// BEV pixel of a ground point: the camera sits above the origin, image x
// follows +X and image y follows -Y at 0.25 m per pixel.
Vec2 bev_pixel(double x, double y) {
  const double c = (cfg().image_size - 1) / 2.0;
  return Vec2(c + x / cfg().meters_per_bev_pixel, c - y / cfg().meters_per_bev_pixel);
}

struct Extent {
  int x0, x1, y0, y1;
};

Extent extent(const RasterImage& m) {
  Extent e{m.width(), -1, m.height(), -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) > 0.5f) {
        e.x0 = std::min(e.x0, x);
        e.x1 = std::max(e.x1, x);
        e.y0 = std::min(e.y0, y);
        e.y1 = std::max(e.y1, y);
      }
  return e;
}

bool is_binary(const RasterImage& m) {
  for (float v : m.data())
    if (v != 0.0f && v != 1.0f) return false;
  return true;
}

// Every row is either empty or one run spanning the same columns, and the
// non-empty rows are contiguous.
bool is_filled_rectangle(const RasterImage& m) {
  int first = -1, last = -1, rows_start = -1, rows_end = -1;
  for (int y = 0; y < m.height(); ++y) {
    int runs = 0, a = -1, b = -1;
    for (int x = 0; x < m.width(); ++x) {
      const bool on = m.at(x, y) > 0.5f;
      const bool prev = x > 0 && m.at(x - 1, y) > 0.5f;
      if (on && !prev) {
        ++runs;
        a = x;
      }
      if (on) b = x;
    }
    if (runs == 0) continue;
    if (runs > 1) return false;
    if (rows_start < 0) {
      rows_start = y;
      first = a;
      last = b;
    } else if (a != first || b != last || y != rows_end + 1) {
      return false;
    }
    rows_end = y;
  }
  return true;
}

}  // namespace

TEST(SceneConfig, StandardIsValid) {
  EXPECT_NO_THROW(cfg().validate());
  EXPECT_EQ(cfg().meters_per_bev_pixel, 0.25);
  EXPECT_NEAR(cfg().bev_extrinsics.center().z() / cfg().bev_intrinsics.fx, 0.25, 1e-12);
  auto bad = cfg();
  bad.meters_per_bev_pixel = 0.3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg();
  bad.bev_extrinsics.rotation = Mat3::Identity();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SceneConfig, JsonRoundTrip) {
  const auto back = scene::scene_from_json(scene::to_json(cfg()));
  EXPECT_EQ(scene::to_json(back).dump(), scene::to_json(cfg()).dump());
  EXPECT_NO_THROW(back.validate());
}

TEST(RenderPerspective, Deterministic) {
  const auto v = vehicle(2.0, -3.0, 0.7);
  EXPECT_EQ(scene::render_perspective(cfg(), v).image, scene::render_perspective(cfg(), v).image);
}

TEST(RenderPerspective, HiddenVehicleLeavesBackground) {
  const auto r = scene::render_perspective(cfg(), vehicle(0.0, -40.0, 0.0));
  EXPECT_FALSE(r.vehicle_visible);
  EXPECT_EQ(r.image, scene::render_background(cfg()));
  const auto box = scene::render_perspective_bbox_mask(cfg(), vehicle(0.0, -40.0, 0.0));
  EXPECT_EQ(scene::mask_area(box), 0u);
}

TEST(RenderPerspective, CentredVehicleSilhouette) {
  const auto v = vehicle(0.0, 0.0, 0.0);
  const auto sil = scene::project_vehicle(cfg(), v);
  ASSERT_GT(sil.area, 0u);
  const auto c = scene::mask_centroid(sil.mask);
  ASSERT_TRUE(c);
  const Vec2 centre = project_point(cfg().pole_intrinsics, cfg().pole_extrinsics, Vec3(0.0, 0.0, v.height / 2.0));
  EXPECT_LT((*c - centre).norm(), 5.0);
  EXPECT_TRUE(scene::render_perspective(cfg(), v).vehicle_visible);
}

TEST(RenderBevMask, CentredAxisAlignedRectangle) {
  const auto m = scene::render_bev_mask(cfg(), vehicle(0.0, 0.0, 0.0, 4.0, 2.0));
  EXPECT_TRUE(is_binary(m));
  EXPECT_TRUE(is_filled_rectangle(m));
  const auto e = extent(m);
  // 4 m x 2 m at 0.25 m/px around pixel 63.5: 16 x 8 pixels.
  EXPECT_EQ(e.x1 - e.x0 + 1, 16);
  EXPECT_EQ(e.y1 - e.y0 + 1, 8);
  EXPECT_DOUBLE_EQ((e.x0 + e.x1) / 2.0, 63.5);
  EXPECT_DOUBLE_EQ((e.y0 + e.y1) / 2.0, 63.5);
}

TEST(RenderBevMask, QuarterTurnSwapsExtents) {
  const auto a = extent(scene::render_bev_mask(cfg(), vehicle(0.0, 0.0, 0.0, 5.0, 2.0)));
  const auto b = extent(scene::render_bev_mask(cfg(), vehicle(0.0, 0.0, std::numbers::pi / 2, 5.0, 2.0)));
  EXPECT_EQ(a.x1 - a.x0, b.y1 - b.y0);
  EXPECT_EQ(a.y1 - a.y0, b.x1 - b.x0);
}

TEST(RenderBevMask, CentroidAndAreaMatchAnalyticFootprint) {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto v = data::sample_vehicle(cfg(), rng);
    const auto m = scene::render_bev_mask(cfg(), v);
    EXPECT_TRUE(is_binary(m));
    const auto c = scene::mask_centroid(m);
    ASSERT_TRUE(c) << "pose " << i;
    worst = std::max(worst, (*c - bev_pixel(v.x, v.y)).norm());
    const double expect = v.length * v.width / std::pow(cfg().meters_per_bev_pixel, 2);
    if (expect >= 100.0) {
      EXPECT_NEAR(static_cast<double>(scene::mask_area(m)), expect, 0.1 * expect) << "pose " << i;
    }
  }
  EXPECT_LT(worst, 1.0);
}

TEST(RenderBevMask, OutOfFrameIsEmpty) {
  EXPECT_EQ(scene::mask_area(scene::render_bev_mask(cfg(), vehicle(40.0, 0.0, 0.0))), 0u);
}

TEST(BboxMask, ContainsSilhouetteAndIsRectangle) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 200; ++i) {
    const auto v = data::sample_vehicle(cfg(), rng);
    const auto sil = scene::project_vehicle(cfg(), v);
    const auto box = scene::bbox_mask_from_silhouette(sil.mask);
    EXPECT_TRUE(is_binary(box));
    EXPECT_TRUE(is_filled_rectangle(box));
    for (int y = 0; y < box.height(); ++y)
      for (int x = 0; x < box.width(); ++x)
        if (sil.mask.at(x, y) > 0.5f) {
          ASSERT_EQ(box.at(x, y), 1.0f) << "pose " << i;
        }
    // Extents match the silhouette exactly.
    if (sil.area > 0) {
      const auto a = extent(sil.mask), b = extent(box);
      EXPECT_EQ(a.x0, b.x0);
      EXPECT_EQ(a.x1, b.x1);
      EXPECT_EQ(a.y0, b.y0);
      EXPECT_EQ(a.y1, b.y1);
    }
  }
}

TEST(BboxMask, AreaRatioNearCentre) {
  for (double yaw : {0.0, std::numbers::pi / 4}) {
    for (double x : {-1.0, 0.0, 1.0}) {
      const auto v = vehicle(x, 0.5, yaw);
      const auto sil = scene::project_vehicle(cfg(), v);
      const auto box = scene::render_perspective_bbox_mask(cfg(), v);
      const double ratio = static_cast<double>(scene::mask_area(box)) / static_cast<double>(sil.area);
      EXPECT_GE(ratio, 1.0);
      EXPECT_LE(ratio, 4.0);
    }
  }
}

TEST(Dataset, SplitSizes) {
  const auto s = data::split_sizes(10);
  EXPECT_EQ(s[0], 7u);
  EXPECT_EQ(s[1], 1u);
  EXPECT_EQ(s[2], 2u);
  for (std::size_t n : {10u, 11u, 37u, 2000u, 2001u}) {
    const auto m = data::make_manifest(cfg(), n, 5);
    std::set<int> all;
    for (auto* ids : {&m.train, &m.val, &m.test}) all.insert(ids->begin(), ids->end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(m.count(), n);
    EXPECT_LE(std::abs(static_cast<double>(m.train.size()) - 0.7 * n), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(m.val.size()) - 0.1 * n), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(m.test.size()) - 0.2 * n), 1.0);
  }
  EXPECT_THROW(data::make_manifest(cfg(), 9, 1), std::invalid_argument);
}

TEST(Dataset, SamplesAreDeterministicAndConsistent) {
  for (int id = 0; id < 20; ++id) {
    const auto a = data::make_sample(cfg(), id, data::sample_seed(3, id));
    const auto b = data::make_sample(cfg(), id, data::sample_seed(3, id));
    EXPECT_EQ(a.perspective, b.perspective);
    EXPECT_EQ(a.op1, b.op1);
    EXPECT_EQ(a.op2, b.op2);
    EXPECT_TRUE(is_binary(a.op1));
    EXPECT_TRUE(is_binary(a.op2));
    EXPECT_TRUE(is_filled_rectangle(a.op1));
    EXPECT_GT(scene::mask_area(a.op2), 0u);
    EXPECT_LT((*scene::mask_centroid(a.op2) - a.bev_centroid).norm(), 1.0);
    EXPECT_TRUE(cfg().in_drivable_region(a.vehicle.x, a.vehicle.y));
  }
  EXPECT_NE(data::sample_seed(3, 1), data::sample_seed(4, 1));
}

TEST(Dataset, CoversDrivableRegion) {
  bool hit[10][10] = {};
  const double a = cfg().arm_length;
  for (int id = 0; id < 2000; ++id) {
    std::mt19937_64 rng(data::sample_seed(9, id));
    const auto v = data::sample_vehicle(cfg(), rng);
    const int cx = std::min(9, static_cast<int>((v.x + a) / (2 * a) * 10));
    const int cy = std::min(9, static_cast<int>((v.y + a) / (2 * a) * 10));
    hit[cx][cy] = true;
  }
  int cells = 0;
  for (auto& row : hit)
    for (bool h : row) cells += h;
  EXPECT_GE(cells, 90);
}

TEST(Dataset, GenerationIsByteIdentical) {
  const auto a = test::temp_dir("gen_a"), b = test::temp_dir("gen_b");
  const auto ma = data::generate_dataset(cfg(), 10, 42, a);
  data::generate_dataset(cfg(), 10, 42, b);
  EXPECT_EQ(io::read_file(a / "manifest"), io::read_file(b / "manifest"));
  EXPECT_EQ(io::read_file(a / "000003_op2.png"), io::read_file(b / "000003_op2.png"));
  EXPECT_EQ(ma.train.size(), 7u);
  const auto c = test::temp_dir("gen_c");
  data::generate_dataset(cfg(), 10, 43, c);
  EXPECT_NE(io::read_file(a / "manifest"), io::read_file(c / "manifest"));
}

TEST(Dataset, LoadRoundTrip) {
  const auto dir = test::temp_dir("roundtrip");
  const auto m = data::generate_dataset(cfg(), 12, 8, dir);
  const data::Dataset ds(dir);
  EXPECT_EQ(ds.manifest().test, m.test);
  EXPECT_EQ(ds.manifest().seed, 8u);
  for (int id : m.test) {
    const auto want = data::make_sample(cfg(), id, data::sample_seed(8, id));
    const auto got = ds.load(id);
    EXPECT_EQ(got.op1, want.op1);
    EXPECT_EQ(got.op2, want.op2);
    EXPECT_EQ(got.seed, want.seed);
    EXPECT_DOUBLE_EQ(got.vehicle.x, want.vehicle.x);
    EXPECT_DOUBLE_EQ(got.bev_centroid.y(), want.bev_centroid.y());
    ASSERT_TRUE(got.perspective.same_shape(want.perspective));
    for (std::size_t i = 0; i < got.perspective.data().size(); ++i)
      ASSERT_NEAR(got.perspective.data()[i], want.perspective.data()[i], 0.5 / 255.0 + 1e-6);
  }
  EXPECT_EQ(ds.load_split(data::Split::kVal).size(), m.val.size());
  EXPECT_THROW(data::Dataset(dir / "missing"), DataError);
}
