#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bev/baseline.hpp"
#include "bev/dataset.hpp"
#include "bev/metrics.hpp"
#include "support.hpp"

using namespace bev;

namespace {

RasterImage mask(int w, int h, std::initializer_list<std::pair<int, int>> on) {
  RasterImage m(w, h, 1);
  for (auto [x, y] : on) m.at(x, y) = 1.0f;
  return m;
}

RasterImage block(int w, int h, int x0, int y0, int bw, int bh) {
  RasterImage m(w, h, 1);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m.at(x, y) = 1.0f;
  return m;
}

data::SampleRecord record(int id, RasterImage op2) {
  data::SampleRecord r;
  r.id = id;
  r.op2 = std::move(op2);
  r.op1 = RasterImage(r.op2.width(), r.op2.height(), 1);
  r.perspective = RasterImage(r.op2.width(), r.op2.height(), 3);
  return r;
}

}  // namespace

TEST(HardDsc, HandCountedExamples) {
  const auto a = mask(4, 4, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  const auto b = mask(4, 4, {{1, 0}, {1, 1}, {2, 0}, {2, 1}});  // overlap of 2
  EXPECT_EQ(eval::hard_dsc(a, b), 0.5);
  EXPECT_EQ(eval::hard_dsc(a, a), 1.0);
  EXPECT_EQ(eval::hard_dsc(a, mask(4, 4, {{3, 3}, {2, 3}, {3, 2}, {2, 2}})), 0.0);
  EXPECT_EQ(eval::hard_dsc(RasterImage(4, 4, 1), RasterImage(4, 4, 1)), 1.0);
  EXPECT_THROW(eval::hard_dsc(a, RasterImage(4, 5, 1)), ShapeError);
  EXPECT_THROW(eval::hard_dsc(a, RasterImage(4, 4, 3)), ShapeError);
}

TEST(HardDsc, SymmetricAndOneOnlyWhenIdentical) {
  for (int seed = 0; seed < 50; ++seed) {
    auto p = test::random_image(8, 8, 1, seed), g = test::random_image(8, 8, 1, seed + 1000);
    p = baseline::binarize(p);
    g = baseline::binarize(g);
    const double d = eval::hard_dsc(p, g);
    EXPECT_EQ(d, eval::hard_dsc(g, p));
    EXPECT_EQ(d == 1.0, p == g);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Mae, Examples) {
  const auto a = block(6, 5, 1, 1, 3, 2);
  EXPECT_EQ(eval::mae(a, a), 0.0);
  RasterImage inv = a;
  for (auto& v : inv.data()) v = 1.0f - v;
  EXPECT_EQ(eval::mae(inv, a), 1.0);
  RasterImage q(6, 5, 1);
  for (auto& v : q.data()) v = 0.25f;
  EXPECT_EQ(eval::mae(q, RasterImage(6, 5, 1)), 0.25);
  for (int seed = 0; seed < 20; ++seed) {
    const auto p = test::random_image(7, 6, 1, seed), g = test::random_image(7, 6, 1, seed + 99);
    EXPECT_EQ(eval::mae(p, g), eval::mae(g, p));
    EXPECT_LE(eval::mae(p, g), 1.0);
  }
}

TEST(Centroid, ThreeFourFive) {
  const auto g = block(32, 32, 4, 5, 3, 2);
  const auto p = block(32, 32, 7, 9, 3, 2);
  const eval::PixelScale scale;
  const auto d = eval::centroid_distance(p, g, scale);
  EXPECT_EQ(d.px, 5.0);
  EXPECT_DOUBLE_EQ(d.m, 5.0 * 2.86 / 34.23);
  EXPECT_NEAR(d.m, 0.4178, 5e-5);
  EXPECT_FALSE(d.pred_empty);
  EXPECT_EQ(eval::centroid_distance(g, g, scale).px, 0.0);
}

TEST(Centroid, PixelToMeterConversion) {
  const eval::PixelScale scale;
  EXPECT_NEAR(scale.to_meters(34.23), 2.86, 1e-12);
  EXPECT_NEAR(scale.meters_per_pixel, 0.08355, 5e-6);
  EXPECT_THROW(eval::PixelScale(0.0), std::invalid_argument);
}

TEST(Centroid, EmptyCases) {
  const auto g = block(30, 40, 2, 2, 2, 2);
  const auto d = eval::centroid_distance(RasterImage(30, 40, 1), g, eval::PixelScale(0.25));
  EXPECT_TRUE(d.pred_empty);
  EXPECT_DOUBLE_EQ(d.px, 50.0);
  EXPECT_DOUBLE_EQ(d.m, 12.5);
  EXPECT_THROW(eval::centroid_distance(g, RasterImage(30, 40, 1), eval::PixelScale()), DataError);
}

TEST(Centroid, TranslationInvariant) {
  const auto g = mask(20, 20, {{3, 3}, {4, 3}, {5, 6}});
  const auto p = mask(20, 20, {{8, 2}, {9, 9}});
  const auto gs = mask(20, 20, {{3 + 6, 3 + 5}, {4 + 6, 3 + 5}, {5 + 6, 6 + 5}});
  const auto ps = mask(20, 20, {{8 + 6, 2 + 5}, {9 + 6, 9 + 5}});
  const eval::PixelScale s;
  EXPECT_NEAR(eval::centroid_distance(p, g, s).px, eval::centroid_distance(ps, gs, s).px, 1e-12);
}

TEST(MeanStd, Population) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto r = eval::mean_std(v);
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_DOUBLE_EQ(r.std, std::sqrt(1.25));
}

TEST(EvaluateModel, OracleIsPerfect) {
  std::vector<data::SampleRecord> s;
  for (int i = 0; i < 4; ++i) s.push_back(record(i, block(16, 16, i, 2, 3, 4)));
  const auto r = eval::evaluate_model([](const data::SampleRecord& x) { return x.op2; }, s, eval::PixelScale(), "oracle");
  EXPECT_EQ(r.dsc.mean, 1.0);
  EXPECT_EQ(r.dsc.std, 0.0);
  EXPECT_EQ(r.mae.mean, 0.0);
  EXPECT_EQ(r.centroid_px.mean, 0.0);
  EXPECT_EQ(r.centroid_px.std, 0.0);
  EXPECT_EQ(r.empty_predictions, 0u);
  EXPECT_THROW(eval::evaluate_model([](const data::SampleRecord& x) { return x.op2; }, {}, eval::PixelScale(), "x"),
               DataError);
}

TEST(EvaluateModel, AllZeroPredictor) {
  std::vector<data::SampleRecord> s;
  for (int i = 0; i < 3; ++i) s.push_back(record(i, block(16, 16, 2, 2, 2 + i, 2)));
  const auto r = eval::evaluate_model([](const data::SampleRecord& x) { return RasterImage(x.op2.width(), x.op2.height(), 1); },
                                      s, eval::PixelScale(), "zero");
  EXPECT_EQ(r.dsc.mean, 0.0);
  EXPECT_EQ(r.empty_predictions, 3u);
  EXPECT_DOUBLE_EQ(r.centroid_px.mean, std::hypot(16.0, 16.0));
}

TEST(EvaluateModel, MatchesHandAggregation) {
  std::vector<data::SampleRecord> s = {record(0, block(10, 10, 0, 0, 4, 1)), record(1, block(10, 10, 2, 2, 2, 2)),
                                       record(2, block(10, 10, 5, 5, 3, 3))};
  // Predictions shifted right by one pixel: DSC, MAE and centroid by hand.
  auto shifted = [](const data::SampleRecord& x) {
    RasterImage p(x.op2.width(), x.op2.height(), 1);
    for (int y = 0; y < p.height(); ++y)
      for (int xx = 1; xx < p.width(); ++xx) p.at(xx, y) = x.op2.at(xx - 1, y);
    return p;
  };
  const auto r = eval::evaluate_model(shifted, s, eval::PixelScale(0.5), "shift");
  // 4x1: TP 3, FP 1, FN 1 -> 0.75; 2x2: TP 2 -> 0.5; 3x3: TP 6 -> 6/9.
  const double d[3] = {0.75, 0.5, 6.0 / 9.0};
  const double m[3] = {2.0 / 100, 4.0 / 100, 6.0 / 100};
  const double dm = (d[0] + d[1] + d[2]) / 3, mm = (m[0] + m[1] + m[2]) / 3;
  double dv = 0, mv = 0;
  for (int i = 0; i < 3; ++i) {
    dv += (d[i] - dm) * (d[i] - dm) / 3;
    mv += (m[i] - mm) * (m[i] - mm) / 3;
    EXPECT_DOUBLE_EQ(r.samples[i].dsc, d[i]);
    EXPECT_NEAR(r.samples[i].mae, m[i], 1e-15);
    EXPECT_DOUBLE_EQ(r.samples[i].centroid_px, 1.0);
    EXPECT_DOUBLE_EQ(r.samples[i].centroid_m, 0.5);
  }
  EXPECT_NEAR(r.dsc.mean, dm, 1e-15);
  EXPECT_NEAR(r.dsc.std, std::sqrt(dv), 1e-15);
  EXPECT_NEAR(r.mae.mean, mm, 1e-15);
  EXPECT_NEAR(r.mae.std, std::sqrt(mv), 1e-15);
  EXPECT_DOUBLE_EQ(r.centroid_m.mean, 0.5);
}

TEST(Report, Formats) {
  std::vector<data::SampleRecord> s = {record(7, block(8, 8, 1, 1, 2, 2))};
  const auto r = eval::evaluate_model([](const data::SampleRecord& x) { return x.op2; }, s, eval::PixelScale(), "unet");
  EXPECT_EQ(r.to_csv(), "id,dsc,mae,centroid_px,centroid_m,pred_empty\n7,1.000000,0.000000,0.0000,0.0000,0\n");
  EXPECT_EQ(r.summary()["count"], 1);
  EXPECT_EQ(r.summary()["dsc"]["mean"], 1.0);
  EXPECT_EQ(r.table_row(), "unet       | 1.000±0.000 | 0.000±0.000 | 0.00±0.00 | 0.00");
}

TEST(Overlay, IdenticalMasksAreGrayWithBothRings) {
  const auto g = block(21, 21, 8, 8, 5, 5);
  const auto o = eval::render_overlay(g, g, RasterImage(21, 21, 1));
  EXPECT_EQ(o.channels(), 3);
  // Centre pixel of the vehicle is gray; a pixel on the ring (radius 3 from 10,10) is blue, drawn last.
  for (int c = 0; c < 3; ++c) EXPECT_EQ(o.at(10, 10, c), 0.5f);
  EXPECT_EQ(o.at(13, 10, 0), 0.0f);
  EXPECT_EQ(o.at(13, 10, 2), 1.0f);
  EXPECT_EQ(o.at(0, 0, 0), 0.0f);
}

TEST(Overlay, EmptyPredictionAndDisjoint) {
  const auto g = block(21, 21, 2, 2, 5, 5);
  RasterImage bg(21, 21, 3);
  for (auto& v : bg.data()) v = 0.2f;
  const auto o = eval::render_overlay(RasterImage(21, 21, 1), g, bg);
  EXPECT_EQ(o.at(4, 4, 1), 1.0f);          // white vehicle centre
  EXPECT_EQ(o.at(7, 4, 0), 1.0f);          // red ring
  EXPECT_EQ(o.at(7, 4, 1), 0.0f);
  EXPECT_EQ(o.at(18, 18, 0), 0.2f);        // background
  const auto p = block(21, 21, 14, 14, 5, 5);
  const auto d = eval::render_overlay(p, g, bg);
  EXPECT_EQ(d.at(16, 16, 1), 0.0f);        // black prediction centre
  EXPECT_EQ(d.at(19, 16, 2), 1.0f);        // blue ring
  EXPECT_EQ(d.at(4, 4, 1), 1.0f);
  EXPECT_THROW(eval::render_overlay(p, g, RasterImage(20, 21, 3)), ShapeError);
}

TEST(Baseline, IdentityWarpKeepsImage) {
  const auto img = test::random_image(12, 9, 3, 4);
  EXPECT_EQ(baseline::warp_to_target(img, Homography(Mat3::Identity()), 12, 9), img);
}

TEST(Baseline, ReferenceCorrespondencesGiveAnalyticHomography) {
  const auto cfg = scene::SceneConfig::standard();
  const auto h = estimate_homography_dlt(baseline::reference_correspondences(cfg));
  const Mat3 want = cfg.ground_to_bev().matrix() * cfg.ground_to_pole().inverse().matrix();
  const Mat3 a = h.matrix() / h.matrix()(2, 2), b = want / want(2, 2);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6 * b.cwiseAbs().maxCoeff());
}

TEST(Baseline, ColourMaskFindsVehiclePaint) {
  const auto cfg = scene::SceneConfig::standard();
  scene::VehicleState v;
  const auto persp = scene::render_perspective(cfg, v).image;
  const auto m = baseline::vehicle_color_mask(persp);
  const auto sil = scene::project_vehicle(cfg, v);
  EXPECT_GT(eval::hard_dsc(m, sil.mask), 0.9);
  EXPECT_EQ(scene::mask_area(baseline::vehicle_color_mask(scene::render_background(cfg))), 0u);
}

TEST(Baseline, FarFieldWarpIsElongated) {
  const auto cfg = scene::SceneConfig::standard();
  const auto h = estimate_homography_dlt(baseline::reference_correspondences(cfg));
  scene::VehicleState v;
  v.x = 0.0;
  v.y = 9.0;  // far side of the junction as seen from the pole
  v.yaw = 0.0;
  const auto warped = baseline::predict_mask(scene::render_perspective(cfg, v).image, h, cfg.image_size, cfg.image_size);
  EXPECT_GT(baseline::aspect_ratio_error(warped, scene::render_bev_mask(cfg, v)), 0.2);
}

TEST(Baseline, AspectRatioError) {
  const auto truth = block(20, 20, 0, 0, 8, 4);
  EXPECT_EQ(baseline::aspect_ratio_error(truth, truth), 0.0);
  EXPECT_DOUBLE_EQ(baseline::aspect_ratio_error(block(20, 20, 0, 0, 8, 8), truth), 0.5);
  EXPECT_EQ(baseline::aspect_ratio_error(RasterImage(20, 20, 1), truth), 1.0);
  EXPECT_THROW(baseline::aspect_ratio_error(truth, RasterImage(20, 20, 1)), DataError);
}
