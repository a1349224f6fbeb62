#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bev/dataset.hpp"
#include "bev/raster.hpp"
#include "bev/scene.hpp"

namespace bev::eval {

using Json = nlohmann::json;

inline constexpr float kBinarizeThreshold = 0.5f;

/// Ground sample distance used to turn pixel distances into meters.
struct PixelScale {
  double meters_per_pixel = 2.86 / 34.23;

  explicit PixelScale(double mpp = 2.86 / 34.23) : meters_per_pixel(mpp) {
    if (!(mpp > 0.0)) throw std::invalid_argument("meters per pixel must be positive");
  }

  double to_meters(double px) const { return px * meters_per_pixel; }
};

namespace detail {

inline void require_same_size(const RasterImage& a, const RasterImage& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != 1 || b.channels() != 1) {
    throw ShapeError(std::string(what) + ": masks must be single-channel and equally sized");
  }
}

}  // namespace detail

/// 2TP / (2TP + FP + FN) after binarizing at 0.5; two empty masks score 1.
inline double hard_dsc(const RasterImage& pred, const RasterImage& gt) {
  detail::require_same_size(pred, gt, "hard_dsc");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const bool p = pred.data()[i] > kBinarizeThreshold;
    const bool g = gt.data()[i] > kBinarizeThreshold;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  const std::size_t den = 2 * tp + fp + fn;
  return den == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

/// Mean absolute per-pixel difference.
inline double mae(const RasterImage& pred, const RasterImage& gt) {
  detail::require_same_size(pred, gt, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) s += std::abs(pred.data()[i] - gt.data()[i]);
  return s / static_cast<double>(pred.data().size());
}

struct CentroidDistance {
  double px = 0.0;
  double m = 0.0;
  bool pred_empty = false;
};

/// Distance between foreground centroids. An empty prediction scores the
/// image diagonal and is flagged.
inline CentroidDistance centroid_distance(const RasterImage& pred, const RasterImage& gt, const PixelScale& scale) {
  detail::require_same_size(pred, gt, "centroid_distance");
  const auto cg = scene::mask_centroid(gt);
  if (!cg) throw DataError("centroid distance needs a non-empty ground-truth mask");
  const auto cp = scene::mask_centroid(pred);
  CentroidDistance d;
  if (!cp) {
    d.pred_empty = true;
    d.px = std::hypot(static_cast<double>(gt.width()), static_cast<double>(gt.height()));
  } else {
    d.px = (*cp - *cg).norm();
  }
  d.m = scale.to_meters(d.px);
  return d;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population mean and standard deviation.
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size()));
  return r;
}

struct SampleMetrics {
  int id = 0;
  double dsc = 0.0;
  double mae = 0.0;
  double centroid_px = 0.0;
  double centroid_m = 0.0;
  bool pred_empty = false;
};

struct MetricsReport {
  std::string model;
  std::vector<SampleMetrics> samples;
  MeanStd dsc, mae, centroid_px, centroid_m;
  std::size_t empty_predictions = 0;
  double meters_per_pixel = 0.0;

  void aggregate() {
    std::vector<double> d, a, cp, cm;
    empty_predictions = 0;
    for (const auto& s : samples) {
      d.push_back(s.dsc);
      a.push_back(s.mae);
      cp.push_back(s.centroid_px);
      cm.push_back(s.centroid_m);
      empty_predictions += s.pred_empty;
    }
    dsc = mean_std(d);
    mae = mean_std(a);
    centroid_px = mean_std(cp);
    centroid_m = mean_std(cm);
  }

  std::string to_csv() const {
    std::string out = "id,dsc,mae,centroid_px,centroid_m,pred_empty\n";
    char buf[160];
    for (const auto& s : samples) {
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.4f,%.4f,%d\n", s.id, s.dsc, s.mae, s.centroid_px, s.centroid_m,
                    s.pred_empty ? 1 : 0);
      out += buf;
    }
    return out;
  }

  Json summary() const {
    auto ms = [](const MeanStd& v) { return Json{{"mean", v.mean}, {"std", v.std}}; };
    return Json{{"model", model},
                {"count", samples.size()},
                {"dsc", ms(dsc)},
                {"mae", ms(mae)},
                {"centroid_px", ms(centroid_px)},
                {"centroid_m", ms(centroid_m)},
                {"empty_predictions", empty_predictions},
                {"meters_per_pixel", meters_per_pixel}};
  }

  /// One row in the layout of the comparison table.
  std::string table_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s | %.3f±%.3f | %.3f±%.3f | %.2f±%.2f | %.2f", model.c_str(), dsc.mean, dsc.std,
                  mae.mean, mae.std, centroid_px.mean, centroid_px.std, centroid_m.mean);
    return buf;
  }

  static std::string table_header() { return "Model      | DSC         | MAE         | Centroid (px) | Centroid (m)"; }
};

/// Maps a sample to a BEV probability mask.
using Predictor = std::function<RasterImage(const data::SampleRecord&)>;

inline SampleMetrics score_sample(const data::SampleRecord& s, const RasterImage& pred, const PixelScale& scale) {
  const auto cd = centroid_distance(pred, s.op2, scale);
  return {s.id, hard_dsc(pred, s.op2), mae(pred, s.op2), cd.px, cd.m, cd.pred_empty};
}

inline MetricsReport evaluate_model(const Predictor& predict, std::span<const data::SampleRecord> samples,
                                    const PixelScale& scale, std::string name = "model") {
  if (samples.empty()) throw DataError("cannot evaluate an empty split");
  MetricsReport r;
  r.model = std::move(name);
  r.meters_per_pixel = scale.meters_per_pixel;
  for (const auto& s : samples) r.samples.push_back(score_sample(s, predict(s), scale));
  r.aggregate();
  return r;
}

namespace detail {

inline void draw_ring(RasterImage& img, const Vec2& c, double radius, const float rgb[3]) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double d = std::hypot(x - c.x(), y - c.y());
      if (std::abs(d - radius) <= 0.5) {
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = rgb[ch];
      }
    }
  }
}

}  // namespace detail

inline constexpr double kOverlayRingRadius = 3.0;

/// Ground truth only: white; prediction only: black; overlap: gray. Red ring
/// at the ground-truth centroid, blue ring at the predicted one.
inline RasterImage render_overlay(const RasterImage& pred, const RasterImage& gt, const RasterImage& background) {
  detail::require_same_size(pred, gt, "render_overlay");
  if (background.width() != gt.width() || background.height() != gt.height()) {
    throw ShapeError("render_overlay: background size differs from masks");
  }
  RasterImage out(gt.width(), gt.height(), 3);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      const bool p = pred.at(x, y) > kBinarizeThreshold;
      const bool g = gt.at(x, y) > kBinarizeThreshold;
      for (int ch = 0; ch < 3; ++ch) {
        float v = background.at(x, y, background.channels() == 3 ? ch : 0);
        if (p && g) v = 0.5f;
        else if (g) v = 1.0f;
        else if (p) v = 0.0f;
        out.at(x, y, ch) = v;
      }
    }
  }
  const float red[3] = {1.0f, 0.0f, 0.0f};
  const float blue[3] = {0.0f, 0.0f, 1.0f};
  if (const auto c = scene::mask_centroid(gt)) detail::draw_ring(out, *c, kOverlayRingRadius, red);
  if (const auto c = scene::mask_centroid(pred)) detail::draw_ring(out, *c, kOverlayRingRadius, blue);
  return out;
}

}  // namespace bev::eval
