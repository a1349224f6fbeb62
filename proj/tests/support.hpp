#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "bev/geometry.hpp"
#include "bev/nn/tensor.hpp"
#include "bev/raster.hpp"

namespace test {

using bev::Mat3;
using bev::Vec2;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec2 random_point(std::mt19937_64& rng, double lo, double hi) {
  return Vec2(uniform(rng, lo, hi), uniform(rng, lo, hi));
}

/// Perturbed identity; on [-1, 1]^2 the denominator stays in [0.6, 1.4] and
/// the condition number stays far below 1e4.
inline Mat3 random_homography(std::mt19937_64& rng) {
  Mat3 m = Mat3::Identity();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) += uniform(rng, -0.3, 0.3);
  m(2, 0) = uniform(rng, -0.2, 0.2);
  m(2, 1) = uniform(rng, -0.2, 0.2);
  return m * uniform(rng, 0.5, 2.0);
}

/// Jittered square corners (plus uniform extras) mapped through h.
inline std::vector<bev::PointCorrespondence> correspondences_through(const Mat3& h, std::mt19937_64& rng, int n) {
  std::vector<bev::PointCorrespondence> out;
  const Vec2 corners[4] = {Vec2(-1, -1), Vec2(1, -1), Vec2(1, 1), Vec2(-1, 1)};
  for (int i = 0; i < n; ++i) {
    const Vec2 p = i < 4 ? Vec2(corners[i] + random_point(rng, -0.3, 0.3)) : random_point(rng, -1, 1);
    out.push_back({p, bev::apply_homography(h, p)});
  }
  return out;
}

inline bev::RasterImage random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  bev::RasterImage img(w, h, c);
  for (auto& v : img.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  return img;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bev_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <typename T>
bev::nn::Tensor<T> random_tensor(bev::nn::Shape s, bev::nn::Rng& rng, double scale = 1.0) {
  bev::nn::Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(scale * (2.0 * rng.uniform() - 1.0));
  return t;
}

struct GradCheck {
  double worst = 0.0;     // largest relative error over checked elements
  std::size_t kinks = 0;  // elements skipped because the loss is not differentiable there
  std::size_t checked = 0;
};

/// Compares an analytic gradient with central differences of `loss` for every
/// element of `x` (modified in place and restored). Elements where the forward
/// and backward one-sided slopes disagree sit on a kink (ReLU, max pool,
/// bilinear cell edge) and are skipped. Relative error uses
/// max(|a|, |n|, floor) as denominator.
inline GradCheck gradient_check(bev::nn::Tensor<double>& x, const bev::nn::Tensor<double>& analytic,
                                const std::function<double()>& loss, double eps = 1e-6, double floor = 1e-6) {
  GradCheck r;
  const double f0 = loss();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    x[i] = keep - eps;
    const double down = loss();
    x[i] = keep;
    const double fwd = (up - f0) / eps, bwd = (f0 - down) / eps;
    if (std::abs(fwd - bwd) > 1e-3 * std::max({std::abs(fwd), std::abs(bwd), floor}) + 1e-7) {
      ++r.kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    r.worst = std::max(r.worst, std::abs(numeric - analytic[i]) / denom);
    ++r.checked;
  }
  return r;
}

/// Sum of w * y, a generic scalar head for gradient checks.
inline double weighted_sum(const bev::nn::Tensor<double>& y, const bev::nn::Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace test
