#pragma once

#include "bev/nn/tensor.hpp"

namespace bev::nn {

inline constexpr double kDiceSmoothing = 1.0;

/// Soft confusion counts of a probability map against a binary target.
struct ConfusionSoft {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;

  /// (2 TP + eps) / (2 TP + FP + FN + eps).
  double dice(double eps = kDiceSmoothing) const { return (2.0 * tp + eps) / (2.0 * tp + fp + fn + eps); }
};

template <typename T>
ConfusionSoft soft_confusion(const T* pred, const T* target, std::size_t count) {
  ConfusionSoft c;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = pred[i], t = target[i];
    c.tp += p * t;
    c.fp += p * (1.0 - t);
    c.fn += (1.0 - p) * t;
  }
  return c;
}

template <typename T>
struct DiceLossResult {
  double loss = 0.0;  // -mean soft DSC over the batch, in [-1, 0]
  Tensor<T> grad;     // d loss / d pred
};

/// Negative soft DSC averaged over batch elements, with its gradient.
template <typename T>
DiceLossResult<T> dsc_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps = kDiceSmoothing) {
  pred.require_same_shape(target, "dsc_loss");
  DiceLossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const std::size_t per = pred.shape().sample();
  const double inv_n = 1.0 / pred.n();
  for (int b = 0; b < pred.n(); ++b) {
    const T* p = pred.sample(b);
    const T* t = target.sample(b);
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      inter += static_cast<double>(p[i]) * t[i];
      sp += p[i];
      st += t[i];
    }
    const double num = 2.0 * inter + eps;
    const double den = sp + st + eps;
    r.loss -= inv_n * num / den;
    // d(num/den)/dp_i = (2 t_i den - num) / den^2
    T* g = r.grad.sample(b);
    const double scale = -inv_n / (den * den);
    for (std::size_t i = 0; i < per; ++i) g[i] = static_cast<T>(scale * (2.0 * t[i] * den - num));
  }
  return r;
}

template <typename T>
double dsc_loss_value(const Tensor<T>& pred, const Tensor<T>& target, double eps = kDiceSmoothing) {
  pred.require_same_shape(target, "dsc_loss");
  double loss = 0.0;
  const std::size_t per = pred.shape().sample();
  for (int b = 0; b < pred.n(); ++b) {
    loss -= soft_confusion(pred.sample(b), target.sample(b), per).dice(eps);
  }
  return loss / pred.n();
}

}  // namespace bev::nn
