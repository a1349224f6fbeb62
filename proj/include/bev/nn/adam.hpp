#pragma once

#include <cmath>
#include <vector>

#include "bev/nn/layers.hpp"

namespace bev::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction; moment buffers follow the parameter list order.
template <typename T>
class Adam {
 public:
  Adam(ParamList<T>& params, AdamOptions opt = {}) : params_(&params), opt_(opt) {
    if (!(opt.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    for (const auto& p : params) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_->size(); ++k) {
      auto& p = (*params_)[k];
      auto& m = m_[k];
      auto& v = v_[k];
      T* value = p.value->data();
      const T* g = p.grad->data();
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double gi = g[i];
        m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi;
        v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi;
        const double update = opt_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.eps);
        value[i] = static_cast<T>(value[i] - update);
      }
    }
  }

  long steps() const { return t_; }

 private:
  ParamList<T>* params_;
  AdamOptions opt_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace bev::nn
