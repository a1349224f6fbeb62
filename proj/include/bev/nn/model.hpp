#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "bev/nn/layers.hpp"
#include "bev/nn/spatial_transformer.hpp"

namespace bev::nn {

enum class Variant { kUNet, kUNetSTSkip, kSDDUNet };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kUNet: return "unet";
    case Variant::kUNetSTSkip: return "unet-st";
    case Variant::kSDDUNet: return "sdd-unet";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "unet") return Variant::kUNet;
  if (s == "unet-st") return Variant::kUNetSTSkip;
  if (s == "sdd-unet") return Variant::kSDDUNet;
  throw std::invalid_argument("unknown model variant '" + s + "' (expected unet, unet-st or sdd-unet)");
}

struct ModelConfig {
  Variant variant = Variant::kSDDUNet;
  // Encoder width per depth; the last entry is the bottleneck.
  std::vector<int> widths = {16, 32, 64, 128, 256};
  int input_size = 128;
  int in_channels = 3;
  LocalizationConfig localization;

  static ModelConfig desk(Variant v, int input_size = 128) {
    ModelConfig c;
    c.variant = v;
    c.input_size = input_size;
    return c;
  }

  /// Classic 64..1024 widths.
  static ModelConfig classic(Variant v, int input_size = 128) {
    ModelConfig c = desk(v, input_size);
    c.widths = {64, 128, 256, 512, 1024};
    return c;
  }

  int depth() const { return static_cast<int>(widths.size()) - 1; }
  bool has_transformers() const { return variant != Variant::kUNet; }
  bool dual_decoder() const { return variant == Variant::kSDDUNet; }
  int skip_size(int d) const { return input_size >> d; }

  void validate() const {
    if (widths.size() < 2) throw std::invalid_argument("model needs at least one downsampling");
    for (std::size_t i = 1; i < widths.size(); ++i) {
      if (widths[i] != 2 * widths[i - 1]) {
        throw std::invalid_argument("encoder widths must double per depth so upsampling halves them");
      }
    }
    if (widths[0] < 1 || in_channels < 1) throw std::invalid_argument("widths and channels must be positive");
    if (input_size < 1 || input_size % (1 << depth()) != 0) {
      throw std::invalid_argument("input size must be divisible by 2^depth");
    }
    if (has_transformers() && skip_size(depth() - 1) < LocalizationConfig::kMinInput) {
      throw std::invalid_argument("deepest skip is smaller than the localization network minimum");
    }
    localization.validate();
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"widths", c.widths},
          {"input_size", c.input_size},
          {"in_channels", c.in_channels},
          {"localization",
           {{"conv1_channels", c.localization.conv1_channels},
            {"conv2_channels", c.localization.conv2_channels},
            {"hidden", c.localization.hidden}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_string(j.value("variant", std::string("sdd-unet")));
  if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<int>>();
  c.input_size = j.value("input_size", c.input_size);
  c.in_channels = j.value("in_channels", c.in_channels);
  if (j.contains("localization")) {
    const auto& l = j.at("localization");
    c.localization.conv1_channels = l.value("conv1_channels", c.localization.conv1_channels);
    c.localization.conv2_channels = l.value("conv2_channels", c.localization.conv2_channels);
    c.localization.hidden = l.value("hidden", c.localization.hidden);
  }
  c.validate();
  return c;
}

/// Head probabilities. op1 (perspective box mask) exists only for the dual
/// decoder; the single-head variants report their one output as op2.
template <typename T>
struct ModelOutput {
  Tensor<T> op1;
  Tensor<T> op2;
};

/// UNet, UNet with spatial transformers on its skips, or the dual-decoder
/// SDD-UNet whose second decoder concatenates spatially transformed
/// features of the first decoder.
template <typename T>
class BevNet {
 public:
  explicit BevNet(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int depth = cfg_.depth();
    const auto& w = cfg_.widths;
    int in = cfg_.in_channels;
    for (int d = 0; d <= depth; ++d) {
      enc_.emplace_back(in, w[d]);
      in = w[d];
    }
    pools_.resize(depth);
    for (int d = 0; d < depth; ++d) {
      up1_.push_back(ConvTranspose2x2<T>::halving(w[d + 1]));
      dec1_.emplace_back(2 * w[d], w[d]);
    }
    head1_ = Conv2d<T>(w[0], 1, 1);
    if (cfg_.has_transformers()) {
      for (int d = 0; d < depth; ++d) {
        st_.emplace_back(w[d], cfg_.skip_size(d), cfg_.skip_size(d), cfg_.localization);
      }
    }
    if (cfg_.dual_decoder()) {
      for (int d = 0; d < depth; ++d) {
        up2_.push_back(ConvTranspose2x2<T>::halving(w[d + 1]));
        dec2_.emplace_back(2 * w[d], w[d]);
      }
      head2_ = Conv2d<T>(w[0], 1, 1);
    }
    Rng rng(seed);
    for (auto& b : enc_) b.init(rng);
    for (int d = 0; d < depth; ++d) {
      up1_[d].init(rng);
      dec1_[d].init(rng);
    }
    head1_.init(rng);
    for (auto& s : st_) s.init(rng);
    for (int d = 0; d < static_cast<int>(up2_.size()); ++d) {
      up2_[d].init(rng);
      dec2_[d].init(rng);
    }
    if (cfg_.dual_decoder()) head2_.init(rng);
    collect_params();
  }

  BevNet(const BevNet&) = delete;
  BevNet& operator=(const BevNet&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// Training pass; caches what backward() needs.
  ModelOutput<T> forward(const Tensor<T>& x) { return run(*this, x); }

  /// Inference pass on frozen parameters.
  ModelOutput<T> predict(const Tensor<T>& x) const { return run(*this, x); }

  /// Accumulates parameter gradients. `d_op1` is ignored for single-head variants.
  void backward(const Tensor<T>& d_op1, const Tensor<T>& d_op2) {
    const int depth = cfg_.depth();
    const auto& w = cfg_.widths;
    std::vector<Tensor<T>> d_f1(depth);
    Tensor<T> d_bottleneck;

    if (cfg_.dual_decoder()) {
      Tensor<T> g = head2_.backward(sig2_.backward(d_op2));
      for (int d = 0; d < depth; ++d) {
        auto [gu, gs] = split_channels(dec2_[d].backward(g), w[d]);
        d_f1[d] = st_[d].backward(gs);
        g = up2_[d].backward(gu);
      }
      d_bottleneck = std::move(g);
    }

    Tensor<T> g = head1_.backward(sig1_.backward(cfg_.dual_decoder() ? d_op1 : d_op2));
    std::vector<Tensor<T>> d_skip(depth);
    for (int d = 0; d < depth; ++d) {
      if (!d_f1[d].empty()) g += d_f1[d];
      auto [gu, gs] = split_channels(dec1_[d].backward(g), w[d]);
      d_skip[d] = cfg_.variant == Variant::kUNetSTSkip ? st_[d].backward(gs) : std::move(gs);
      g = up1_[d].backward(gu);
    }
    if (!d_bottleneck.empty()) g += d_bottleneck;

    g = enc_[depth].backward(g);
    for (int d = depth - 1; d >= 0; --d) {
      g = pools_[d].backward(g);
      g += d_skip[d];
      g = enc_[d].backward(g);
    }
  }

  ParamList<T>& parameters() { return params_; }
  std::size_t parameter_count() const { return count_parameters(params_); }
  void zero_grad() { zero_grads(params_); }

  std::vector<SpatialTransformer<T>>& transformers() { return st_; }
  const std::vector<SpatialTransformer<T>>& transformers() const { return st_; }

  /// Total clamped near-horizon grid locations over all transformers in the last training pass.
  std::size_t clamped_grid_points() const {
    std::size_t n = 0;
    for (const auto& s : st_) n += s.clamped();
    return n;
  }

 private:
  template <typename Self>
  static ModelOutput<T> run(Self& self, const Tensor<T>& x) {
    constexpr bool kTrain = !std::is_const_v<Self>;
    auto call = [](auto& layer, const auto&... args) {
      if constexpr (kTrain) {
        return layer.forward(args...);
      } else {
        return layer.apply(args...);
      }
    };
    const ModelConfig& cfg = self.cfg_;
    const Shape expect{x.n(), cfg.in_channels, cfg.input_size, cfg.input_size};
    if (x.shape() != expect) throw ShapeError("model expects input " + expect.str() + ", got " + x.shape().str());
    const int depth = cfg.depth();

    std::vector<Tensor<T>> skips(depth);
    Tensor<T> h = x;
    for (int d = 0; d < depth; ++d) {
      skips[d] = call(self.enc_[d], h);
      h = call(self.pools_[d], skips[d]);
    }
    const Tensor<T> bottleneck = call(self.enc_[depth], h);

    std::vector<Tensor<T>> f1(depth);
    h = bottleneck;
    for (int d = depth - 1; d >= 0; --d) {
      const Tensor<T> u = call(self.up1_[d], h);
      const Tensor<T> s = cfg.variant == Variant::kUNetSTSkip ? call(self.st_[d], skips[d]) : skips[d];
      h = call(self.dec1_[d], concat_channels(u, s));
      if (cfg.dual_decoder()) f1[d] = h;
    }
    ModelOutput<T> out;
    Tensor<T> head = call(self.sig1_, call(self.head1_, h));
    if (!cfg.dual_decoder()) {
      out.op2 = std::move(head);
      return out;
    }
    out.op1 = std::move(head);

    h = bottleneck;
    for (int d = depth - 1; d >= 0; --d) {
      const Tensor<T> u = call(self.up2_[d], h);
      const Tensor<T> s = call(self.st_[d], f1[d]);
      h = call(self.dec2_[d], concat_channels(u, s));
    }
    out.op2 = call(self.sig2_, call(self.head2_, h));
    return out;
  }

  void collect_params() {
    params_.clear();
    for (std::size_t d = 0; d < enc_.size(); ++d) enc_[d].collect(params_, "enc" + std::to_string(d));
    for (std::size_t d = 0; d < up1_.size(); ++d) {
      up1_[d].collect(params_, "dec1.up" + std::to_string(d));
      dec1_[d].collect(params_, "dec1.block" + std::to_string(d));
    }
    head1_.collect(params_, "dec1.head");
    for (std::size_t d = 0; d < st_.size(); ++d) st_[d].collect(params_, "st" + std::to_string(d));
    for (std::size_t d = 0; d < up2_.size(); ++d) {
      up2_[d].collect(params_, "dec2.up" + std::to_string(d));
      dec2_[d].collect(params_, "dec2.block" + std::to_string(d));
    }
    if (cfg_.dual_decoder()) head2_.collect(params_, "dec2.head");
  }

  ModelConfig cfg_;
  std::vector<ConvBlock<T>> enc_;
  std::vector<MaxPool2<T>> pools_;
  std::vector<ConvTranspose2x2<T>> up1_, up2_;
  std::vector<ConvBlock<T>> dec1_, dec2_;
  std::vector<SpatialTransformer<T>> st_;
  Conv2d<T> head1_, head2_;
  Sigmoid<T> sig1_, sig2_;
  ParamList<T> params_;
};

}  // namespace bev::nn
