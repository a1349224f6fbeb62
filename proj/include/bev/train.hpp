#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bev/dataset.hpp"
#include "bev/nn/adam.hpp"
#include "bev/nn/checkpoint.hpp"
#include "bev/nn/loss.hpp"
#include "bev/nn/model.hpp"

namespace bev::train {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 16;
  int max_epochs = 60;
  int patience = 10;
  // A validation loss counts as an improvement only if it is lower by more than this.
  double min_delta = 1e-5;
  std::uint64_t seed = 0;
  fs::path data_root;
  nn::ModelConfig model;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");
    if (!(min_delta >= 0.0)) throw std::invalid_argument("min_delta must be non-negative");
    model.validate();
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"lr", c.lr},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"min_delta", c.min_delta},
              {"seed", c.seed},
              {"data_root", c.data_root.string()},
              {"model", nn::to_json(c.model)}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.min_delta = j.value("min_delta", c.min_delta);
    c.seed = j.value("seed", c.seed);
    c.data_root = j.value("data_root", std::string());
    if (j.contains("model")) c.model = nn::model_config_from_json(j.at("model"));
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

struct LearningCurve {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based; 0 before any epoch completes

  int epochs() const { return static_cast<int>(val_loss.size()); }

  std::string to_csv() const {
    std::string out = "epoch,train_loss,val_loss\n";
    char buf[96];
    for (std::size_t i = 0; i < val_loss.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f\n", i + 1, train_loss[i], val_loss[i]);
      out += buf;
    }
    return out;
  }
};

/// Stops once `patience` consecutive epochs fail to improve on the best
/// validation loss by more than `min_delta`.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  }

  /// Records one epoch; returns true if it is the new best.
  bool update(double val_loss) {
    ++epoch_;
    if (val_loss < best_ - min_delta_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int epoch_ = 0;
  int stale_ = 0;
};

/// Inputs and targets of one split as dense tensors.
template <typename T>
struct SplitTensors {
  nn::Tensor<T> input;  // (N, 3, S, S)
  nn::Tensor<T> op1;    // (N, 1, S, S)
  nn::Tensor<T> op2;

  int size() const { return input.empty() ? 0 : input.n(); }
};

template <typename T>
void write_image(const RasterImage& img, nn::Tensor<T>& t, int n) {
  if (img.width() != t.w() || img.height() != t.h() || img.channels() != t.c()) {
    throw ShapeError("image does not fit tensor " + t.shape().str());
  }
  for (int c = 0; c < img.channels(); ++c) {
    T* dst = t.plane(n, c);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) dst[y * img.width() + x] = static_cast<T>(img.at(x, y, c));
  }
}

template <typename T>
RasterImage read_mask(const nn::Tensor<T>& t, int n) {
  RasterImage img(t.w(), t.h(), 1);
  const T* src = t.plane(n, 0);
  for (int y = 0; y < t.h(); ++y)
    for (int x = 0; x < t.w(); ++x) img.at(x, y) = static_cast<float>(src[y * t.w() + x]);
  return img;
}

template <typename T>
nn::Tensor<T> image_tensor(const RasterImage& img) {
  nn::Tensor<T> t(nn::Shape{1, img.channels(), img.height(), img.width()});
  write_image(img, t, 0);
  return t;
}

template <typename T>
SplitTensors<T> to_tensors(std::span<const data::SampleRecord> samples) {
  if (samples.empty()) throw DataError("split is empty");
  const auto& first = samples.front().perspective;
  const int n = static_cast<int>(samples.size());
  const int h = first.height(), w = first.width();
  SplitTensors<T> s{nn::Tensor<T>(nn::Shape{n, 3, h, w}), nn::Tensor<T>(nn::Shape{n, 1, h, w}),
                    nn::Tensor<T>(nn::Shape{n, 1, h, w})};
  for (int i = 0; i < n; ++i) {
    write_image(samples[i].perspective, s.input, i);
    write_image(samples[i].op1, s.op1, i);
    write_image(samples[i].op2, s.op2, i);
  }
  return s;
}

template <typename T>
nn::Tensor<T> gather(const nn::Tensor<T>& src, std::span<const int> rows) {
  nn::Shape s = src.shape();
  s.n = static_cast<int>(rows.size());
  nn::Tensor<T> out(s);
  const std::size_t per = s.sample();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(src.sample(rows[i]), src.sample(rows[i]) + per, out.sample(static_cast<int>(i)));
  }
  return out;
}

/// Negative DSC of one batch: single branch, or the op1 + op2 sum for the dual decoder.
template <typename T>
double batch_loss(const nn::ModelOutput<T>& out, const nn::Tensor<T>& op1, const nn::Tensor<T>& op2) {
  double loss = nn::dsc_loss_value(out.op2, op2);
  if (!out.op1.empty()) loss += nn::dsc_loss_value(out.op1, op1);
  return loss;
}

/// Mean loss over a split for any callable mapping an input batch to
/// ModelOutput; no parameters change.
template <typename T, typename Predict>
double evaluate_predictor(Predict&& predict, const SplitTensors<T>& split, int batch_size) {
  const int n = split.size();
  if (n == 0) throw DataError("cannot evaluate an empty split");
  double total = 0.0;
  std::vector<int> rows;
  for (int start = 0; start < n; start += batch_size) {
    rows.clear();
    for (int i = start; i < std::min(n, start + batch_size); ++i) rows.push_back(i);
    const nn::ModelOutput<T> out = predict(gather(split.input, rows));
    total += batch_loss(out, gather(split.op1, rows), gather(split.op2, rows)) * static_cast<double>(rows.size());
  }
  return total / n;
}

template <typename T>
double evaluate_epoch(const nn::BevNet<T>& model, const SplitTensors<T>& split, int batch_size = 16) {
  return evaluate_predictor<T>([&](const nn::Tensor<T>& x) { return model.predict(x); }, split, batch_size);
}

/// Deterministic per-epoch permutation source.
class Shuffler {
 public:
  explicit Shuffler(std::uint64_t seed) : rng_(data::detail::splitmix64(seed ^ 0x7a17ull)) {}

  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[static_cast<int>(rng_() % static_cast<std::uint64_t>(i + 1))]);
    return p;
  }

  std::string state() const {
    std::ostringstream s;
    s << rng_;
    return s.str();
  }

 private:
  std::mt19937_64 rng_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
  double seconds = 0.0;
};

struct TrainResult {
  LearningCurve curve;
  nn::Checkpoint best;
  double best_val_loss = 0.0;
};

/// Adam on negative DSC with early stopping; keeps the best-validation parameters.
template <typename T = float>
TrainResult train(const TrainConfig& cfg, const SplitTensors<T>& train_set, const SplitTensors<T>& val_set,
                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  nn::flush_denormals();
  if (train_set.size() == 0 || val_set.size() == 0) throw DataError("training and validation splits must be non-empty");
  nn::BevNet<T> model(cfg.model, cfg.seed);
  nn::Adam<T> opt(model.parameters(), nn::AdamOptions{cfg.lr});
  Shuffler shuffler(cfg.seed);
  EarlyStopping stopper(cfg.patience, cfg.min_delta);
  TrainResult result;
  const int n = train_set.size();
  Json config_meta = to_json(cfg);
  config_meta.erase("data_root");

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> order = shuffler.permutation(n);
    double total = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const std::span<const int> rows(order.data() + start, static_cast<std::size_t>(std::min(cfg.batch_size, n - start)));
      const nn::Tensor<T> op1 = gather(train_set.op1, rows);
      const nn::Tensor<T> op2 = gather(train_set.op2, rows);
      model.zero_grad();
      const nn::ModelOutput<T> out = model.forward(gather(train_set.input, rows));
      const auto l2 = nn::dsc_loss(out.op2, op2);
      double loss = l2.loss;
      nn::Tensor<T> d_op1;
      if (!out.op1.empty()) {
        auto l1 = nn::dsc_loss(out.op1, op1);
        loss += l1.loss;
        d_op1 = std::move(l1.grad);
      }
      if (!std::isfinite(loss)) throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      model.backward(d_op1, l2.grad);
      opt.step();
      total += loss * static_cast<double>(rows.size());
    }
    const double train_loss = total / n;
    const double val_loss = evaluate_epoch(model, val_set, cfg.batch_size);
    if (!std::isfinite(val_loss)) throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
    result.curve.train_loss.push_back(train_loss);
    result.curve.val_loss.push_back(val_loss);
    const bool improved = stopper.update(val_loss);
    if (improved) {
      result.best = nn::Checkpoint::capture(
          model, Json{{"epoch", epoch}, {"val_loss", val_loss}, {"shuffle_rng", shuffler.state()},
                      {"adam_steps", opt.steps()}, {"train_config", config_meta}});
      result.best_val_loss = val_loss;
    }
    result.curve.best_epoch = stopper.best_epoch();
    if (on_epoch) {
      on_epoch({epoch, train_loss, val_loss, improved,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }
    if (stopper.should_stop()) break;
  }
  return result;
}

/// Loads splits from cfg.data_root and trains.
template <typename T = float>
TrainResult train(const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  const data::Dataset ds(cfg.data_root);
  if (ds.config().image_size != cfg.model.input_size) {
    throw DataError("dataset image size " + std::to_string(ds.config().image_size) + " differs from model input size " +
                    std::to_string(cfg.model.input_size));
  }
  const auto train_samples = ds.load_split(data::Split::kTrain);
  const auto val_samples = ds.load_split(data::Split::kVal);
  return train<T>(cfg, to_tensors<T>(train_samples), to_tensors<T>(val_samples), on_epoch);
}

}  // namespace bev::train
