// bevctl: dataset generation, training, evaluation, inference, the classical
// homography baseline and overlay rendering.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bev/bev.hpp"

namespace fs = std::filesystem;
using namespace bev;
using Json = nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

void require_dataset(const fs::path& p) {
  if (!fs::is_regular_file(p / "manifest")) throw DataError("no dataset manifest in " + p.string());
}

// Model or ground-truth stand-in loaded from a checkpoint file.
class LoadedPredictor {
 public:
  explicit LoadedPredictor(const fs::path& path) : ckpt_(nn::Checkpoint::load(path)) {
    if (ckpt_.meta.value("predictor", std::string()) == "oracle") {
      oracle_ = true;
      return;
    }
    model_.emplace(ckpt_.model_config());
    ckpt_.restore(*model_);
  }

  bool oracle() const { return oracle_; }
  const nn::BevNet<float>& model() const { return *model_; }

  eval::Predictor predictor() const {
    if (oracle_) return [](const data::SampleRecord& s) { return s.op2; };
    return [this](const data::SampleRecord& s) { return infer(s.perspective).op2; };
  }

  struct Masks {
    RasterImage op1, op2;
    bool has_op1 = false;
  };

  Masks infer(const RasterImage& image) const {
    if (oracle_) throw DataError("an oracle checkpoint cannot run on images without ground truth");
    const auto& cfg = model_->config();
    if (image.channels() != cfg.in_channels || image.width() != cfg.input_size || image.height() != cfg.input_size) {
      throw DataError("image must be " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size) +
                      " with " + std::to_string(cfg.in_channels) + " channels");
    }
    const auto out = model_->predict(train::image_tensor<float>(image));
    Masks m;
    m.op2 = baseline::binarize(train::read_mask(out.op2, 0));
    if (!out.op1.empty()) {
      m.op1 = baseline::binarize(train::read_mask(out.op1, 0));
      m.has_op1 = true;
    }
    return m;
  }

 private:
  nn::Checkpoint ckpt_;
  bool oracle_ = false;
  std::optional<nn::BevNet<float>> model_;
};

void write_report(const fs::path& out, const eval::MetricsReport& r) {
  io::write_atomic(out / "metrics.csv", r.to_csv());
  io::write_json(out / "summary.json", r.summary());
  io::write_atomic(out / "table.txt", eval::MetricsReport::table_header() + "\n" + r.table_row() + "\n");
  std::cout << eval::MetricsReport::table_header() << "\n" << r.table_row() << "\n";
  std::cout << "empty predictions: " << r.empty_predictions << " of " << r.samples.size() << "\n";
}

struct GenArgs {
  std::string config, out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

int run_gen(const GenArgs& a) {
  const scene::SceneConfig cfg =
      a.config.empty() ? scene::SceneConfig::standard() : scene::scene_from_json(io::read_json(a.config));
  const auto m = data::generate_dataset(cfg, a.count, a.seed, a.out);
  const std::string manifest = io::read_file(fs::path(a.out) / "manifest");
  std::cout << "samples " << m.count() << ": train " << m.train.size() << ", val " << m.val.size() << ", test "
            << m.test.size() << "\n";
  std::cout << "manifest fnv1a " << hex64(fnv1a(manifest)) << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, variant, out;
};

int run_train(const TrainArgs& a) {
  require_dataset(a.data);
  train::TrainConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    cfg = train::train_config_from_json(io::read_json(a.config));
  }
  cfg.data_root = a.data;
  if (!a.variant.empty()) cfg.model.variant = nn::variant_from_string(a.variant);
  cfg.validate();
  const fs::path out = a.out;
  const auto result = train::train<float>(cfg, [](const train::EpochLog& l) {
    std::printf("epoch %3d  train %.6f  val %.6f%s  (%.1f s)\n", l.epoch, l.train_loss, l.val_loss,
                l.improved ? "  *" : "", l.seconds);
    std::fflush(stdout);
  });
  result.best.save(out / "checkpoint.bin");
  io::write_atomic(out / "curve.csv", result.curve.to_csv());
  Json resolved = train::to_json(cfg);
  resolved.erase("data_root");
  io::write_json(out / "train_config.json", resolved);
  std::printf("best epoch %d, val loss %.6f\n", result.curve.best_epoch, result.best_val_loss);
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, out;
};

int run_eval(const EvalArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_dataset(a.data);
  const data::Dataset ds(a.data);
  const LoadedPredictor pred(a.checkpoint);
  const auto test = ds.load_split(data::Split::kTest);
  const std::string name = pred.oracle() ? "oracle" : nn::to_string(pred.model().config().variant);
  write_report(a.out, eval::evaluate_model(pred.predictor(), test,
                                           eval::PixelScale(ds.config().meters_per_bev_pixel), name));
  return 0;
}

struct InferArgs {
  std::string checkpoint, image, out;
};

int run_infer(const InferArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.image, "image");
  const LoadedPredictor pred(a.checkpoint);
  const auto masks = pred.infer(io::load_png(a.image));
  const fs::path out = a.out;
  io::save_png(out / "op2.png", masks.op2);
  if (masks.has_op1) io::save_png(out / "op1.png", masks.op1);
  std::cout << "wrote " << (out / "op2.png").string() << (masks.has_op1 ? " and op1.png" : "") << "\n";
  return 0;
}

struct BaselineArgs {
  std::string data, image, correspondences, out;
};

int run_baseline(const BaselineArgs& a) {
  const fs::path out = a.out;
  std::optional<std::vector<PointCorrespondence>> corr;
  if (!a.correspondences.empty()) {
    require_file(a.correspondences, "correspondence file");
    corr = io::parse_correspondences(io::read_file(a.correspondences));
  }
  if (!a.image.empty()) {
    require_file(a.image, "image");
    if (!corr) throw DataError("--image needs --correspondences");
    const RasterImage img = io::load_png(a.image);
    const Homography h = estimate_homography_dlt(*corr);
    io::save_png(out / "warped.png", baseline::warp_to_target(img, h, img.width(), img.height()));
    io::write_json(out / "homography.json", io::homography_to_json(h));
    std::cout << "wrote " << (out / "warped.png").string() << "\n";
    return 0;
  }
  require_dataset(a.data);
  const data::Dataset ds(a.data);
  const auto& cfg = ds.config();
  if (!corr) corr = baseline::reference_correspondences(cfg);
  const Homography h = estimate_homography_dlt(*corr);
  io::write_atomic(out / "correspondences.txt", io::format_correspondences(*corr));
  io::write_json(out / "homography.json", io::homography_to_json(h));
  const auto test = ds.load_split(data::Split::kTest);
  const int size = cfg.image_size;
  for (const auto& s : test) {
    io::save_png(out / (data::sample_name(s.id) + "_warped.png"), baseline::warp_to_target(s.perspective, h, size, size));
  }
  const eval::Predictor predict = [&](const data::SampleRecord& s) {
    return baseline::predict_mask(s.perspective, h, size, size);
  };
  const auto report = eval::evaluate_model(predict, test, eval::PixelScale(cfg.meters_per_bev_pixel), "homography");
  for (const auto& s : test) io::save_png(out / (data::sample_name(s.id) + "_mask.png"), predict(s));
  write_report(out, report);
  return 0;
}

struct OverlayArgs {
  std::string pred, gt, bev, out;
};

int run_overlay(const OverlayArgs& a) {
  require_file(a.pred, "prediction");
  require_file(a.gt, "ground truth");
  require_file(a.bev, "background");
  auto mask = [](const std::string& p) {
    RasterImage m = io::load_png(p);
    return baseline::binarize(m.channels() == 1 ? m : to_grayscale(m));
  };
  const RasterImage img = eval::render_overlay(mask(a.pred), mask(a.gt), io::load_png(a.bev));
  io::save_png(a.out, img);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  nn::flush_denormals();
  CLI::App app{"Perspective to bird's-eye-view vehicle mapping"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic intersection dataset");
  g->add_option("--config", gen.config, "Scene config (JSON); defaults to the standard scene")->check(CLI::ExistingFile);
  g->add_option("--count", gen.count, "Number of samples")->required()->check(CLI::Range(10, 10000000));
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "Training config (JSON)")->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--variant", tr.variant, "unet, unet-st or sdd-unet")
      ->check(CLI::IsMember({"unet", "unet-st", "sdd-unet"}));
  t->add_option("--out", tr.out, "Output directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Report directory")->required();

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Predict BEV masks for one perspective image");
  i->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  i->add_option("--image", in.image, "Perspective PNG")->required();
  i->add_option("--out", in.out, "Output directory")->required();

  BaselineArgs bl;
  auto* b = app.add_subcommand("baseline", "Classical homography warp");
  auto* bd = b->add_option("--data", bl.data, "Dataset directory (warps the test split)");
  auto* bi = b->add_option("--image", bl.image, "Single image to warp");
  bd->excludes(bi);
  b->add_option("--correspondences", bl.correspondences, "`sx sy tx ty` per line, source to target pixels");
  b->add_option("--out", bl.out, "Output directory")->required();

  OverlayArgs ov;
  auto* o = app.add_subcommand("overlay", "Render a prediction / ground truth overlay");
  o->add_option("--pred", ov.pred, "Predicted mask PNG")->required();
  o->add_option("--gt", ov.gt, "Ground-truth mask PNG")->required();
  o->add_option("--bev", ov.bev, "BEV background PNG")->required();
  o->add_option("--out", ov.out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return static_cast<int>(ExitCode::kUsage);
  }
  if (b->parsed() && bl.data.empty() && bl.image.empty()) {
    std::cerr << "baseline: one of --data or --image is required\n";
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (i->parsed()) return run_infer(in);
    if (b->parsed()) return run_baseline(bl);
    if (o->parsed()) return run_overlay(ov);
  } catch (const NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kNumeric);
  } catch (const DataError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const nlohmann::json::exception& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "invalid input: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
