#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bev/io.hpp"
#include "bev/scene.hpp"

namespace bev::data {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using scene::SceneConfig;
using scene::VehicleState;

struct SampleRecord {
  RasterImage perspective;  // RGB pole camera frame
  RasterImage op1;          // perspective bounding-box mask
  RasterImage op2;          // BEV vehicle mask
  VehicleState vehicle;
  Vec2 bev_centroid = Vec2::Zero();
  int id = 0;
  std::uint64_t seed = 0;
};

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "'");
}

struct DatasetManifest {
  std::uint64_t seed = 0;
  SceneConfig config;
  std::vector<int> train, val, test;

  std::size_t count() const { return train.size() + val.size() + test.size(); }

  const std::vector<int>& ids(Split s) const {
    switch (s) {
      case Split::kTrain: return train;
      case Split::kVal: return val;
      case Split::kTest: return test;
    }
    return train;
  }
};

inline std::string sample_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", id);
  return buf;
}

inline constexpr int kManifestVersion = 1;

inline Json to_json(const DatasetManifest& m) {
  return Json{{"format", "bev-dataset"},
              {"version", kManifestVersion},
              {"seed", m.seed},
              {"count", m.count()},
              {"counts", {{"train", m.train.size()}, {"val", m.val.size()}, {"test", m.test.size()}}},
              {"config", scene::to_json(m.config)},
              {"splits", {{"train", m.train}, {"val", m.val}, {"test", m.test}}}};
}

inline DatasetManifest manifest_from_json(const Json& j) {
  try {
    if (j.at("version").get<int>() != kManifestVersion) throw DataError("unsupported manifest version");
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = scene::scene_from_json(j.at("config"));
    const auto& s = j.at("splits");
    m.train = s.at("train").get<std::vector<int>>();
    m.val = s.at("val").get<std::vector<int>>();
    m.test = s.at("test").get<std::vector<int>>();
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid manifest config: ") + e.what());
  }
}

/// 70:10:20 split sizes; test takes the rounding remainder.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  return {train, val, n - train - val};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits; std::uniform_real_distribution is implementation-defined.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace detail

inline constexpr int kMaxConsecutiveRejections = 1000;

/// Uniform pose over the drivable cross, uniform yaw and vehicle dimensions.
inline VehicleState sample_vehicle(const SceneConfig& cfg, std::mt19937_64& rng) {
  VehicleState v;
  do {
    v.x = detail::uniform(rng, -cfg.arm_length, cfg.arm_length);
    v.y = detail::uniform(rng, -cfg.arm_length, cfg.arm_length);
  } while (!cfg.in_drivable_region(v.x, v.y));
  v.yaw = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
  v.length = detail::uniform(rng, 3.5, 5.5);
  v.width = detail::uniform(rng, 1.6, 2.1);
  v.height = detail::uniform(rng, 1.4, 1.8);
  return v;
}

/// Renders one sample; `seed` fully determines it.
inline SampleRecord make_sample(const SceneConfig& cfg, int id, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
    const VehicleState v = sample_vehicle(cfg, rng);
    const scene::Silhouette sil = scene::project_vehicle(cfg, v);
    if (sil.area == 0) continue;
    RasterImage op2 = scene::render_bev_mask(cfg, v);
    const auto centroid = scene::mask_centroid(op2);
    if (!centroid) continue;
    SampleRecord r;
    r.perspective = scene::render_perspective(cfg, v).image;
    r.op1 = scene::bbox_mask_from_silhouette(sil.mask);
    r.op2 = std::move(op2);
    r.vehicle = v;
    r.bev_centroid = *centroid;
    r.id = id;
    r.seed = seed;
    return r;
  }
  throw NumericError("unsatisfiable visibility: " + std::to_string(kMaxConsecutiveRejections) +
                     " consecutive poses rejected");
}

inline std::uint64_t sample_seed(std::uint64_t dataset_seed, int id) {
  return detail::splitmix64(dataset_seed ^ detail::splitmix64(static_cast<std::uint64_t>(id)));
}

inline DatasetManifest make_manifest(const SceneConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("dataset needs at least 10 samples");
  DatasetManifest m;
  m.seed = seed;
  m.config = cfg;
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  // Fisher-Yates with our own draws so the order does not depend on the
  // standard library's shuffle.
  std::mt19937_64 rng(detail::splitmix64(seed ^ 0x5eedf00dull));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(ids[i], ids[j]);
  }
  const auto sizes = split_sizes(n);
  m.train.assign(ids.begin(), ids.begin() + sizes[0]);
  m.val.assign(ids.begin() + sizes[0], ids.begin() + sizes[0] + sizes[1]);
  m.test.assign(ids.begin() + sizes[0] + sizes[1], ids.end());
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.val.begin(), m.val.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

inline Json meta_to_json(const SampleRecord& r) {
  return Json{{"id", r.id},
              {"seed", r.seed},
              {"vehicle", scene::to_json(r.vehicle)},
              {"bev_centroid", {r.bev_centroid.x(), r.bev_centroid.y()}}};
}

inline void write_sample(const fs::path& root, const SampleRecord& r) {
  const std::string base = sample_name(r.id);
  io::save_png(root / (base + "_persp.png"), r.perspective);
  io::save_png(root / (base + "_op1.png"), r.op1);
  io::save_png(root / (base + "_op2.png"), r.op2);
  io::write_json(root / (base + "_meta"), meta_to_json(r));
}

/// Renders n samples, splits them 70:10:20 and persists everything under root.
inline DatasetManifest generate_dataset(const SceneConfig& cfg, std::size_t n, std::uint64_t seed,
                                        const fs::path& root) {
  cfg.validate();
  DatasetManifest m = make_manifest(cfg, n, seed);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create " + root.string() + ": " + ec.message());
  for (std::size_t i = 0; i < n; ++i) {
    const int id = static_cast<int>(i);
    write_sample(root, make_sample(cfg, id, sample_seed(seed, id)));
  }
  io::write_json(root / "manifest", to_json(m));
  return m;
}

/// Read access to a generated dataset directory.
class Dataset {
 public:
  explicit Dataset(fs::path root) : root_(std::move(root)) {
    if (!fs::exists(root_ / "manifest")) throw DataError("no manifest in " + root_.string());
    manifest_ = manifest_from_json(io::read_json(root_ / "manifest"));
  }

  const DatasetManifest& manifest() const { return manifest_; }
  const SceneConfig& config() const { return manifest_.config; }
  const fs::path& root() const { return root_; }

  SampleRecord load(int id) const {
    const std::string base = sample_name(id);
    SampleRecord r;
    r.id = id;
    r.perspective = io::load_png(root_ / (base + "_persp.png"));
    r.op1 = binarize(io::load_png(root_ / (base + "_op1.png")));
    r.op2 = binarize(io::load_png(root_ / (base + "_op2.png")));
    const Json meta = io::read_json(root_ / (base + "_meta"));
    try {
      r.seed = meta.at("seed").get<std::uint64_t>();
      r.vehicle = scene::vehicle_from_json(meta.at("vehicle"));
      const auto c = meta.at("bev_centroid");
      r.bev_centroid = Vec2(c.at(0).get<double>(), c.at(1).get<double>());
    } catch (const Json::exception& e) {
      throw DataError("malformed metadata for sample " + base + ": " + e.what());
    }
    if (r.perspective.channels() != 3) throw DataError("perspective image " + base + " is not RGB");
    return r;
  }

  std::vector<SampleRecord> load_split(Split s) const {
    std::vector<SampleRecord> out;
    for (int id : manifest_.ids(s)) out.push_back(load(id));
    return out;
  }

 private:
  static RasterImage binarize(RasterImage img) {
    if (img.channels() != 1) img = to_grayscale(img);
    for (float& v : img.data()) v = v > 0.5f ? 1.0f : 0.0f;
    return img;
  }

  fs::path root_;
  DatasetManifest manifest_;
};

}  // namespace bev::data
