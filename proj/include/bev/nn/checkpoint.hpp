#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bev/io.hpp"
#include "bev/nn/model.hpp"

namespace bev::nn {

// Layout, all integers little-endian u32:
//   "BEVCKPT1" | version | meta length | meta (JSON text) | tensor count |
//   per tensor: name length | name | rank (4) | n c h w | float32 values
inline constexpr std::string_view kCheckpointMagic = "BEVCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const CheckpointTensor&, const CheckpointTensor&) = default;
};

class Checkpoint {
 public:
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  template <typename T>
  static Checkpoint capture(BevNet<T>& model, nlohmann::json extra = nlohmann::json::object()) {
    Checkpoint c;
    c.meta = std::move(extra);
    c.meta["model"] = to_json(model.config());
    for (const auto& p : model.parameters()) {
      CheckpointTensor t{p.name, p.value->shape(), {}};
      t.values.reserve(p.value->size());
      for (T v : p.value->values()) t.values.push_back(static_cast<float>(v));
      c.tensors.push_back(std::move(t));
    }
    return c;
  }

  ModelConfig model_config() const {
    if (!meta.contains("model")) throw DataError("checkpoint has no model configuration");
    try {
      return model_config_from_json(meta.at("model"));
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("checkpoint model configuration: ") + e.what());
    }
  }

  /// Copies stored values into a model whose parameters match by name and shape.
  template <typename T>
  void restore(BevNet<T>& model) const {
    auto& params = model.parameters();
    if (params.size() != tensors.size()) throw DataError("checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      auto& p = params[i];
      if (t.name != p.name || t.shape != p.value->shape()) {
        throw DataError("checkpoint tensor " + t.name + " " + t.shape.str() + " does not match " + p.name + " " +
                        p.value->shape().str());
      }
      for (std::size_t k = 0; k < t.values.size(); ++k) (*p.value)[k] = static_cast<T>(t.values[k]);
    }
  }

  std::string serialize() const {
    std::string out(kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    const std::string m = meta.dump();
    put_u32(out, static_cast<std::uint32_t>(m.size()));
    out += m;
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      put_u32(out, static_cast<std::uint32_t>(t.name.size()));
      out += t.name;
      put_u32(out, 4);
      for (int d : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) put_u32(out, static_cast<std::uint32_t>(d));
      for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
  }

  static Checkpoint parse(std::string_view bytes) {
    Reader r{bytes};
    if (r.take(kCheckpointMagic.size()) != kCheckpointMagic) throw DataError("not a checkpoint file");
    if (r.u32() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    Checkpoint c;
    try {
      c.meta = nlohmann::json::parse(r.take(r.u32()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("checkpoint metadata: ") + e.what());
    }
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      CheckpointTensor t;
      t.name = std::string(r.take(r.u32()));
      if (r.u32() != 4) throw DataError("checkpoint tensors must be rank 4");
      t.shape = {static_cast<int>(r.u32()), static_cast<int>(r.u32()), static_cast<int>(r.u32()),
                 static_cast<int>(r.u32())};
      if (!t.shape.valid()) throw DataError("checkpoint tensor " + t.name + " has an invalid shape");
      t.values.resize(t.shape.size());
      for (auto& v : t.values) v = std::bit_cast<float>(r.u32());
      c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw DataError("trailing bytes after checkpoint payload");
    return c;
  }

  void save(const std::filesystem::path& path) const { io::write_atomic(path, serialize()); }
  static Checkpoint load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

 private:
  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }

  struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    std::string_view take(std::size_t n) {
      if (n > data.size() - pos) throw DataError("truncated checkpoint");
      auto s = data.substr(pos, n);
      pos += n;
      return s;
    }
    std::uint32_t u32() {
      const auto s = take(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
      return v;
    }
    bool done() const { return pos == data.size(); }
  };
};

}  // namespace bev::nn
