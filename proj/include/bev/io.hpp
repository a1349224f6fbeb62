#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <png.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "bev/errors.hpp"
#include "bev/geometry.hpp"
#include "bev/raster.hpp"

namespace bev::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
inline void write_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw DataError("malformed structured text in " + path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) { write_atomic(path, j.dump(2) + "\n"); }

inline std::uint8_t to_byte(float v) {
  const float r = std::nearbyint(v * 255.0f);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0f, 255.0f));
}

/// 8-bit grayscale or RGB PNG; byte v becomes v / 255. Alpha is dropped.
inline RasterImage load_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  RasterImage out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

inline std::string encode_png(const RasterImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(image.data()[i]);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encoding failed: ") + img.message);
  }
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&img, bytes.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encoding failed: ") + img.message);
  }
  bytes.resize(size);
  return bytes;
}

inline void save_png(const fs::path& path, const RasterImage& image) { write_atomic(path, encode_png(image)); }

inline Json homography_to_json(const Homography& h) {
  Json arr = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) arr.push_back(h(r, c));
  return arr;
}

inline Homography homography_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 9) throw DataError("homography must be 9 numbers, row-major");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = j.at(i).get<double>();
  return Homography(m);
}

/// One `sx sy tx ty` quadruple per line; blank lines and `#` comments skipped.
inline std::vector<PointCorrespondence> parse_correspondences(std::string_view text) {
  std::vector<PointCorrespondence> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v[4];
    int got = 0;
    while (got < 4 && (ls >> v[got])) ++got;
    if (got == 0 && ls.eof()) continue;
    std::string rest;
    if (got != 4 || (ls >> rest)) {
      throw DataError("correspondence line " + std::to_string(lineno) + " is not `sx sy tx ty`");
    }
    out.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3])});
  }
  return out;
}

inline std::string format_correspondences(const std::vector<PointCorrespondence>& corr) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& c : corr) {
    out << c.source.x() << ' ' << c.source.y() << ' ' << c.target.x() << ' ' << c.target.y() << '\n';
  }
  return out.str();
}

}  // namespace bev::io
