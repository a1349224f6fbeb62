#pragma once

#include <stdexcept>
#include <string>

namespace bev {

// Exit codes shared by the command line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

/// Missing, unreadable or malformed input and output files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses, singular maps and other numerical failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image shapes that do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GeometryErrc {
  kDegenerateDenominator,
  kDegenerateConfiguration,
  kInsufficientPoints,
  kCameraInPlane,
  kBehindCamera,
  kSingularHomography,
};

inline const char* to_string(GeometryErrc code) {
  switch (code) {
    case GeometryErrc::kDegenerateDenominator: return "degenerate denominator";
    case GeometryErrc::kDegenerateConfiguration: return "degenerate configuration";
    case GeometryErrc::kInsufficientPoints: return "insufficient points";
    case GeometryErrc::kCameraInPlane: return "camera in ground plane";
    case GeometryErrc::kBehindCamera: return "point behind camera";
    case GeometryErrc::kSingularHomography: return "singular homography";
  }
  return "unknown";
}

class GeometryError : public NumericError {
 public:
  GeometryError(GeometryErrc code, const std::string& what)
      : NumericError(std::string(to_string(code)) + ": " + what), code_(code) {}

  GeometryErrc code() const noexcept { return code_; }

 private:
  GeometryErrc code_;
};

}  // namespace bev
