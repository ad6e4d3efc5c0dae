#include "cubedn/common.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace cubedn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::OutOfFieldOfView: return "OutOfFieldOfView";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::NoCluster: return "NoCluster";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::string_view to_string(DroneClass cls) {
  return cls == DroneClass::Small ? "small" : "large";
}

DroneClass parse_class(std::string_view name) {
  if (name == "small" || name == "Small" || name == "mini") return DroneClass::Small;
  if (name == "large" || name == "Large") return DroneClass::Large;
  fail(ErrorCode::InvalidArgument, "unknown drone class '" + std::string(name) + "'");
}

std::string_view to_string(RadarId id) {
  return id == RadarId::Horizontal ? "horizontal" : "vertical";
}

double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

}  // namespace cubedn
