#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cubedn {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Io,
  ShapeMismatch,
  TargetOutOfRange,
  OutOfFieldOfView,
  DimMismatch,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  DivergenceDetected,
  WindowTooLarge,
  NoCluster,
  UndefinedMetric,
  SpecMismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

enum class DroneClass : int { Small = 0, Large = 1 };
inline constexpr int kNumClasses = 2;
inline constexpr std::array<DroneClass, kNumClasses> kAllClasses{DroneClass::Small,
                                                                  DroneClass::Large};

std::string_view to_string(DroneClass cls);
DroneClass parse_class(std::string_view name);

enum class RadarId { Horizontal, Vertical };

std::string_view to_string(RadarId id);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double norm(Vec3 v);
double dot(Vec3 a, Vec3 b);

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor, last dimension fastest.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      fail(ErrorCode::ShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                         " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[offset(i, j, k)]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const { return data_[offset(i, j, k)]; }
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[offset(i, j, k, l)];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[offset(i, j, k, l)];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Integer position in a range-azimuth-elevation grid.
struct BinIndex {
  int r = 0;
  int a = 0;
  int e = 0;
  friend bool operator==(const BinIndex&, const BinIndex&) = default;
  friend auto operator<=>(const BinIndex&, const BinIndex&) = default;
};

// Spatial extent of a range-azimuth-elevation grid.
struct GridDims {
  std::size_t r = 0;
  std::size_t a = 0;
  std::size_t e = 0;
  std::size_t voxels() const { return r * a * e; }
  bool contains(const BinIndex& b) const {
    return b.r >= 0 && b.a >= 0 && b.e >= 0 && static_cast<std::size_t>(b.r) < r &&
           static_cast<std::size_t>(b.a) < a && static_cast<std::size_t>(b.e) < e;
  }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

}  // namespace cubedn
