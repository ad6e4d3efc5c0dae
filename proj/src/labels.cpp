#include "cubedn/labels.hpp"

#include <algorithm>
#include <cmath>

namespace cubedn::labels {

double label_sigma(DroneClass cls) { return cls == DroneClass::Small ? 1.0 : 2.0; }

double support_radius(double sigma) {
  return std::sqrt(-2.0 * sigma * sigma * std::log(kConfidenceFloor));
}

BinIndex PolarPosition::rounded() const {
  return {static_cast<int>(std::lround(r)), static_cast<int>(std::lround(a)),
          static_cast<int>(std::lround(e))};
}

PolarPosition to_polar_bins(Vec3 position, DroneClass cls, const sim::RadarConfig& cfg) {
  const double range = norm(position);
  if (!(range > 0) || position.y <= 0) {
    fail(ErrorCode::OutOfFieldOfView, "position is not in front of the array");
  }
  PolarPosition p;
  p.cls = cls;
  p.r = range / cfg.range_resolution_m;
  p.a = cfg.sine_to_bin(std::sin(sim::azimuth_of(position)));
  p.e = cfg.sine_to_bin(std::sin(sim::elevation_of(position)));
  if (!cfg.grid().contains(p.rounded())) {
    fail(ErrorCode::OutOfFieldOfView,
         "position maps to bins (" + std::to_string(p.r) + "," + std::to_string(p.a) + "," +
             std::to_string(p.e) + ") outside the cube");
  }
  return p;
}

double mask_value(double squared_distance, double sigma) {
  const double v = std::exp(-squared_distance / (2.0 * sigma * sigma));
  return v < kConfidenceFloor ? 0.0 : v;
}

ConfidenceCube make_ground_truth(std::span<const PolarPosition> targets, GridDims dims) {
  ConfidenceCube cube(dims);
  for (const auto& t : targets) {
    const BinIndex c = t.rounded();
    if (!dims.contains(c)) {
      fail(ErrorCode::OutOfFieldOfView, "label outside cube dims");
    }
    const double sigma = label_sigma(t.cls);
    const int reach = static_cast<int>(std::ceil(support_radius(sigma)));
    const auto cls = static_cast<std::size_t>(t.cls);
    for (int r = std::max(0, c.r - reach); r <= std::min<int>(dims.r - 1, c.r + reach); ++r) {
      for (int a = std::max(0, c.a - reach); a <= std::min<int>(dims.a - 1, c.a + reach); ++a) {
        for (int e = std::max(0, c.e - reach); e <= std::min<int>(dims.e - 1, c.e + reach); ++e) {
          const double d2 = static_cast<double>((r - c.r) * (r - c.r) + (a - c.a) * (a - c.a) +
                                                (e - c.e) * (e - c.e));
          double& cell = cube.data.at(cls, r, a, e);
          cell = std::max(cell, mask_value(d2, sigma));
        }
      }
    }
  }
  return cube;
}

void apply_floor(Tensor<double>& data) {
  for (auto& x : data.values()) {
    if (x < kConfidenceFloor) x = 0.0;
  }
}

}  // namespace cubedn::labels
