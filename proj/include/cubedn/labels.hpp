#pragma once

#include <span>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/sim.hpp"

namespace cubedn::labels {

// Values below this are zeroed in ground truth; the remaining support is the
// Gaussian mask of a target.
inline constexpr double kConfidenceFloor = 0.05;

// Gaussian width, in bins, of the ground-truth mask of a class.
double label_sigma(DroneClass cls);

// Radius (bins) inside which exp(-d^2 / 2 sigma^2) >= kConfidenceFloor.
double support_radius(double sigma);

// Per-class confidence over (class, range, azimuth, elevation), values in [0, 1].
struct ConfidenceCube {
  Tensor<double> data;

  ConfidenceCube() = default;
  explicit ConfidenceCube(GridDims g)
      : data({static_cast<std::size_t>(kNumClasses), g.r, g.a, g.e}) {}

  GridDims grid() const { return {data.dim(1), data.dim(2), data.dim(3)}; }
  double at(DroneClass cls, const BinIndex& b) const {
    return data.at(static_cast<std::size_t>(cls), static_cast<std::size_t>(b.r),
                   static_cast<std::size_t>(b.a), static_cast<std::size_t>(b.e));
  }
};

// Continuous bin coordinates of a target.
struct PolarPosition {
  double r = 0.0;
  double a = 0.0;
  double e = 0.0;
  DroneClass cls = DroneClass::Small;

  BinIndex rounded() const;
};

// Throws OutOfFieldOfView when the rounded bin falls outside the cube grid or
// the point is not in front of the array.
PolarPosition to_polar_bins(Vec3 position, DroneClass cls, const sim::RadarConfig& cfg);

// Per class, each voxel takes the max over that class's targets of
// exp(-d^2 / 2 sigma^2), d the Euclidean bin distance to the rounded target
// bin. Values below kConfidenceFloor are set to 0.
ConfidenceCube make_ground_truth(std::span<const PolarPosition> targets, GridDims dims);

// Zeroes every element below kConfidenceFloor.
void apply_floor(Tensor<double>& data);

// exp(-d^2 / 2 sigma^2) with the floor applied.
double mask_value(double squared_distance, double sigma);

}  // namespace cubedn::labels
