#pragma once

#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/labels.hpp"
#include "cubedn/sim.hpp"

namespace cubedn::postproc {

// Elements at or below this never become peak candidates.
inline constexpr double kCandidateFloor = 0.01;
inline constexpr double kOverlapThreshold = 0.5;
inline constexpr int kCropHalfWidth = 3;  // (7,7,7) crops

struct Detection {
  DroneClass cls = DroneClass::Small;
  BinIndex bins;
  double confidence = 0.0;
  Vec3 cartesian;  // meters; filled by attach_cartesian
};

// Gaussian width used for peak suppression (wider than the label mask).
double suppression_sigma(DroneClass cls);
// Euclidean bin radius within which candidates are removed after a pick.
double suppression_radius(DroneClass cls);

// Greedy descending-confidence peak picking on one class channel. Ties are
// broken by lexicographic (r, a, e).
std::vector<Detection> lnms(const labels::ConfidenceCube& pred, DroneClass cls,
                            double candidate_floor = kCandidateFloor);

// Plain reference: rescans the whole cube for the best surviving candidate on
// every iteration.
std::vector<Detection> lnms_reference(const labels::ConfidenceCube& pred, DroneClass cls,
                                      double candidate_floor = kCandidateFloor);

// Binarizes both arrays at `threshold` (strictly greater) and returns
// |intersection| / |union|, or 0 when the union is empty.
double calculate_overlap_ratio(const Tensor<double>& expected, const Tensor<double>& observed,
                               double threshold = labels::kConfidenceFloor);

// (7,7,7) crop of one class channel centered on `center`; cells outside the
// cube read as zero.
Tensor<double> crop(const labels::ConfidenceCube& cube, DroneClass cls, const BinIndex& center);

// Crop of the ideal label mask of a target of class `cls` at `center`,
// truncated to the cube grid in the same way as `crop`.
Tensor<double> expected_mask(GridDims grid, DroneClass cls, const BinIndex& center);

// Keeps the detections whose neighbourhood overlaps the expected mask by at
// least `min_ratio`.
std::vector<Detection> filter_outliers(const labels::ConfidenceCube& pred,
                                       const std::vector<Detection>& detections,
                                       double min_ratio = kOverlapThreshold);

struct Params {
  double candidate_floor = kCandidateFloor;  // in [0, 1)
  double min_overlap = kOverlapThreshold;    // in [0, 1]

  void validate() const;
};

// lnms + filter_outliers over every class, with Cartesian positions attached.
std::vector<Detection> detect(const labels::ConfidenceCube& pred, const sim::RadarConfig& cfg,
                              const Params& params = {});

void attach_cartesian(std::vector<Detection>& detections, const sim::RadarConfig& cfg);

}  // namespace cubedn::postproc
