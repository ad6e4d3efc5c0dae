#pragma once

#include <optional>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/dsp.hpp"
#include "cubedn/postproc.hpp"
#include "cubedn/sim.hpp"

// Conventional point-cloud detector: CA-CFAR per cube, density clustering per
// radar, and a combined range/azimuth/elevation estimate.
namespace cubedn::baseline {

struct RadarPoint {
  std::size_t d = 0;
  std::size_t r = 0;
  std::size_t angle = 0;
  double magnitude = 0.0;
  RadarId radar = RadarId::Horizontal;
};

struct CfarParams {
  std::size_t guard = 2;  // cells per side
  std::size_t train = 8;  // cells per side
  double scale = 4.0;
  // Cells below this fraction of the cube maximum never detect. Without it a
  // noiseless cube has near-zero training cells and every leakage cell fires.
  double peak_fraction = 0.1;
};

// Cell-averaging CFAR along range for every (doppler, angle) line. A cell is a
// detection iff its magnitude exceeds scale x mean of the training cells on
// both sides (guard cells excluded; windows truncated at the cube edges) and is
// at least peak_fraction x the cube maximum.
// Throws WindowTooLarge when 2 (guard + train) + 1 exceeds the range extent.
std::vector<RadarPoint> cfar_detect(const dsp::RadarCube& cube, const CfarParams& params = {});

// Straightforward sliding-window reference of cfar_detect.
std::vector<RadarPoint> cfar_detect_reference(const dsp::RadarCube& cube,
                                              const CfarParams& params = {});

struct ClusterParams {
  double eps = 2.0;  // bins, Euclidean in (range, angle)
  std::size_t min_pts = 3;
  // Keep only points away from the zero-doppler bin before clustering.
  bool doppler_gate = false;
};

struct Cluster {
  std::vector<std::size_t> members;  // indices into the input points
  double range = 0.0;                // magnitude-weighted centroid, bins
  double angle = 0.0;
  double weight = 0.0;
};

// DBSCAN over (range, angle). Output is independent of input order: points are
// canonically sorted before clustering. Clusters are returned largest first
// (ties: larger total magnitude, then smaller centroid).
std::vector<Cluster> dbscan(const std::vector<RadarPoint>& points, const ClusterParams& params);

struct Estimate {
  double r = 0.0;
  double a = 0.0;
  double e = 0.0;
};

// Largest cluster per radar; horizontal gives (r, a), vertical (r, e), range
// averaged. Throws NoCluster when either radar yields no cluster.
Estimate cluster_points(const std::vector<RadarPoint>& horizontal,
                        const std::vector<RadarPoint>& vertical, const ClusterParams& params = {},
                        std::size_t zero_doppler_bin = 0);

struct BaselineParams {
  CfarParams cfar;
  ClusterParams cluster;
};

// Full baseline on one frame pair, bins reported in label convention (range
// bin = range / range resolution). Returns nothing when no cluster is found.
// The detection carries no class information; it is labelled Small.
std::optional<postproc::Detection> detect(const dsp::RadarCube& horizontal,
                                          const dsp::RadarCube& vertical,
                                          const sim::RadarConfig& cfg,
                                          const BaselineParams& params = {});

}  // namespace cubedn::baseline
