#pragma once

#include <vector>

#include "cubedn/dsp.hpp"
#include "cubedn/fusion.hpp"
#include "cubedn/labels.hpp"
#include "cubedn/metrics.hpp"
#include "cubedn/model.hpp"
#include "cubedn/sim.hpp"

// Glue from a simulated scene to network-ready tensors.
namespace cubedn::pipeline {

struct ProcessedFrame {
  dsp::RadarCube horizontal;
  dsp::RadarCube vertical;
  fusion::FusedCube fused;
  labels::ConfidenceCube target;
  std::vector<metrics::GroundTruth> truth;
};

ProcessedFrame process(const sim::Scene& scene, const sim::RadarConfig& cfg,
                       fusion::Normalization norm = fusion::Normalization::Reference);

// Fused-cube peak of one noiseless unit-amplitude scatterer at zero velocity,
// mid-range bin centre, straight ahead of the rig. Cached per radar config.
double reference_peak(const sim::RadarConfig& cfg);

// Divisor handed to fusion::fuse for `norm` (1 unless Reference).
double fusion_divisor(const sim::RadarConfig& cfg, fusion::Normalization norm);

std::vector<labels::PolarPosition> polar_targets(const sim::Scene& scene, const sim::RadarConfig& cfg);

// Ground-truth records for metrics from label-style entries.
std::vector<metrics::GroundTruth> ground_truth(const sim::Scene& scene, const sim::RadarConfig& cfg);

model::Sample to_sample(const ProcessedFrame& f);

}  // namespace cubedn::pipeline
