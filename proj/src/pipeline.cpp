#include "cubedn/pipeline.hpp"

#include <algorithm>
#include <mutex>
#include <utility>

namespace cubedn::pipeline {

double reference_peak(const sim::RadarConfig& cfg) {
  static std::mutex mu;
  static std::vector<std::pair<sim::RadarConfig, double>> cache;
  {
    std::lock_guard lock(mu);
    for (const auto& [c, v] : cache) {
      if (c == cfg) return v;
    }
  }
  sim::Scene scene;
  const double range = static_cast<double>(cfg.range_bins() / 2) * cfg.range_resolution_m;
  scene.targets.push_back({DroneClass::Small, {0.0, range, 0.0}, {}, 1.0});
  const auto h = dsp::extract_cube(sim::simulate_frame(scene, cfg, RadarId::Horizontal), cfg);
  const auto v = dsp::extract_cube(sim::simulate_frame(scene, cfg, RadarId::Vertical), cfg);
  const auto fused = fusion::fuse(h, v, fusion::Normalization::None);
  const double peak = *std::max_element(fused.data.values().begin(), fused.data.values().end());
  std::lock_guard lock(mu);
  cache.emplace_back(cfg, peak);
  return peak;
}

double fusion_divisor(const sim::RadarConfig& cfg, fusion::Normalization norm) {
  return norm == fusion::Normalization::Reference ? reference_peak(cfg) : 1.0;
}

std::vector<labels::PolarPosition> polar_targets(const sim::Scene& scene, const sim::RadarConfig& cfg) {
  std::vector<labels::PolarPosition> out;
  for (const auto& t : scene.targets) out.push_back(labels::to_polar_bins(t.position, t.cls, cfg));
  return out;
}

std::vector<metrics::GroundTruth> ground_truth(const sim::Scene& scene, const sim::RadarConfig& cfg) {
  std::vector<metrics::GroundTruth> out;
  for (const auto& t : scene.targets) out.push_back(metrics::make_ground_truth(t, cfg));
  return out;
}

ProcessedFrame process(const sim::Scene& scene, const sim::RadarConfig& cfg, fusion::Normalization norm) {
  ProcessedFrame f;
  f.horizontal = dsp::extract_cube(sim::simulate_frame(scene, cfg, RadarId::Horizontal), cfg);
  f.vertical = dsp::extract_cube(sim::simulate_frame(scene, cfg, RadarId::Vertical), cfg);
  f.fused = fusion::fuse(f.horizontal, f.vertical, norm, fusion_divisor(cfg, norm));
  const auto polar = polar_targets(scene, cfg);
  f.target = labels::make_ground_truth(polar, cfg.grid());
  f.truth = ground_truth(scene, cfg);
  return f;
}

model::Sample to_sample(const ProcessedFrame& f) { return {f.fused.data, f.target.data}; }

}  // namespace cubedn::pipeline
