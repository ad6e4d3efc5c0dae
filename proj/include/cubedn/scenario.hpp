#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/sim.hpp"

// Random scene sequences inside the desk-scale field of view.
namespace cubedn::scenario {

enum class Motion {
  Hover,    // fixed position for the whole sequence
  Linear,   // constant velocity, reflected at the field-of-view walls
  Scatter,  // fresh independent positions every frame
};

std::string_view to_string(Motion m);
Motion parse_motion(std::string_view s);

struct ScenarioConfig {
  Motion motion = Motion::Scatter;
  std::size_t sequences = 1;
  std::size_t frames_per_sequence = 1;
  std::size_t min_targets = 1;
  std::size_t max_targets = 2;
  double large_fraction = 0.5;  // probability that a target is Large
  double snr_db = 20.0;
  double min_range_m = 0.4;
  double max_range_m = 3.5;
  double max_sine = 0.75;  // |sin(azimuth)| and |sin(elevation)| bound
  double min_speed_mps = 0.1;
  double max_speed_mps = 0.5;
  double frame_interval_s = 0.1;
  std::uint64_t seed = 1;

  void validate(const sim::RadarConfig& radar) const;
};

// Noise power per raw sample giving snr_db for a unit-amplitude scatterer
// (a Small drone at default RCS), measured before any processing gain.
double noise_power_for_snr(double snr_db);

struct Sequence {
  std::size_t index = 0;
  std::vector<sim::Scene> frames;
};

// Placement rules: every target maps inside the cube; any two targets are at
// least kMinChebyshevSeparation bins apart; two targets of the same class are
// farther apart than that class's suppression radius.
inline constexpr int kMinChebyshevSeparation = 4;

bool placement_ok(const std::vector<sim::Target>& targets, const sim::RadarConfig& cfg,
                  const ScenarioConfig& sc);

std::vector<Sequence> generate(const ScenarioConfig& sc, const sim::RadarConfig& cfg);

}  // namespace cubedn::scenario
