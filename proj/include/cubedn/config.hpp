#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cubedn/baseline.hpp"
#include "cubedn/fusion.hpp"
#include "cubedn/model.hpp"
#include "cubedn/postproc.hpp"
#include "cubedn/scenario.hpp"
#include "cubedn/sim.hpp"

// Run configuration document. Every section is optional; unknown keys are
// rejected with the offending key in the message. Schema in docs/formats.md.
namespace cubedn::config {

struct SplitConfig {
  double val_fraction = 0.0;   // of sequences
  double test_fraction = 0.2;  // of sequences; taken from the end
};

struct RunConfig {
  std::uint64_t seed = 1;
  sim::RadarConfig radar = sim::RadarConfig::desk_scale();
  scenario::ScenarioConfig scenario;
  SplitConfig split;
  fusion::Normalization normalization = fusion::Normalization::Reference;
  model::NetworkSpec network;
  model::TrainConfig train;
  postproc::Params postproc;
  baseline::BaselineParams baseline;
  bool write_fused = false;  // also store the fused cube per frame

  void validate() const;
};

RunConfig parse(const std::string& json_text);
RunConfig load(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);

std::string radar_to_json(const sim::RadarConfig& cfg);
sim::RadarConfig radar_from_json(const std::string& json_text);

std::string_view to_string(fusion::Normalization n);

}  // namespace cubedn::config
