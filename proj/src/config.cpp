#include "cubedn/config.hpp"

#include <json.hpp>

#include "cubedn/store.hpp"

namespace cubedn::config {

using json = nlohmann::json;

namespace {

// Reads fields out of one JSON object and complains about leftovers.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::Config, path_ + ": expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        fail(ErrorCode::Config, "unknown key '" + qualified(key) + "'");
      }
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::Config, qualified(key) + ": wrong type");
    }
  }
  const json* child(const char* key) {
    seen_.emplace_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

void read_radar(const json& j, sim::RadarConfig& r) {
  Section s(j, "radar");
  std::string preset;
  s.get("preset", preset);
  if (preset == "full") {
    r = sim::RadarConfig::full_scale();
  } else if (preset == "desk") {
    r = sim::RadarConfig::desk_scale();
  } else if (!preset.empty()) {
    fail(ErrorCode::Config, "radar.preset must be 'desk' or 'full'");
  }
  s.get("num_chirps", r.num_chirps);
  s.get("num_samples", r.num_samples);
  s.get("num_virtual_antennas", r.num_virtual_antennas);
  s.get("angle_fft_size", r.angle_fft_size);
  s.get("compression", r.compression);
  s.get("range_resolution_m", r.range_resolution_m);
  s.get("doppler_resolution_mps", r.doppler_resolution_mps);
  s.get("max_range_m", r.max_range_m);
  s.get("carrier_wavelength_m", r.carrier_wavelength_m);
  s.get("antenna_spacing", r.antenna_spacing);
  s.get("radar_separation_m", r.radar_separation_m);
}

json radar_json(const sim::RadarConfig& r) {
  return {{"num_chirps", r.num_chirps},
          {"num_samples", r.num_samples},
          {"num_virtual_antennas", r.num_virtual_antennas},
          {"angle_fft_size", r.angle_fft_size},
          {"compression", r.compression},
          {"range_resolution_m", r.range_resolution_m},
          {"doppler_resolution_mps", r.doppler_resolution_mps},
          {"max_range_m", r.max_range_m},
          {"carrier_wavelength_m", r.carrier_wavelength_m},
          {"antenna_spacing", r.antenna_spacing},
          {"radar_separation_m", r.radar_separation_m}};
}

void read_scenario(const json& j, scenario::ScenarioConfig& c) {
  Section s(j, "scenario");
  std::string motion;
  s.get("motion", motion);
  if (!motion.empty()) c.motion = scenario::parse_motion(motion);
  s.get("sequences", c.sequences);
  s.get("frames_per_sequence", c.frames_per_sequence);
  s.get("min_targets", c.min_targets);
  s.get("max_targets", c.max_targets);
  s.get("large_fraction", c.large_fraction);
  s.get("snr_db", c.snr_db);
  s.get("min_range_m", c.min_range_m);
  s.get("max_range_m", c.max_range_m);
  s.get("max_sine", c.max_sine);
  s.get("min_speed_mps", c.min_speed_mps);
  s.get("max_speed_mps", c.max_speed_mps);
  s.get("frame_interval_s", c.frame_interval_s);
  s.get("seed", c.seed);
}

json scenario_json(const scenario::ScenarioConfig& c) {
  return {{"motion", std::string(scenario::to_string(c.motion))},
          {"sequences", c.sequences},
          {"frames_per_sequence", c.frames_per_sequence},
          {"min_targets", c.min_targets},
          {"max_targets", c.max_targets},
          {"large_fraction", c.large_fraction},
          {"snr_db", c.snr_db},
          {"min_range_m", c.min_range_m},
          {"max_range_m", c.max_range_m},
          {"max_sine", c.max_sine},
          {"min_speed_mps", c.min_speed_mps},
          {"max_speed_mps", c.max_speed_mps},
          {"frame_interval_s", c.frame_interval_s},
          {"seed", c.seed}};
}

void read_network(const json& j, model::NetworkSpec& n) {
  Section s(j, "network");
  s.get("in_channels", n.in_channels);
  std::vector<std::size_t> grid;
  s.get("grid", grid);
  if (!grid.empty()) {
    if (grid.size() != 3) fail(ErrorCode::Config, "network.grid must be [R, A, E]");
    n.grid = {grid[0], grid[1], grid[2]};
  }
  s.get("channels", n.channels);
  s.get("kernel", n.kernel);
  s.get("skip_kernel", n.skip_kernel);
  s.get("num_classes", n.num_classes);
}

void read_train(const json& j, model::TrainConfig& t) {
  Section s(j, "train");
  std::string opt;
  s.get("optimizer", opt);
  if (opt == "sgd") {
    t.optimizer = model::Optimizer::Sgd;
  } else if (opt == "adam") {
    t.optimizer = model::Optimizer::Adam;
  } else if (!opt.empty()) {
    fail(ErrorCode::Config, "train.optimizer must be 'sgd' or 'adam'");
  }
  s.get("learning_rate", t.learning_rate);
  s.get("momentum", t.momentum);
  s.get("beta2", t.beta2);
  s.get("epsilon", t.epsilon);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("seed", t.seed);
  s.get("validation_split", t.validation_split);
  s.get("head_bias_init", t.head_bias_init);
  s.get("final_lr_fraction", t.final_lr_fraction);
}

json train_json(const model::TrainConfig& t) {
  return {{"optimizer", t.optimizer == model::Optimizer::Adam ? "adam" : "sgd"},
          {"learning_rate", t.learning_rate},
          {"momentum", t.momentum},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"validation_split", t.validation_split},
          {"head_bias_init", t.head_bias_init},
          {"final_lr_fraction", t.final_lr_fraction}};
}

void read_baseline(const json& j, baseline::BaselineParams& b) {
  Section s(j, "baseline");
  s.get("guard", b.cfar.guard);
  s.get("train", b.cfar.train);
  s.get("scale", b.cfar.scale);
  s.get("peak_fraction", b.cfar.peak_fraction);
  s.get("eps", b.cluster.eps);
  s.get("min_pts", b.cluster.min_pts);
  s.get("doppler_gate", b.cluster.doppler_gate);
}

}  // namespace

std::string_view to_string(fusion::Normalization n) {
  switch (n) {
    case fusion::Normalization::GlobalMax: return "global_max";
    case fusion::Normalization::Reference: return "reference";
    case fusion::Normalization::None: break;
  }
  return "none";
}

void RunConfig::validate() const {
  radar.validate();
  scenario.validate(radar);
  network.validate();
  train.validate();
  postproc.validate();
  auto bad = [](const std::string& why) { fail(ErrorCode::Config, why); };
  if (!(split.val_fraction >= 0 && split.test_fraction >= 0 && split.val_fraction + split.test_fraction < 1)) {
    bad("split fractions must be >= 0 and sum below 1");
  }
  if (network.in_channels != radar.doppler_bins() || !(network.grid == radar.grid())) {
    bad("network input (" + std::to_string(network.in_channels) + " channels, grid " +
        std::to_string(network.grid.r) + "x" + std::to_string(network.grid.a) + "x" +
        std::to_string(network.grid.e) + ") does not match the radar cube");
  }
  if (!(baseline.cfar.scale > 0)) bad("baseline.scale must be > 0");
  if (baseline.cfar.train == 0) bad("baseline.train must be >= 1");
  if (!(baseline.cfar.peak_fraction >= 0 && baseline.cfar.peak_fraction < 1)) {
    bad("baseline.peak_fraction must lie in [0, 1)");
  }
  if (!(baseline.cluster.eps > 0)) bad("baseline.eps must be > 0");
  if (baseline.cluster.min_pts == 0) bad("baseline.min_pts must be >= 1");
}

RunConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Section s(j, "");
    s.get("seed", c.seed);
    if (const auto* r = s.child("radar")) read_radar(*r, c.radar);
    if (const auto* sc = s.child("scenario")) read_scenario(*sc, c.scenario);
    if (const auto* sp = s.child("split")) {
      Section ss(*sp, "split");
      ss.get("val_fraction", c.split.val_fraction);
      ss.get("test_fraction", c.split.test_fraction);
    }
    std::string norm;
    s.get("normalization", norm);
    if (norm == "none") {
      c.normalization = fusion::Normalization::None;
    } else if (norm == "global_max") {
      c.normalization = fusion::Normalization::GlobalMax;
    } else if (norm == "reference") {
      c.normalization = fusion::Normalization::Reference;
    } else if (!norm.empty()) {
      fail(ErrorCode::Config, "normalization must be 'global_max', 'reference' or 'none'");
    }
    // The network input always follows the radar cube unless set explicitly.
    c.network.in_channels = c.radar.doppler_bins();
    c.network.grid = c.radar.grid();
    if (const auto* n = s.child("network")) read_network(*n, c.network);
    if (const auto* t = s.child("train")) read_train(*t, c.train);
    if (const auto* p = s.child("postproc")) {
      Section ps(*p, "postproc");
      ps.get("candidate_floor", c.postproc.candidate_floor);
      ps.get("min_overlap", c.postproc.min_overlap);
    }
    if (const auto* b = s.child("baseline")) read_baseline(*b, c.baseline);
    s.get("write_fused", c.write_fused);
  }
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path) { return parse(store::read_text(path)); }

std::string to_json(const RunConfig& c) {
  json j = {{"seed", c.seed},
            {"radar", radar_json(c.radar)},
            {"scenario", scenario_json(c.scenario)},
            {"split", {{"val_fraction", c.split.val_fraction}, {"test_fraction", c.split.test_fraction}}},
            {"normalization", std::string(to_string(c.normalization))},
            {"network", json::parse(c.network.to_json())},
            {"train", train_json(c.train)},
            {"postproc",
             {{"candidate_floor", c.postproc.candidate_floor}, {"min_overlap", c.postproc.min_overlap}}},
            {"baseline",
             {{"guard", c.baseline.cfar.guard},
              {"train", c.baseline.cfar.train},
              {"scale", c.baseline.cfar.scale},
              {"peak_fraction", c.baseline.cfar.peak_fraction},
              {"eps", c.baseline.cluster.eps},
              {"min_pts", c.baseline.cluster.min_pts},
              {"doppler_gate", c.baseline.cluster.doppler_gate}}},
            {"write_fused", c.write_fused}};
  return j.dump(2) + "\n";
}

std::string radar_to_json(const sim::RadarConfig& cfg) { return radar_json(cfg).dump(); }

sim::RadarConfig radar_from_json(const std::string& text) {
  sim::RadarConfig r;
  try {
    read_radar(json::parse(text), r);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("radar config: ") + e.what());
  }
  r.validate();
  return r;
}

}  // namespace cubedn::config
