#include "cubedn/scenario.hpp"

#include <cmath>
#include <random>

#include "cubedn/labels.hpp"
#include "cubedn/metrics.hpp"
#include "cubedn/postproc.hpp"

namespace cubedn::scenario {

std::string_view to_string(Motion m) {
  switch (m) {
    case Motion::Hover: return "hover";
    case Motion::Linear: return "linear";
    case Motion::Scatter: return "scatter";
  }
  return "?";
}

Motion parse_motion(std::string_view s) {
  if (s == "hover") return Motion::Hover;
  if (s == "linear") return Motion::Linear;
  if (s == "scatter") return Motion::Scatter;
  fail(ErrorCode::Config, "unknown motion '" + std::string(s) + "' (hover, linear, scatter)");
}

void ScenarioConfig::validate(const sim::RadarConfig& radar) const {
  auto bad = [](const std::string& why) { fail(ErrorCode::Config, "scenario: " + why); };
  if (sequences == 0 || frames_per_sequence == 0) bad("sequences and frames_per_sequence must be > 0");
  if (min_targets > max_targets) bad("min_targets > max_targets");
  if (!(large_fraction >= 0 && large_fraction <= 1)) bad("large_fraction must be in [0, 1]");
  if (!(min_range_m > 0 && min_range_m < max_range_m)) bad("need 0 < min_range_m < max_range_m");
  if (max_range_m > radar.max_range_m) bad("max_range_m exceeds the radar's max range");
  if (!(max_sine > 0 && max_sine < 1)) bad("max_sine must be in (0, 1)");
  if (!(min_speed_mps >= 0 && min_speed_mps <= max_speed_mps)) bad("need 0 <= min_speed <= max_speed");
  if (max_speed_mps >= radar.max_unambiguous_velocity()) {
    bad("max_speed_mps must stay below the unambiguous velocity " +
        std::to_string(radar.max_unambiguous_velocity()) + " m/s");
  }
  if (!(frame_interval_s > 0)) bad("frame_interval_s must be > 0");
}

double noise_power_for_snr(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

namespace {

bool in_fov(Vec3 p, const sim::RadarConfig& cfg, const ScenarioConfig& sc) {
  const double range = norm(p);
  if (range < sc.min_range_m || range > sc.max_range_m || p.y <= 0) return false;
  if (std::abs(std::sin(sim::azimuth_of(p))) > sc.max_sine) return false;
  if (std::abs(p.z / range) > sc.max_sine) return false;
  // The vertical unit sits radar_separation_m away; both must see the target.
  const Vec3 pv = sim::radar_relative(p, RadarId::Vertical, cfg);
  if (std::abs(std::sin(sim::azimuth_of(pv))) > sc.max_sine) return false;
  return cfg.grid().contains(labels::to_polar_bins(p, DroneClass::Small, cfg).rounded());
}

Vec3 random_position(std::mt19937_64& rng, const sim::RadarConfig& cfg, const ScenarioConfig& sc) {
  std::uniform_real_distribution<double> range(sc.min_range_m, sc.max_range_m);
  std::uniform_real_distribution<double> sine(-sc.max_sine, sc.max_sine);
  for (;;) {
    const double r = range(rng), su = sine(rng), se = sine(rng);
    const double el = std::asin(se), az = std::asin(su);
    const Vec3 p{r * std::cos(el) * std::sin(az), r * std::cos(el) * std::cos(az), r * se};
    if (in_fov(p, cfg, sc)) return p;
  }
}

Vec3 random_velocity(std::mt19937_64& rng, const ScenarioConfig& sc) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> speed(sc.min_speed_mps, sc.max_speed_mps);
  Vec3 d{g(rng), g(rng), g(rng)};
  const double n = norm(d);
  return (speed(rng) / (n > 0 ? n : 1.0)) * d;
}

sim::Target random_target(std::mt19937_64& rng, const sim::RadarConfig& cfg, const ScenarioConfig& sc) {
  std::bernoulli_distribution large(sc.large_fraction);
  sim::Target t;
  t.cls = large(rng) ? DroneClass::Large : DroneClass::Small;
  t.rcs = sim::default_rcs(t.cls);
  t.position = random_position(rng, cfg, sc);
  return t;
}

// Advances one frame; a target about to leave the field of view reverses.
void step(sim::Target& t, const sim::RadarConfig& cfg, const ScenarioConfig& sc) {
  const Vec3 next = t.position + sc.frame_interval_s * t.velocity;
  if (in_fov(next, cfg, sc)) {
    t.position = next;
  } else {
    t.velocity = -1.0 * t.velocity;
  }
}

constexpr int kMaxAttempts = 10000;

}  // namespace

bool placement_ok(const std::vector<sim::Target>& targets, const sim::RadarConfig& cfg,
                  const ScenarioConfig& sc) {
  std::vector<BinIndex> bins;
  for (const auto& t : targets) {
    if (!in_fov(t.position, cfg, sc)) return false;
    bins.push_back(labels::to_polar_bins(t.position, t.cls, cfg).rounded());
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      if (metrics::ole_distance(bins[i], bins[j]) < kMinChebyshevSeparation) return false;
      if (targets[i].cls != targets[j].cls) continue;
      const double dr = bins[i].r - bins[j].r, da = bins[i].a - bins[j].a, de = bins[i].e - bins[j].e;
      const double radius = postproc::suppression_radius(targets[i].cls);
      if (dr * dr + da * da + de * de <= radius * radius) return false;
    }
  }
  return true;
}

std::vector<Sequence> generate(const ScenarioConfig& sc, const sim::RadarConfig& cfg) {
  cfg.validate();
  sc.validate(cfg);
  std::mt19937_64 rng(sc.seed);
  std::uniform_int_distribution<std::size_t> count(sc.min_targets, sc.max_targets);
  const double noise = noise_power_for_snr(sc.snr_db);

  auto draw = [&](std::size_t n) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      std::vector<sim::Target> ts;
      for (std::size_t i = 0; i < n; ++i) ts.push_back(random_target(rng, cfg, sc));
      // Snapshot scenes still carry motion so the doppler axis is exercised.
      if (sc.motion == Motion::Scatter) {
        for (auto& t : ts) t.velocity = random_velocity(rng, sc);
      }
      if (placement_ok(ts, cfg, sc)) return ts;
    }
    fail(ErrorCode::Config, "scenario: cannot place " + std::to_string(n) +
                                " targets under the separation rules; widen the field of view");
  };

  std::vector<Sequence> out;
  std::uint64_t frame_seed = sc.seed * 1000003ULL;
  for (std::size_t s = 0; s < sc.sequences; ++s) {
    Sequence seq;
    seq.index = s;
    const std::size_t n = count(rng);
    std::vector<sim::Target> targets = draw(n);
    if (sc.motion == Motion::Linear) {
      for (auto& t : targets) t.velocity = random_velocity(rng, sc);
    }
    for (std::size_t f = 0; f < sc.frames_per_sequence; ++f) {
      if (f > 0) {
        if (sc.motion == Motion::Scatter) {
          targets = draw(n);
        } else if (sc.motion == Motion::Linear) {
          auto next = targets;
          for (auto& t : next) step(t, cfg, sc);
          // Keep the previous frame's layout when motion would break separation.
          if (placement_ok(next, cfg, sc)) {
            targets = std::move(next);
          } else {
            for (auto& t : targets) t.velocity = -1.0 * t.velocity;
          }
        }
      }
      sim::Scene scene;
      scene.targets = targets;
      scene.noise_power = noise;
      scene.seed = ++frame_seed;
      seq.frames.push_back(std::move(scene));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace cubedn::scenario
