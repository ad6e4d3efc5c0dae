#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cubedn/common.hpp"

namespace cubedn::sim {

// Waveform and array parameters of one FMCW radar. Both radars of the rig share
// one configuration; the vertical unit is the same hardware rotated by 90 deg.
//
// Resolutions are the post-compression values. The native FFT bins are
// `compression` times finer on the range and doppler axes.
struct RadarConfig {
  std::size_t num_chirps = 255;
  std::size_t num_samples = 256;
  std::size_t num_virtual_antennas = 8;
  std::size_t angle_fft_size = 32;
  std::size_t compression = 2;
  double range_resolution_m = 0.116;
  double doppler_resolution_mps = 0.094;
  double max_range_m = 15.0;
  double carrier_wavelength_m = 0.0039;
  double antenna_spacing = 0.5;  // in wavelengths
  double radar_separation_m = 0.05;

  static RadarConfig full_scale();
  // (D, R, A, E) = (16, 32, 16, 16)
  static RadarConfig desk_scale();

  std::size_t doppler_fft_size() const;  // next power of two >= num_chirps
  std::size_t doppler_bins() const { return doppler_fft_size() / compression; }
  std::size_t range_bins() const { return num_samples / compression; }
  std::size_t angle_bins() const { return angle_fft_size; }
  GridDims grid() const { return {range_bins(), angle_bins(), angle_bins()}; }

  double native_range_resolution() const { return range_resolution_m / compression; }
  double native_doppler_resolution() const { return doppler_resolution_mps / compression; }
  // |v| must stay strictly below this to avoid doppler aliasing.
  double max_unambiguous_velocity() const;
  // Sine-space width of one angle bin.
  double sine_per_angle_bin() const;

  // Continuous angle bin for a sine-space coordinate; boresight sits at bins/2.
  double sine_to_bin(double sine) const;
  double bin_to_sine(double bin) const;

  // Throws Config on violated invariants.
  void validate() const;

  friend bool operator==(const RadarConfig&, const RadarConfig&) = default;
};

struct Target {
  DroneClass cls = DroneClass::Small;
  Vec3 position;  // meters, boresight along +y, +x right, +z up
  Vec3 velocity;  // meters/second
  double rcs = 1.0;
  friend bool operator==(const Target&, const Target&) = default;
};

double default_rcs(DroneClass cls);

struct Scene {
  std::vector<Target> targets;
  double noise_power = 0.0;
  std::uint64_t seed = 0;
  double large_spread_m = 0.3;  // scatterer spacing of a Large drone

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Parses/serializes the JSON scene document (see docs/formats.md).
Scene scene_from_json(const std::string& text);
std::string scene_to_json(const Scene& scene);

struct RawFrame {
  RadarId radar = RadarId::Horizontal;
  std::size_t chirps = 0;
  std::size_t samples = 0;
  std::size_t antennas = 0;
  std::vector<std::complex<double>> data;  // (chirp, sample, antenna)

  RawFrame() = default;
  RawFrame(RadarId id, std::size_t c, std::size_t s, std::size_t a)
      : radar(id), chirps(c), samples(s), antennas(a), data(c * s * a) {}

  std::complex<double>& at(std::size_t c, std::size_t s, std::size_t a) {
    return data[(c * samples + s) * antennas + a];
  }
  const std::complex<double>& at(std::size_t c, std::size_t s, std::size_t a) const {
    return data[(c * samples + s) * antennas + a];
  }
};

// Spherical angles as seen by the rig: azimuth = atan2(x, y), elevation =
// asin(z / range).
double azimuth_of(Vec3 p);
double elevation_of(Vec3 p);

// Position of a point in the frame of the given radar.
Vec3 radar_relative(Vec3 p, RadarId id, const RadarConfig& cfg);

// Point scatterers of a drone, in rig coordinates, with per-scatterer amplitude.
struct Scatterer {
  Vec3 position;
  double amplitude = 1.0;
};
std::vector<Scatterer> scatterers_of(const Target& t, double large_spread_m);

// Throws TargetOutOfRange when the target exceeds max range, would alias in
// range or doppler, or is behind the array.
void check_target(const Target& t, const RadarConfig& cfg);

RawFrame simulate_frame(const Scene& scene, const RadarConfig& cfg, RadarId radar);

struct FramePair {
  RawFrame horizontal;
  RawFrame vertical;
  Scene truth;  // targets beyond max range removed
};

// Targets farther than max_range_m are dropped from both the radar returns and
// the attached ground truth, producing empty frames.
std::vector<FramePair> simulate_trajectory(const std::vector<Scene>& scenes,
                                           const RadarConfig& cfg);

}  // namespace cubedn::sim
