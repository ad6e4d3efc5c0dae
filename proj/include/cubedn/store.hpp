#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/metrics.hpp"
#include "cubedn/model.hpp"
#include "cubedn/postproc.hpp"

// On-disk formats. All integers and floats are little-endian regardless of host;
// byte layouts are documented in docs/formats.md.
namespace cubedn::store {

inline constexpr std::uint32_t kCubeVersion = 1;
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::uint32_t kFloat32 = 1;

// "CDNC" | u32 version | u32 ndim | u32 dtype | u64 dims[ndim] | f32 payload
std::vector<std::uint8_t> encode_cube(const Tensor<float>& cube);
Tensor<float> decode_cube(const std::vector<std::uint8_t>& bytes, const std::string& origin = "cube");

void write_cube(const std::filesystem::path& path, const Tensor<float>& cube);
Tensor<float> read_cube(const std::filesystem::path& path);

Tensor<float> to_float(const Tensor<double>& t);
Tensor<double> to_double(const Tensor<float>& t);

// "CDNW" | u32 version | u32 spec length | spec JSON | u32 tensor count |
// per tensor: u32 name length, name, u32 ndim, u64 dims[ndim] | f64 payloads
// in table order.
std::vector<std::uint8_t> encode_weights(const model::Network& net);
model::Network decode_weights(const std::vector<std::uint8_t>& bytes,
                              const std::string& origin = "weights");

void write_weights(const std::filesystem::path& path, const model::Network& net);
model::Network read_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Delimited detections, one row per detection ordered by frame id then input
// order, header "frame_id,class,r,a,e,confidence,x,y,z".
struct FrameDetections {
  std::size_t frame_id = 0;
  std::vector<postproc::Detection> detections;
};

inline constexpr const char* kDetectionHeader = "frame_id,class,r,a,e,confidence,x,y,z";

std::string format_detections(const std::vector<FrameDetections>& frames);
// Frames appear in first-seen order; frames without detections are absent.
std::vector<FrameDetections> parse_detections(const std::string& text);

struct LabelRecord {
  DroneClass cls = DroneClass::Small;
  Vec3 position;
  Vec3 velocity;
  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestFrame {
  std::size_t id = 0;
  std::size_t sequence = 0;
  Split split = Split::Train;
  std::string horizontal;  // cube paths relative to the manifest directory
  std::string vertical;
  std::string fused;  // optional, empty when absent
  std::vector<LabelRecord> labels;
  friend bool operator==(const ManifestFrame&, const ManifestFrame&) = default;
};

struct DatasetManifest {
  std::string radar_json;  // RadarConfig the frames were simulated with
  std::vector<ManifestFrame> frames;

  std::vector<const ManifestFrame*> split(Split s) const;
  const ManifestFrame* find(std::size_t id) const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  // Checks unique ids and that every referenced file exists under `root`.
  void validate(const std::filesystem::path& root) const;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace cubedn::store
