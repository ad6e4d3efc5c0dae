#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cubedn/config.hpp"
#include "cubedn/metrics.hpp"
#include "cubedn/store.hpp"

// The operations behind the command-line subcommands.
namespace cubedn::app {

enum class LogLevel { Info, Warn, Error };
using LogFn = std::function<void(LogLevel, const std::string&)>;

struct SimulateSummary {
  std::size_t frames = 0;
  std::size_t sequences = 0;
  // [class][split] frames containing that class, and target counts
  std::array<std::array<std::size_t, 3>, kNumClasses> frames_with_class{};
  std::array<std::array<std::size_t, 3>, kNumClasses> targets{};
  std::array<std::size_t, 3> frames_per_split{};
  std::string to_text() const;
};

// Simulates the configured scenario into out_dir: per-frame cube files under
// frames/, manifest.json and summary.txt.
SimulateSummary simulate(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
                         std::size_t jobs = 1, const LogFn& log = {});

struct TrainSummary {
  std::vector<model::EpochStats> history;
  std::size_t train_frames = 0;
  std::size_t val_frames = 0;
  double seconds = 0.0;
};

// Trains on the manifest's train split (val split used for validation loss).
// Writes the weights after every epoch and a per-epoch loss log next to them
// (<weights>.loss.csv).
TrainSummary train(const config::RunConfig& cfg, const std::filesystem::path& manifest,
                   const std::filesystem::path& out_weights, const LogFn& log = {});

enum class Method { Model, Baseline };

struct LatencyStats {
  std::vector<double> per_frame_ms;  // manifest order
  double p50 = 0.0, p90 = 0.0, p99 = 0.0, max = 0.0;
};

LatencyStats latency_stats(std::vector<double> per_frame_ms);

struct InferResult {
  std::vector<store::FrameDetections> frames;
  LatencyStats latency;
};

// Detections for every frame of `split`; weights are required for Method::Model
// and must match the configured network (SpecMismatch otherwise). Writes the
// detections file and <out>.latency.csv.
InferResult infer(const config::RunConfig& cfg, Method method,
                  const std::optional<std::filesystem::path>& weights,
                  const std::filesystem::path& manifest, store::Split split,
                  const std::filesystem::path& out, std::size_t jobs = 1, const LogFn& log = {});

struct EvalInput {
  std::string name;
  std::filesystem::path detections;
  bool class_aware = true;
};

// Evaluates each detections file against the manifest split. Writes
// <prefix>.<name>.json / .csv / .txt per input and <prefix>.comparison.csv when
// there are several. Throws Config listing frame ids absent from the split.
std::vector<metrics::EvalReport> evaluate(const std::filesystem::path& manifest, store::Split split,
                                          const std::vector<EvalInput>& inputs,
                                          const std::filesystem::path& out_prefix,
                                          const sim::RadarConfig* radar = nullptr,
                                          const LogFn& log = {});

// Frame evaluation records for one detections list.
std::vector<metrics::FrameEval> frame_evals(const store::DatasetManifest& m, store::Split split,
                                            const std::vector<store::FrameDetections>& dets,
                                            const sim::RadarConfig& radar);

enum class Projection { Max, Sum };

struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// Projects `cube` (axes named by the letters of `axes`, one per dimension)
// onto the plane named by two of those letters, rows along the first. Pixel
// values scale linearly so the plane maximum maps to 255.
Image project(const Tensor<double>& cube, const std::string& axes, const std::string& plane,
              Projection proj);

std::string default_axes(std::size_t rank);

// Binary PGM (P5).
std::vector<std::uint8_t> encode_pgm(const Image& img);

void export_heatmap(const std::filesystem::path& cube_path, const std::string& axes,
                    const std::string& plane, Projection proj, const std::filesystem::path& out);

}  // namespace cubedn::app
