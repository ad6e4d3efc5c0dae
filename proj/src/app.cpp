#include "cubedn/app.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "cubedn/baseline.hpp"
#include "cubedn/pipeline.hpp"
#include "cubedn/scenario.hpp"

namespace cubedn::app {

namespace fs = std::filesystem;

namespace {

void info(const LogFn& log, const std::string& msg) {
  if (log) log(LogLevel::Info, msg);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::size_t split_index(store::Split s) { return static_cast<std::size_t>(s); }

template <class... Args>
std::string format(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

sim::Scene scene_of(const store::ManifestFrame& f) {
  sim::Scene s;
  for (const auto& l : f.labels) {
    sim::Target t;
    t.cls = l.cls;
    t.position = l.position;
    t.velocity = l.velocity;
    t.rcs = sim::default_rcs(l.cls);
    s.targets.push_back(t);
  }
  return s;
}

dsp::RadarCube load_radar_cube(const fs::path& path, RadarId id, const sim::RadarConfig& radar) {
  dsp::RadarCube cube;
  cube.radar = id;
  cube.data = store::to_double(store::read_cube(path));
  cube.bins = dsp::bin_info(radar);
  const Shape want{radar.doppler_bins(), radar.range_bins(), radar.angle_bins()};
  if (cube.data.shape() != want) {
    fail(ErrorCode::ShapeMismatch, path.string() + ": cube " + shape_string(cube.data.shape()) +
                                       " does not match the radar config " + shape_string(want));
  }
  return cube;
}

fusion::FusedCube load_fused(const fs::path& root, const store::ManifestFrame& f,
                             const config::RunConfig& cfg) {
  const auto h = load_radar_cube(root / f.horizontal, RadarId::Horizontal, cfg.radar);
  const auto v = load_radar_cube(root / f.vertical, RadarId::Vertical, cfg.radar);
  return fusion::fuse(h, v, cfg.normalization, pipeline::fusion_divisor(cfg.radar, cfg.normalization));
}

sim::RadarConfig manifest_radar(const store::DatasetManifest& m, const sim::RadarConfig& fallback) {
  return m.radar_json.empty() || m.radar_json == "{}" ? fallback : config::radar_from_json(m.radar_json);
}

void check_radar(const store::DatasetManifest& m, const config::RunConfig& cfg) {
  if (!(manifest_radar(m, cfg.radar) == cfg.radar)) {
    fail(ErrorCode::Config, "the manifest was simulated with a different radar configuration");
  }
}

// Fused inputs and label cubes of a set of manifest frames, held in memory.
class ManifestDataset final : public model::Dataset {
 public:
  ManifestDataset(fs::path root, std::vector<const store::ManifestFrame*> frames, const config::RunConfig& cfg)
      : root_(std::move(root)), cfg_(cfg) {
    for (const auto* f : frames) {
      model::Sample s;
      s.input = load_fused(root_, *f, cfg_).data;
      s.target = labels::make_ground_truth(pipeline::polar_targets(scene_of(*f), cfg_.radar), cfg_.radar.grid()).data;
      samples_.push_back(std::move(s));
    }
  }
  std::size_t size() const override { return samples_.size(); }
  model::Sample get(std::size_t i) const override { return samples_.at(i); }

 private:
  fs::path root_;
  const config::RunConfig& cfg_;
  std::vector<model::Sample> samples_;
};

}  // namespace

std::string SimulateSummary::to_text() const {
  std::string out = format("%zu frames in %zu sequences\n", frames, sequences);
  out += format("%-8s %12s %12s %12s %12s\n", "class", "train", "val", "test", "targets");
  for (DroneClass c : kAllClasses) {
    const auto i = static_cast<std::size_t>(c);
    const std::size_t t = targets[i][0] + targets[i][1] + targets[i][2];
    out += format("%-8s %12zu %12zu %12zu %12zu\n", std::string(to_string(c)).c_str(), frames_with_class[i][0],
                  frames_with_class[i][1], frames_with_class[i][2], t);
  }
  out += format("%-8s %12zu %12zu %12zu\n", "all", frames_per_split[0], frames_per_split[1], frames_per_split[2]);
  return out;
}

SimulateSummary simulate(const config::RunConfig& cfg, const fs::path& out_dir, std::size_t jobs,
                         const LogFn& log) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + (out_dir / "frames").string() + ": " + ec.message());

  auto sc = cfg.scenario;
  const auto sequences = scenario::generate(sc, cfg.radar);
  const auto n_seq = sequences.size();
  const auto n_test = static_cast<std::size_t>(std::lround(cfg.split.test_fraction * static_cast<double>(n_seq)));
  const auto n_val = static_cast<std::size_t>(std::lround(cfg.split.val_fraction * static_cast<double>(n_seq)));
  if (n_test + n_val >= n_seq && n_seq > 1) fail(ErrorCode::Config, "split leaves no training sequences");

  store::DatasetManifest manifest;
  manifest.radar_json = config::radar_to_json(cfg.radar);
  std::vector<const sim::Scene*> scenes;
  for (const auto& seq : sequences) {
    store::Split split = store::Split::Train;
    if (seq.index >= n_seq - n_test) {
      split = store::Split::Test;
    } else if (seq.index >= n_seq - n_test - n_val) {
      split = store::Split::Val;
    }
    for (const auto& scene : seq.frames) {
      store::ManifestFrame f;
      f.id = manifest.frames.size();
      f.sequence = seq.index;
      f.split = split;
      const std::string stem = format("frames/%06zu", f.id);
      f.horizontal = stem + "_h.cdnc";
      f.vertical = stem + "_v.cdnc";
      if (cfg.write_fused) f.fused = stem + "_f.cdnc";
      for (const auto& t : scene.targets) f.labels.push_back({t.cls, t.position, t.velocity});
      manifest.frames.push_back(std::move(f));
      scenes.push_back(&scene);
    }
  }

  parallel_for(manifest.frames.size(), jobs, [&](std::size_t i) {
    const auto& f = manifest.frames[i];
    const auto p = pipeline::process(*scenes[i], cfg.radar, cfg.normalization);
    store::write_cube(out_dir / f.horizontal, store::to_float(p.horizontal.data));
    store::write_cube(out_dir / f.vertical, store::to_float(p.vertical.data));
    if (!f.fused.empty()) store::write_cube(out_dir / f.fused, store::to_float(p.fused.data));
  });
  store::write_manifest(out_dir / "manifest.json", manifest);

  SimulateSummary sum;
  sum.frames = manifest.frames.size();
  sum.sequences = n_seq;
  for (const auto& f : manifest.frames) {
    const auto s = split_index(f.split);
    ++sum.frames_per_split[s];
    std::array<bool, kNumClasses> seen{};
    for (const auto& l : f.labels) {
      const auto c = static_cast<std::size_t>(l.cls);
      ++sum.targets[c][s];
      seen[c] = true;
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) sum.frames_with_class[c][s] += seen[c];
  }
  store::write_text(out_dir / "summary.txt", sum.to_text());
  info(log, "wrote " + std::to_string(sum.frames) + " frames to " + out_dir.string());
  return sum;
}

TrainSummary train(const config::RunConfig& cfg, const fs::path& manifest_path, const fs::path& out_weights,
                   const LogFn& log) {
  cfg.validate();
  const auto m = store::read_manifest(manifest_path);
  check_radar(m, cfg);
  const fs::path root = manifest_path.parent_path();
  const auto train_frames = m.split(store::Split::Train);
  if (train_frames.empty()) fail(ErrorCode::Config, "manifest has no train split");
  const auto t0 = std::chrono::steady_clock::now();
  const ManifestDataset train_set(root, train_frames, cfg);
  const ManifestDataset val_set(root, m.split(store::Split::Val), cfg);
  info(log, "training on " + std::to_string(train_set.size()) + " frames, validating on " +
                std::to_string(val_set.size()));

  TrainSummary sum;
  sum.train_frames = train_set.size();
  sum.val_frames = val_set.size();
  std::string loss_log = "epoch,train_loss,val_loss,seconds\n";
  fs::path loss_path = out_weights;
  loss_path += ".loss.csv";

  auto on_epoch = [&](const model::Network& net, const model::EpochStats& st) {
    model::EpochStats s = st;
    if (val_set.size() > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        const auto sample = val_set.get(i);
        labels::ConfidenceCube pred, gt;
        pred.data = net.forward(sample.input);
        gt.data = sample.target;
        total += model::loss(pred, gt);
      }
      s.validation_loss = total / static_cast<double>(val_set.size());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sum.history.push_back(s);
    const bool has_val = val_set.size() > 0;
    const std::string val = has_val ? format("%.9g", s.validation_loss) : "";
    loss_log += format("%zu,%.9g,%s,%.1f\n", s.epoch, s.train_loss, val.c_str(), secs);
    store::write_weights(out_weights, net);
    store::write_text(loss_path, loss_log);
    info(log, format("epoch %zu/%zu train loss %.6g%s (%.0f s)", s.epoch, cfg.train.epochs, s.train_loss,
                     has_val ? (" val loss " + format("%.6g", s.validation_loss)).c_str() : "", secs));
  };
  try {
    auto result = model::train(train_set, cfg.network, cfg.train, on_epoch);
    store::write_weights(out_weights, *result.network);
  } catch (const Error& e) {
    store::write_text(loss_path, loss_log);
    throw;
  }
  sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

LatencyStats latency_stats(std::vector<double> ms) {
  LatencyStats s;
  s.per_frame_ms = ms;
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  auto pct = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size()))) - 1;
    return ms[std::min(i, ms.size() - 1)];
  };
  s.p50 = pct(0.5);
  s.p90 = pct(0.9);
  s.p99 = pct(0.99);
  s.max = ms.back();
  return s;
}

InferResult infer(const config::RunConfig& cfg, Method method, const std::optional<fs::path>& weights,
                  const fs::path& manifest_path, store::Split split, const fs::path& out, std::size_t jobs,
                  const LogFn& log) {
  cfg.validate();
  const auto m = store::read_manifest(manifest_path);
  check_radar(m, cfg);
  const fs::path root = manifest_path.parent_path();
  std::optional<model::Network> net;
  if (method == Method::Model) {
    if (!weights) fail(ErrorCode::InvalidArgument, "model inference needs a weights file");
    net.emplace(store::read_weights(*weights));
    if (!(net->spec() == cfg.network)) {
      fail(ErrorCode::SpecMismatch, "weights were trained for network " + net->spec().to_json() +
                                        " but the config describes " + cfg.network.to_json());
    }
  }
  const auto frames = m.split(split);
  InferResult res;
  res.frames.resize(frames.size());
  std::vector<double> ms(frames.size());
  const double divisor = pipeline::fusion_divisor(cfg.radar, cfg.normalization);
  parallel_for(frames.size(), jobs, [&](std::size_t i) {
    const auto& f = *frames[i];
    const auto h = load_radar_cube(root / f.horizontal, RadarId::Horizontal, cfg.radar);
    const auto v = load_radar_cube(root / f.vertical, RadarId::Vertical, cfg.radar);
    const auto t0 = std::chrono::steady_clock::now();
    res.frames[i].frame_id = f.id;
    if (method == Method::Model) {
      const auto fused = fusion::fuse(h, v, cfg.normalization, divisor);
      res.frames[i].detections = postproc::detect(net->predict(fused), cfg.radar, cfg.postproc);
    } else if (auto det = baseline::detect(h, v, cfg.radar, cfg.baseline)) {
      res.frames[i].detections.push_back(*det);
    }
    ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  res.latency = latency_stats(ms);
  store::write_text(out, store::format_detections(res.frames));
  std::string lat = "frame_id,ms\n";
  for (std::size_t i = 0; i < frames.size(); ++i) lat += format("%zu,%.3f\n", frames[i]->id, ms[i]);
  fs::path lat_path = out;
  lat_path += ".latency.csv";
  store::write_text(lat_path, lat);
  info(log, format("%zu frames, latency ms p50 %.2f p90 %.2f p99 %.2f max %.2f", frames.size(), res.latency.p50,
                   res.latency.p90, res.latency.p99, res.latency.max));
  return res;
}

std::vector<metrics::FrameEval> frame_evals(const store::DatasetManifest& m, store::Split split,
                                            const std::vector<store::FrameDetections>& dets,
                                            const sim::RadarConfig& radar) {
  const auto frames = m.split(split);
  std::map<std::size_t, std::size_t> index;
  std::vector<metrics::FrameEval> out;
  for (const auto* f : frames) {
    index[f->id] = out.size();
    out.push_back({f->id, {}, pipeline::ground_truth(scene_of(*f), radar)});
  }
  std::string missing;
  for (const auto& fd : dets) {
    const auto it = index.find(fd.frame_id);
    if (it == index.end()) {
      missing += (missing.empty() ? "" : ", ") + std::to_string(fd.frame_id);
      continue;
    }
    auto& preds = out[it->second].preds;
    preds.insert(preds.end(), fd.detections.begin(), fd.detections.end());
  }
  if (!missing.empty()) {
    fail(ErrorCode::Config, "detections reference frames absent from the " +
                                std::string(store::to_string(split)) + " split: " + missing);
  }
  return out;
}

std::vector<metrics::EvalReport> evaluate(const fs::path& manifest_path, store::Split split,
                                          const std::vector<EvalInput>& inputs, const fs::path& out_prefix,
                                          const sim::RadarConfig* radar_override, const LogFn& log) {
  if (inputs.empty()) fail(ErrorCode::InvalidArgument, "nothing to evaluate");
  const auto m = store::read_manifest(manifest_path);
  const auto radar = radar_override ? *radar_override : manifest_radar(m, sim::RadarConfig::desk_scale());
  std::vector<metrics::EvalReport> reports;
  for (const auto& in : inputs) {
    const auto dets = store::parse_detections(store::read_text(in.detections));
    const auto evals = frame_evals(m, split, dets, radar);
    auto rep = metrics::evaluate(evals, in.name, in.class_aware);
    const std::string stem = out_prefix.string() + "." + in.name;
    store::write_text(stem + ".json", rep.to_json());
    store::write_text(stem + ".csv", rep.to_delimited());
    store::write_text(stem + ".txt", rep.to_text());
    info(log, rep.to_text());
    reports.push_back(std::move(rep));
  }
  if (reports.size() > 1) {
    store::write_text(out_prefix.string() + ".comparison.csv", metrics::comparison_table(reports));
  }
  return reports;
}

std::string default_axes(std::size_t rank) { return rank == 3 ? "DRA" : "DRAE"; }

Image project(const Tensor<double>& cube, const std::string& axes, const std::string& plane, Projection proj) {
  std::string p = plane;
  for (auto& ch : p) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (p.size() != 2 || p[0] == p[1] || p.find_first_not_of("DRAE") != std::string::npos) {
    fail(ErrorCode::InvalidArgument, "bad plane '" + plane + "': two distinct letters of D, R, A, E");
  }
  if (axes.size() != cube.rank()) {
    fail(ErrorCode::InvalidArgument, "axes '" + axes + "' do not name the " + std::to_string(cube.rank()) +
                                         " dimensions of the cube");
  }
  const auto row_axis = axes.find(p[0]);
  const auto col_axis = axes.find(p[1]);
  if (row_axis == std::string::npos || col_axis == std::string::npos) {
    fail(ErrorCode::InvalidArgument, "plane " + p + " is not available for a cube with axes " + axes);
  }
  Image img;
  img.rows = cube.dim(row_axis);
  img.cols = cube.dim(col_axis);
  std::vector<double> acc(img.rows * img.cols, 0.0);
  const auto& shape = cube.shape();
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < cube.size(); ++flat) {
    auto& cell = acc[idx[row_axis] * img.cols + idx[col_axis]];
    cell = proj == Projection::Max ? std::max(cell, cube[flat]) : cell + cube[flat];
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  const double top = acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
  img.pixels.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    img.pixels[i] = top > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * std::max(0.0, acc[i]) / top)) : 0;
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const Image& img) {
  const std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void export_heatmap(const fs::path& cube_path, const std::string& axes, const std::string& plane, Projection proj,
                    const fs::path& out) {
  const auto cube = store::to_double(store::read_cube(cube_path));
  const auto img = project(cube, axes.empty() ? default_axes(cube.rank()) : axes, plane, proj);
  store::write_file(out, encode_pgm(img));
}

}  // namespace cubedn::app
