#include "cubedn/cubedn.h"

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>

#include "cubedn/app.hpp"
#include "cubedn/baseline.hpp"
#include "cubedn/pipeline.hpp"

#include <json.hpp>

using namespace cubedn;

struct cdn_config {
  config::RunConfig cfg;
  std::string raw;   // document as given, patches apply to this
  std::string json;  // normalized full form
};

struct cdn_cube {
  Tensor<double> t;
};

struct cdn_model {
  model::Network net;
};

struct cdn_detections {
  std::vector<postproc::Detection> items;
};

namespace {

thread_local std::string last_error;

std::mutex log_mu;
cdn_log_fn log_fn = nullptr;
void* log_user = nullptr;

cdn_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return CDN_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return CDN_ERR_CONFIG;
    case ErrorCode::Io: return CDN_ERR_IO;
    case ErrorCode::ShapeMismatch: return CDN_ERR_SHAPE_MISMATCH;
    case ErrorCode::TargetOutOfRange: return CDN_ERR_TARGET_OUT_OF_RANGE;
    case ErrorCode::OutOfFieldOfView: return CDN_ERR_OUT_OF_FIELD_OF_VIEW;
    case ErrorCode::DimMismatch: return CDN_ERR_DIM_MISMATCH;
    case ErrorCode::BadMagic: return CDN_ERR_BAD_MAGIC;
    case ErrorCode::VersionMismatch: return CDN_ERR_VERSION_MISMATCH;
    case ErrorCode::TruncatedPayload: return CDN_ERR_TRUNCATED_PAYLOAD;
    case ErrorCode::DivergenceDetected: return CDN_ERR_DIVERGENCE;
    case ErrorCode::WindowTooLarge: return CDN_ERR_WINDOW_TOO_LARGE;
    case ErrorCode::NoCluster: return CDN_ERR_NO_CLUSTER;
    case ErrorCode::UndefinedMetric: return CDN_ERR_UNDEFINED_METRIC;
    case ErrorCode::SpecMismatch: return CDN_ERR_SPEC_MISMATCH;
  }
  return CDN_ERR_INTERNAL;
}

template <class Fn>
cdn_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CDN_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return CDN_ERR_INTERNAL;
}

template <class... P>
void require(const P*... ptrs) {
  if (((ptrs == nullptr) || ...)) fail(ErrorCode::InvalidArgument, "null argument");
}

void emit(app::LogLevel level, const std::string& msg) {
  std::lock_guard lock(log_mu);
  if (log_fn) log_fn(static_cast<cdn_log_level>(level), msg.c_str(), log_user);
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

cdn_config* wrap(const std::string& raw) {
  auto* out = new cdn_config{config::parse(raw), raw, {}};
  out->json = config::to_json(out->cfg);
  return out;
}

void patch(cdn_config* cfg, const nlohmann::json& p) {
  auto doc = nlohmann::json::parse(cfg->raw);
  doc.merge_patch(p);
  auto raw = doc.dump();
  cfg->cfg = config::parse(raw);
  cfg->raw = std::move(raw);
  cfg->json = config::to_json(cfg->cfg);
}

dsp::RadarCube radar_cube(const cdn_cube* c, RadarId id, const config::RunConfig& cfg) {
  if (c->t.rank() != 3) fail(ErrorCode::ShapeMismatch, "radar cube must have rank 3");
  return {id, c->t, dsp::bin_info(cfg.radar)};
}

store::Split split_of(cdn_split s) {
  switch (s) {
    case CDN_SPLIT_TRAIN: return store::Split::Train;
    case CDN_SPLIT_VAL: return store::Split::Val;
    case CDN_SPLIT_TEST: return store::Split::Test;
  }
  fail(ErrorCode::InvalidArgument, "unknown split");
}

}  // namespace

extern "C" {

const char* cdn_status_string(cdn_status s) {
  switch (s) {
    case CDN_OK: return "ok";
    case CDN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CDN_ERR_CONFIG: return "configuration error";
    case CDN_ERR_IO: return "i/o error";
    case CDN_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case CDN_ERR_TARGET_OUT_OF_RANGE: return "target out of range";
    case CDN_ERR_OUT_OF_FIELD_OF_VIEW: return "out of field of view";
    case CDN_ERR_DIM_MISMATCH: return "dimension mismatch";
    case CDN_ERR_BAD_MAGIC: return "bad magic";
    case CDN_ERR_VERSION_MISMATCH: return "version mismatch";
    case CDN_ERR_TRUNCATED_PAYLOAD: return "truncated payload";
    case CDN_ERR_DIVERGENCE: return "divergence detected";
    case CDN_ERR_WINDOW_TOO_LARGE: return "window too large";
    case CDN_ERR_NO_CLUSTER: return "no cluster";
    case CDN_ERR_UNDEFINED_METRIC: return "undefined metric";
    case CDN_ERR_SPEC_MISMATCH: return "network spec mismatch";
    case CDN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cdn_last_error(void) { return last_error.c_str(); }

const char* cdn_version(void) { return "1.0.0"; }

void cdn_set_log_callback(cdn_log_fn fn, void* user) {
  std::lock_guard lock(log_mu);
  log_fn = fn;
  log_user = user;
}

cdn_status cdn_config_default(cdn_config** out) {
  return guard([&] {
    require(out);
    *out = wrap("{}");
  });
}

cdn_status cdn_config_parse(const char* json, cdn_config** out) {
  return guard([&] {
    require(json, out);
    *out = wrap(json);
  });
}

cdn_status cdn_config_load(const char* path, cdn_config** out) {
  return guard([&] {
    require(path, out);
    *out = wrap(store::read_text(path));
  });
}

void cdn_config_free(cdn_config* cfg) { delete cfg; }

const char* cdn_config_json(const cdn_config* cfg) { return cfg ? cfg->json.c_str() : ""; }

cdn_status cdn_config_set_seed(cdn_config* cfg, uint64_t seed) {
  return guard([&] {
    require(cfg);
    patch(cfg, {{"seed", seed}, {"scenario", {{"seed", seed}}}, {"train", {{"seed", seed}}}});
  });
}

cdn_status cdn_config_merge(cdn_config* cfg, const char* json_patch) {
  return guard([&] {
    require(cfg, json_patch);
    nlohmann::json p;
    try {
      p = nlohmann::json::parse(json_patch);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Config, std::string("config patch: ") + e.what());
    }
    patch(cfg, p);
  });
}

cdn_status cdn_config_radar_dims(const cdn_config* cfg, size_t dims[3]) {
  return guard([&] {
    require(cfg, dims);
    dims[0] = cfg->cfg.radar.doppler_bins();
    dims[1] = cfg->cfg.radar.range_bins();
    dims[2] = cfg->cfg.radar.angle_bins();
  });
}

cdn_status cdn_cube_create(const size_t* dims, size_t rank, const double* values, cdn_cube** out) {
  return guard([&] {
    require(dims, out);
    if (rank == 0) fail(ErrorCode::InvalidArgument, "rank must be >= 1");
    Shape shape(dims, dims + rank);
    Tensor<double> t(shape);
    if (values) std::copy(values, values + t.size(), t.data());
    *out = new cdn_cube{std::move(t)};
  });
}

void cdn_cube_free(cdn_cube* cube) { delete cube; }
size_t cdn_cube_rank(const cdn_cube* c) { return c ? c->t.rank() : 0; }
size_t cdn_cube_dim(const cdn_cube* c, size_t axis) { return c && axis < c->t.rank() ? c->t.dim(axis) : 0; }
size_t cdn_cube_size(const cdn_cube* c) { return c ? c->t.size() : 0; }
const double* cdn_cube_data(const cdn_cube* c) { return c ? c->t.data() : nullptr; }

cdn_status cdn_cube_write(const cdn_cube* cube, const char* path) {
  return guard([&] {
    require(cube, path);
    store::write_cube(path, store::to_float(cube->t));
  });
}

cdn_status cdn_cube_read(const char* path, cdn_cube** out) {
  return guard([&] {
    require(path, out);
    *out = new cdn_cube{store::to_double(store::read_cube(path))};
  });
}

cdn_status cdn_simulate_cubes(const cdn_config* cfg, const char* scene_json, cdn_cube** h, cdn_cube** v) {
  return guard([&] {
    require(cfg, scene_json, h, v);
    const auto scene = sim::scene_from_json(scene_json);
    const auto& radar = cfg->cfg.radar;
    auto hc = dsp::extract_cube(sim::simulate_frame(scene, radar, RadarId::Horizontal), radar);
    auto vc = dsp::extract_cube(sim::simulate_frame(scene, radar, RadarId::Vertical), radar);
    *h = new cdn_cube{std::move(hc.data)};
    *v = new cdn_cube{std::move(vc.data)};
  });
}

cdn_status cdn_fuse(const cdn_config* cfg, const cdn_cube* h, const cdn_cube* v, cdn_cube** out) {
  return guard([&] {
    require(cfg, h, v, out);
    auto fused = fusion::fuse(radar_cube(h, RadarId::Horizontal, cfg->cfg),
                              radar_cube(v, RadarId::Vertical, cfg->cfg), cfg->cfg.normalization,
                              pipeline::fusion_divisor(cfg->cfg.radar, cfg->cfg.normalization));
    *out = new cdn_cube{std::move(fused.data)};
  });
}

cdn_status cdn_ground_truth(const cdn_config* cfg, const char* scene_json, cdn_cube** out) {
  return guard([&] {
    require(cfg, scene_json, out);
    const auto scene = sim::scene_from_json(scene_json);
    const auto polar = pipeline::polar_targets(scene, cfg->cfg.radar);
    *out = new cdn_cube{labels::make_ground_truth(polar, cfg->cfg.radar.grid()).data};
  });
}

cdn_status cdn_model_create(const cdn_config* cfg, uint64_t seed, cdn_model** out) {
  return guard([&] {
    require(cfg, out);
    *out = new cdn_model{model::Network(cfg->cfg.network, seed)};
  });
}

cdn_status cdn_model_load(const char* path, cdn_model** out) {
  return guard([&] {
    require(path, out);
    *out = new cdn_model{store::read_weights(path)};
  });
}

cdn_status cdn_model_save(const cdn_model* m, const char* path) {
  return guard([&] {
    require(m, path);
    store::write_weights(path, m->net);
  });
}

void cdn_model_free(cdn_model* m) { delete m; }

size_t cdn_model_parameter_count(const cdn_model* m) { return m ? m->net.parameter_count() : 0; }

cdn_status cdn_model_predict(const cdn_model* m, const cdn_cube* fused, cdn_cube** out) {
  return guard([&] {
    require(m, fused, out);
    *out = new cdn_cube{m->net.forward(fused->t)};
  });
}

cdn_status cdn_detect(const cdn_config* cfg, const cdn_cube* confidence, cdn_detections** out) {
  return guard([&] {
    require(cfg, confidence, out);
    const auto& t = confidence->t;
    if (t.rank() != 4 || t.dim(0) != static_cast<std::size_t>(kNumClasses)) {
      fail(ErrorCode::ShapeMismatch, "confidence cube must be (2, R, A, E), got " + shape_string(t.shape()));
    }
    labels::ConfidenceCube cube;
    cube.data = t;
    *out = new cdn_detections{postproc::detect(cube, cfg->cfg.radar, cfg->cfg.postproc)};
  });
}

cdn_status cdn_baseline_detect(const cdn_config* cfg, const cdn_cube* h, const cdn_cube* v, cdn_detections** out) {
  return guard([&] {
    require(cfg, h, v, out);
    auto* d = new cdn_detections{};
    try {
      if (auto det = baseline::detect(radar_cube(h, RadarId::Horizontal, cfg->cfg),
                                      radar_cube(v, RadarId::Vertical, cfg->cfg), cfg->cfg.radar,
                                      cfg->cfg.baseline)) {
        d->items.push_back(*det);
      }
    } catch (...) {
      delete d;
      throw;
    }
    *out = d;
  });
}

size_t cdn_detections_count(const cdn_detections* d) { return d ? d->items.size() : 0; }

cdn_status cdn_detections_get(const cdn_detections* d, size_t index, cdn_detection* out) {
  return guard([&] {
    require(d, out);
    if (index >= d->items.size()) fail(ErrorCode::InvalidArgument, "detection index out of range");
    const auto& x = d->items[index];
    *out = {static_cast<int>(x.cls), x.bins.r, x.bins.a, x.bins.e, x.confidence,
            x.cartesian.x, x.cartesian.y, x.cartesian.z};
  });
}

void cdn_detections_free(cdn_detections* d) { delete d; }

cdn_status cdn_cmd_simulate(const cdn_config* cfg, const char* out_dir, size_t jobs, char** summary) {
  return guard([&] {
    require(cfg, out_dir);
    const auto s = app::simulate(cfg->cfg, out_dir, jobs, emit);
    if (summary) *summary = dup(s.to_text());
  });
}

cdn_status cdn_cmd_train(const cdn_config* cfg, const char* manifest, const char* out_weights) {
  return guard([&] {
    require(cfg, manifest, out_weights);
    app::train(cfg->cfg, manifest, out_weights, emit);
  });
}

cdn_status cdn_cmd_infer(const cdn_config* cfg, cdn_method method, const char* weights, const char* manifest,
                         cdn_split split, const char* out, size_t jobs) {
  return guard([&] {
    require(cfg, manifest, out);
    std::optional<std::filesystem::path> w;
    if (weights) w = weights;
    const auto m = method == CDN_METHOD_BASELINE ? app::Method::Baseline : app::Method::Model;
    app::infer(cfg->cfg, m, w, manifest, split_of(split), out, jobs, emit);
  });
}

cdn_status cdn_cmd_eval(const char* manifest, cdn_split split, const char* const* names,
                        const char* const* detections, const int* class_agnostic, size_t n,
                        const char* out_prefix, char** report) {
  return guard([&] {
    require(manifest, names, detections, out_prefix);
    std::vector<app::EvalInput> inputs;
    for (std::size_t i = 0; i < n; ++i) {
      require(names[i], detections[i]);
      inputs.push_back({names[i], detections[i], !(class_agnostic && class_agnostic[i])});
    }
    const auto reps = app::evaluate(manifest, split_of(split), inputs, out_prefix, nullptr, emit);
    if (report) {
      std::string text;
      for (const auto& r : reps) text += r.to_text();
      if (reps.size() > 1) text += metrics::comparison_table(reps);
      *report = dup(text);
    }
  });
}

cdn_status cdn_cmd_export(const char* cube_path, const char* axes, const char* plane, int sum,
                          const char* out_image) {
  return guard([&] {
    require(cube_path, plane, out_image);
    app::export_heatmap(cube_path, axes ? axes : "", plane, sum ? app::Projection::Sum : app::Projection::Max,
                        out_image);
  });
}

void cdn_string_free(char* s) { std::free(s); }

}  // extern "C"
