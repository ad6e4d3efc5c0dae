#include "cubedn/dsp.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace cubedn::dsp {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(buf);
    plans_.emplace(n, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [_, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : size(n), ptr(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(ptr); }

  std::size_t size;
  fftw_complex* ptr;
};

// Transforms `buf` in place with a cached plan.
void run(FftwBuffer& buf) {
  fftw_execute_dft(PlanCache::instance().get(buf.size), buf.ptr, buf.ptr);
}

}  // namespace

void fft(std::span<std::complex<double>> x) {
  if (x.empty()) return;
  FftwBuffer buf(x.size());
  std::copy(x.begin(), x.end(), buf.data());
  run(buf);
  std::copy(buf.data(), buf.data() + x.size(), x.begin());
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  }
  return w;
}

std::vector<double> compress_bins(std::span<const double> spectrum, std::size_t factor) {
  if (factor == 0 || spectrum.size() % factor != 0) {
    fail(ErrorCode::InvalidArgument, "compress_bins: length " + std::to_string(spectrum.size()) +
                                         " not divisible by " + std::to_string(factor));
  }
  std::vector<double> out(spectrum.size() / factor, 0.0);
  for (std::size_t i = 0; i < spectrum.size(); ++i) out[i / factor] += spectrum[i];
  return out;
}

BinInfo bin_info(const sim::RadarConfig& cfg) {
  BinInfo info;
  info.range_m_per_bin = cfg.range_resolution_m;
  info.doppler_mps_per_bin = cfg.doppler_resolution_mps;
  info.angle_sine_per_bin = cfg.sine_per_angle_bin();
  info.zero_doppler_bin = cfg.doppler_bins() / 2;
  info.boresight_bin = cfg.angle_bins() / 2;
  return info;
}

std::vector<std::complex<double>> frame_spectrum(const sim::RawFrame& frame,
                                                 const sim::RadarConfig& cfg,
                                                 const DspOptions& opts) {
  cfg.validate();
  if (frame.chirps != cfg.num_chirps || frame.samples != cfg.num_samples ||
      frame.antennas != cfg.num_virtual_antennas ||
      frame.data.size() != frame.chirps * frame.samples * frame.antennas) {
    fail(ErrorCode::ShapeMismatch, "frame shape (" + std::to_string(frame.chirps) + "," +
                                       std::to_string(frame.samples) + "," +
                                       std::to_string(frame.antennas) +
                                       ") does not match radar config");
  }
  const std::size_t nc = cfg.num_chirps;
  const std::size_t ns = cfg.num_samples;
  const std::size_t nv = cfg.num_virtual_antennas;
  const std::size_t nd = cfg.doppler_fft_size();
  const std::size_t na = cfg.angle_fft_size;

  const auto range_win = opts.window ? hann_window(ns) : std::vector<double>(ns, 1.0);
  const auto doppler_win = opts.window ? hann_window(nc) : std::vector<double>(nc, 1.0);

  // Stage 1: range FFT, result laid out (chirp, range, antenna).
  std::vector<std::complex<double>> stage(nc * ns * nv);
  {
    FftwBuffer buf(ns);
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t v = 0; v < nv; ++v) {
        for (std::size_t s = 0; s < ns; ++s) buf.data()[s] = frame.at(c, s, v) * range_win[s];
        run(buf);
        for (std::size_t s = 0; s < ns; ++s) stage[(c * ns + s) * nv + v] = buf.data()[s];
      }
    }
  }

  // Stage 2: doppler FFT over zero-padded chirps, centered. Layout (doppler, range, antenna).
  std::vector<std::complex<double>> rd(nd * ns * nv);
  {
    FftwBuffer buf(nd);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t v = 0; v < nv; ++v) {
        std::fill(buf.data(), buf.data() + nd, std::complex<double>{});
        for (std::size_t c = 0; c < nc; ++c) buf.data()[c] = stage[(c * ns + s) * nv + v] * doppler_win[c];
        run(buf);
        fftshift(std::span(buf.data(), nd));
        for (std::size_t d = 0; d < nd; ++d) rd[(d * ns + s) * nv + v] = buf.data()[d];
      }
    }
  }

  // Stage 3: angle FFT over zero-padded antennas, centered.
  std::vector<std::complex<double>> out(nd * ns * na);
  {
    FftwBuffer buf(na);
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t s = 0; s < ns; ++s) {
        std::fill(buf.data(), buf.data() + na, std::complex<double>{});
        std::copy_n(&rd[(d * ns + s) * nv], nv, buf.data());
        run(buf);
        fftshift(std::span(buf.data(), na));
        std::copy_n(buf.data(), na, &out[(d * ns + s) * na]);
      }
    }
  }
  return out;
}

RadarCube extract_cube(const sim::RawFrame& frame, const sim::RadarConfig& cfg,
                       const DspOptions& opts) {
  const auto spectrum = frame_spectrum(frame, cfg, opts);
  const std::size_t nd = cfg.doppler_fft_size();
  const std::size_t ns = cfg.num_samples;
  const std::size_t na = cfg.angle_fft_size;
  const std::size_t k = cfg.compression;

  RadarCube cube;
  cube.radar = frame.radar;
  cube.bins = bin_info(cfg);
  cube.data = Tensor<double>({nd / k, ns / k, na});
  // Compression after magnitude: each output cell sums a k x k block of
  // (doppler, range) magnitudes, which equals compress_bins applied per axis.
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t s = 0; s < ns; ++s) {
      const auto* src = &spectrum[(d * ns + s) * na];
      double* dst = &cube.data.at(d / k, s / k, 0);
      for (std::size_t a = 0; a < na; ++a) dst[a] += std::abs(src[a]);
    }
  }
  return cube;
}

}  // namespace cubedn::dsp
