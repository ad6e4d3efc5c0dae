#pragma once

#include <complex>
#include <span>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/sim.hpp"

namespace cubedn::dsp {

// Physical meaning of the cube axes.
struct BinInfo {
  double range_m_per_bin = 0.0;
  double doppler_mps_per_bin = 0.0;
  double angle_sine_per_bin = 0.0;
  std::size_t zero_doppler_bin = 0;  // D/2 after fftshift
  std::size_t boresight_bin = 0;     // angle bins/2 after fftshift
  friend bool operator==(const BinInfo&, const BinInfo&) = default;
};

BinInfo bin_info(const sim::RadarConfig& cfg);

// Magnitude cube of one radar, shape (doppler, range, angle). The angle axis is
// azimuth for the horizontal radar and elevation for the vertical one.
struct RadarCube {
  RadarId radar = RadarId::Horizontal;
  Tensor<double> data;
  BinInfo bins;

  std::size_t doppler_bins() const { return data.dim(0); }
  std::size_t range_bins() const { return data.dim(1); }
  std::size_t angle_bins() const { return data.dim(2); }
};

struct DspOptions {
  bool window = true;  // Hann on range and doppler axes
};

// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N), computed in
// place. Any length is accepted.
void fft(std::span<std::complex<double>> x);

std::vector<double> hann_window(std::size_t n);

// Moves the zero-frequency bin to index n/2.
template <class T>
void fftshift(std::span<T> x) {
  std::rotate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>((x.size() + 1) / 2), x.end());
}

// Sums adjacent groups of `factor` bins. Length must be divisible by factor.
std::vector<double> compress_bins(std::span<const double> spectrum, std::size_t factor = 2);

// Range FFT over samples, doppler FFT over chirps (zero-padded to a power of
// two, zero velocity centered), angle FFT over antennas zero-padded to
// angle_fft_size and centered; magnitude; then range and doppler compressed.
RadarCube extract_cube(const sim::RawFrame& frame, const sim::RadarConfig& cfg,
                       const DspOptions& opts = {});

// Complex spectrum before magnitude and compression, shape
// (doppler_fft_size, num_samples, angle_fft_size). Exposed for verification.
std::vector<std::complex<double>> frame_spectrum(const sim::RawFrame& frame,
                                                 const sim::RadarConfig& cfg,
                                                 const DspOptions& opts = {});

}  // namespace cubedn::dsp
