#pragma once

#include "cubedn/common.hpp"
#include "cubedn/dsp.hpp"

namespace cubedn::fusion {

// Doppler x range x azimuth x elevation cube.
struct FusedCube {
  Tensor<double> data;
  dsp::BinInfo horizontal_bins;
  dsp::BinInfo vertical_bins;

  std::size_t doppler_bins() const { return data.dim(0); }
  std::size_t range_bins() const { return data.dim(1); }
  std::size_t azimuth_bins() const { return data.dim(2); }
  std::size_t elevation_bins() const { return data.dim(3); }
  GridDims grid() const { return {range_bins(), azimuth_bins(), elevation_bins()}; }
};

enum class Normalization {
  None,
  GlobalMax,  // divide by the frame maximum; all-zero frames stay zero
  Reference,  // divide by a fixed per-configuration constant; keeps absolute level
};

// out[d,r,a,e] = h[d,r,a] * v[d,r,e]. Throws DimMismatch if the doppler or
// range extents differ. `reference` is the divisor for Normalization::Reference
// (see pipeline::reference_peak) and must be positive.
FusedCube fuse(const dsp::RadarCube& horizontal, const dsp::RadarCube& vertical,
               Normalization norm = Normalization::GlobalMax, double reference = 1.0);

void normalize_global_max(Tensor<double>& data);

}  // namespace cubedn::fusion
