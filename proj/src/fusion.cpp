#include "cubedn/fusion.hpp"

#include <algorithm>

namespace cubedn::fusion {

FusedCube fuse(const dsp::RadarCube& horizontal, const dsp::RadarCube& vertical,
               Normalization norm, double reference) {
  const auto& h = horizontal.data;
  const auto& v = vertical.data;
  if (h.rank() != 3 || v.rank() != 3) {
    fail(ErrorCode::ShapeMismatch, "fuse expects rank-3 radar cubes");
  }
  if (h.dim(0) != v.dim(0) || h.dim(1) != v.dim(1)) {
    fail(ErrorCode::DimMismatch, "doppler/range dims differ: " + shape_string(h.shape()) +
                                     " vs " + shape_string(v.shape()));
  }
  const std::size_t nd = h.dim(0);
  const std::size_t nr = h.dim(1);
  const std::size_t na = h.dim(2);
  const std::size_t ne = v.dim(2);

  FusedCube out;
  out.horizontal_bins = horizontal.bins;
  out.vertical_bins = vertical.bins;
  out.data = Tensor<double>({nd, nr, na, ne});
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t r = 0; r < nr; ++r) {
      const double* hrow = &h.at(d, r, 0);
      const double* vrow = &v.at(d, r, 0);
      double* dst = &out.data.at(d, r, 0, 0);
      for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t e = 0; e < ne; ++e) dst[a * ne + e] = hrow[a] * vrow[e];
      }
    }
  }
  if (norm == Normalization::GlobalMax) normalize_global_max(out.data);
  if (norm == Normalization::Reference) {
    if (!(reference > 0)) fail(ErrorCode::InvalidArgument, "reference normalization needs a positive divisor");
    for (auto& x : out.data.values()) x /= reference;
  }
  return out;
}

void normalize_global_max(Tensor<double>& data) {
  if (data.empty()) return;
  const double peak = *std::max_element(data.values().begin(), data.values().end());
  if (!(peak > 0)) return;
  for (auto& x : data.values()) x /= peak;
}

}  // namespace cubedn::fusion
