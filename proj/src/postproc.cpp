#include "cubedn/postproc.hpp"

#include <algorithm>
#include <cmath>

#include "cubedn/metrics.hpp"

namespace cubedn::postproc {

namespace {

// Flat index helper over one class channel.
struct Channel {
  const double* data;
  GridDims g;

  Channel(const labels::ConfidenceCube& cube, DroneClass cls)
      : data(&cube.data.at(static_cast<std::size_t>(cls), 0, 0, 0)), g(cube.grid()) {}

  std::size_t index(int r, int a, int e) const {
    return (static_cast<std::size_t>(r) * g.a + static_cast<std::size_t>(a)) * g.e +
           static_cast<std::size_t>(e);
  }
  BinIndex bin(std::size_t i) const {
    const auto e = static_cast<int>(i % g.e);
    const auto a = static_cast<int>((i / g.e) % g.a);
    const auto r = static_cast<int>(i / (g.e * g.a));
    return {r, a, e};
  }
};

void check_class(const labels::ConfidenceCube& pred, DroneClass cls) {
  if (pred.data.rank() != 4 || static_cast<std::size_t>(cls) >= pred.data.dim(0)) {
    fail(ErrorCode::ShapeMismatch, "confidence cube " + shape_string(pred.data.shape()) +
                                       " has no channel for class " +
                                       std::string(to_string(cls)));
  }
}

// Marks every voxel within `radius` of `c` as removed.
void suppress(std::vector<char>& removed, const Channel& ch, const BinIndex& c, double radius) {
  const int reach = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  for (int r = std::max(0, c.r - reach); r <= std::min<int>(ch.g.r - 1, c.r + reach); ++r) {
    for (int a = std::max(0, c.a - reach); a <= std::min<int>(ch.g.a - 1, c.a + reach); ++a) {
      for (int e = std::max(0, c.e - reach); e <= std::min<int>(ch.g.e - 1, c.e + reach); ++e) {
        const int d2 = (r - c.r) * (r - c.r) + (a - c.a) * (a - c.a) + (e - c.e) * (e - c.e);
        if (d2 <= r2) removed[ch.index(r, a, e)] = 1;
      }
    }
  }
}

}  // namespace

double suppression_sigma(DroneClass cls) { return cls == DroneClass::Small ? 3.0 : 5.0; }

double suppression_radius(DroneClass cls) {
  return labels::support_radius(suppression_sigma(cls));
}

std::vector<Detection> lnms(const labels::ConfidenceCube& pred, DroneClass cls,
                            double candidate_floor) {
  check_class(pred, cls);
  const Channel ch(pred, cls);
  const std::size_t n = ch.g.voxels();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (ch.data[i] > candidate_floor) candidates.push_back(i);
  }
  // Flat index order equals lexicographic (r, a, e) order.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t x, std::size_t y) { return ch.data[x] > ch.data[y]; });

  std::vector<char> removed(n, 0);
  std::vector<Detection> out;
  const double radius = suppression_radius(cls);
  for (std::size_t i : candidates) {
    if (removed[i]) continue;
    const BinIndex b = ch.bin(i);
    out.push_back({cls, b, ch.data[i], {}});
    suppress(removed, ch, b, radius);
  }
  return out;
}

std::vector<Detection> lnms_reference(const labels::ConfidenceCube& pred, DroneClass cls,
                                      double candidate_floor) {
  check_class(pred, cls);
  const Channel ch(pred, cls);
  const std::size_t n = ch.g.voxels();
  std::vector<char> removed(n, 0);
  std::vector<Detection> out;
  const double radius = suppression_radius(cls);
  while (true) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (removed[i] || !(ch.data[i] > candidate_floor)) continue;
      if (best == n || ch.data[i] > ch.data[best]) best = i;
    }
    if (best == n) break;
    const BinIndex b = ch.bin(best);
    out.push_back({cls, b, ch.data[best], {}});
    suppress(removed, ch, b, radius);
  }
  return out;
}

double calculate_overlap_ratio(const Tensor<double>& expected, const Tensor<double>& observed,
                               double threshold) {
  if (expected.shape() != observed.shape()) {
    fail(ErrorCode::ShapeMismatch, "overlap ratio: " + shape_string(expected.shape()) + " vs " +
                                       shape_string(observed.shape()));
  }
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const bool x = expected[i] > threshold;
    const bool y = observed[i] > threshold;
    a += x;
    b += y;
    both += x && y;
  }
  const std::size_t total = a + b - both;
  return total > 0 ? static_cast<double>(both) / static_cast<double>(total) : 0.0;
}

Tensor<double> crop(const labels::ConfidenceCube& cube, DroneClass cls, const BinIndex& center) {
  check_class(cube, cls);
  constexpr int w = 2 * kCropHalfWidth + 1;
  Tensor<double> out({w, w, w});
  const GridDims g = cube.grid();
  const auto c = static_cast<std::size_t>(cls);
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < w; ++k) {
        const BinIndex b{center.r + i - kCropHalfWidth, center.a + j - kCropHalfWidth,
                         center.e + k - kCropHalfWidth};
        if (g.contains(b)) {
          out.at(i, j, k) = cube.data.at(c, b.r, b.a, b.e);
        }
      }
    }
  }
  return out;
}

Tensor<double> expected_mask(GridDims grid, DroneClass cls, const BinIndex& center) {
  constexpr int w = 2 * kCropHalfWidth + 1;
  Tensor<double> out({w, w, w});
  const double sigma = labels::label_sigma(cls);
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < w; ++k) {
        const BinIndex b{center.r + i - kCropHalfWidth, center.a + j - kCropHalfWidth,
                         center.e + k - kCropHalfWidth};
        if (!grid.contains(b)) continue;
        const int di = i - kCropHalfWidth, dj = j - kCropHalfWidth, dk = k - kCropHalfWidth;
        out.at(i, j, k) = labels::mask_value(static_cast<double>(di * di + dj * dj + dk * dk), sigma);
      }
    }
  }
  return out;
}

std::vector<Detection> filter_outliers(const labels::ConfidenceCube& pred,
                                       const std::vector<Detection>& detections,
                                       double min_ratio) {
  std::vector<Detection> kept;
  for (const auto& det : detections) {
    const auto observed = crop(pred, det.cls, det.bins);
    const auto expected = expected_mask(pred.grid(), det.cls, det.bins);
    if (calculate_overlap_ratio(expected, observed) >= min_ratio) kept.push_back(det);
  }
  return kept;
}

void attach_cartesian(std::vector<Detection>& detections, const sim::RadarConfig& cfg) {
  for (auto& det : detections) {
    det.cartesian = metrics::polar_bins_to_cartesian(det.bins.r, det.bins.a, det.bins.e, cfg);
  }
}

void Params::validate() const {
  if (!(candidate_floor >= 0 && candidate_floor < 1)) {
    fail(ErrorCode::Config, "postproc.candidate_floor must be in [0, 1)");
  }
  if (!(min_overlap >= 0 && min_overlap <= 1)) {
    fail(ErrorCode::Config, "postproc.min_overlap must be in [0, 1]");
  }
}

std::vector<Detection> detect(const labels::ConfidenceCube& pred, const sim::RadarConfig& cfg,
                              const Params& params) {
  std::vector<Detection> out;
  for (DroneClass cls : kAllClasses) {
    auto kept = filter_outliers(pred, lnms(pred, cls, params.candidate_floor), params.min_overlap);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  attach_cartesian(out, cfg);
  return out;
}

}  // namespace cubedn::postproc
