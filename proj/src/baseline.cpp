#include "cubedn/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cubedn/metrics.hpp"

namespace cubedn::baseline {

namespace {

void check_window(const dsp::RadarCube& cube, const CfarParams& p) {
  if (cube.data.rank() != 3) fail(ErrorCode::ShapeMismatch, "CFAR expects a rank-3 radar cube");
  if (p.train == 0) fail(ErrorCode::InvalidArgument, "CFAR needs at least one training cell");
  if (!(p.peak_fraction >= 0.0 && p.peak_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "CFAR peak fraction must lie in [0, 1)");
  }
  if (2 * (p.guard + p.train) + 1 > cube.range_bins()) {
    fail(ErrorCode::WindowTooLarge, "CFAR window of " + std::to_string(2 * (p.guard + p.train) + 1) +
                                        " cells exceeds " + std::to_string(cube.range_bins()) +
                                        " range bins");
  }
}

double cube_max(const dsp::RadarCube& cube) {
  const auto& v = cube.data.values();
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

std::vector<RadarPoint> cfar_detect(const dsp::RadarCube& cube, const CfarParams& p) {
  check_window(cube, p);
  const std::size_t nd = cube.doppler_bins(), nr = cube.range_bins(), na = cube.angle_bins();
  const auto g = static_cast<std::ptrdiff_t>(p.guard);
  const auto t = static_cast<std::ptrdiff_t>(p.train);
  const double floor = p.peak_fraction * cube_max(cube);
  std::vector<RadarPoint> out;
  std::vector<double> line(nr), prefix(nr + 1);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t r = 0; r < nr; ++r) line[r] = cube.data.at(d, r, a);
      prefix[0] = 0.0;
      for (std::size_t r = 0; r < nr; ++r) prefix[r + 1] = prefix[r] + line[r];
      auto sum = [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {  // [lo, hi] clipped
        lo = std::max<std::ptrdiff_t>(lo, 0);
        hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(nr) - 1);
        if (hi < lo) return std::pair{0.0, std::ptrdiff_t{0}};
        return std::pair{prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)],
                         hi - lo + 1};
      };
      for (std::size_t r = 0; r < nr; ++r) {
        const auto c = static_cast<std::ptrdiff_t>(r);
        const auto [ls, ln] = sum(c - g - t, c - g - 1);
        const auto [rs, rn] = sum(c + g + 1, c + g + t);
        const double mean = (ls + rs) / static_cast<double>(ln + rn);
        if (line[r] > p.scale * mean && line[r] >= floor) out.push_back({d, r, a, line[r], cube.radar});
      }
    }
  }
  return out;
}

std::vector<RadarPoint> cfar_detect_reference(const dsp::RadarCube& cube, const CfarParams& p) {
  check_window(cube, p);
  const auto nr = static_cast<long>(cube.range_bins());
  double peak = 0.0;
  for (double v : cube.data.values()) peak = std::max(peak, v);
  std::vector<RadarPoint> out;
  for (std::size_t d = 0; d < cube.doppler_bins(); ++d) {
    for (std::size_t a = 0; a < cube.angle_bins(); ++a) {
      for (long r = 0; r < nr; ++r) {
        double total = 0.0;
        long count = 0;
        for (long k = r - static_cast<long>(p.guard + p.train); k <= r + static_cast<long>(p.guard + p.train); ++k) {
          if (k < 0 || k >= nr || std::abs(k - r) <= static_cast<long>(p.guard)) continue;
          total += cube.data.at(d, static_cast<std::size_t>(k), a);
          ++count;
        }
        const double cell = cube.data.at(d, static_cast<std::size_t>(r), a);
        if (cell > p.scale * (total / static_cast<double>(count)) && cell >= p.peak_fraction * peak) {
          out.push_back({d, static_cast<std::size_t>(r), a, cell, cube.radar});
        }
      }
    }
  }
  return out;
}

std::vector<Cluster> dbscan(const std::vector<RadarPoint>& points, const ClusterParams& params) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& p = points[x];
    const auto& q = points[y];
    if (p.r != q.r) return p.r < q.r;
    if (p.angle != q.angle) return p.angle < q.angle;
    if (p.d != q.d) return p.d < q.d;
    return p.magnitude < q.magnitude;
  });

  const double eps2 = params.eps * params.eps;
  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    const auto& p = points[order[i]];
    for (std::size_t j = 0; j < order.size(); ++j) {
      const auto& q = points[order[j]];
      const double dr = static_cast<double>(p.r) - static_cast<double>(q.r);
      const double da = static_cast<double>(p.angle) - static_cast<double>(q.angle);
      if (dr * dr + da * da <= eps2) out.push_back(j);
    }
    return out;
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(order.size(), kUnvisited);
  int next = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (label[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (seeds.size() < params.min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int id = next++;
    label[i] = id;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const std::size_t j = seeds[k];
      if (label[j] == kNoise) label[j] = id;
      if (label[j] != kUnvisited) continue;
      label[j] = id;
      auto more = neighbours(j);
      if (more.size() >= params.min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
  }

  std::vector<Cluster> clusters(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (label[i] < 0) continue;
    auto& c = clusters[static_cast<std::size_t>(label[i])];
    const auto& p = points[order[i]];
    c.members.push_back(order[i]);
    c.weight += p.magnitude;
    c.range += p.magnitude * static_cast<double>(p.r);
    c.angle += p.magnitude * static_cast<double>(p.angle);
  }
  for (auto& c : clusters) {
    if (c.weight > 0) {
      c.range /= c.weight;
      c.angle /= c.weight;
    }
    std::sort(c.members.begin(), c.members.end());
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& x, const Cluster& y) {
    if (x.members.size() != y.members.size()) return x.members.size() > y.members.size();
    if (x.weight != y.weight) return x.weight > y.weight;
    if (x.range != y.range) return x.range < y.range;
    return x.angle < y.angle;
  });
  return clusters;
}

namespace {

std::vector<RadarPoint> gate(const std::vector<RadarPoint>& pts, const ClusterParams& params,
                             std::size_t zero_doppler_bin) {
  if (!params.doppler_gate) return pts;
  std::vector<RadarPoint> out;
  for (const auto& p : pts) {
    if (p.d != zero_doppler_bin) out.push_back(p);
  }
  return out;
}

}  // namespace

Estimate cluster_points(const std::vector<RadarPoint>& horizontal,
                        const std::vector<RadarPoint>& vertical, const ClusterParams& params,
                        std::size_t zero_doppler_bin) {
  const auto h = dbscan(gate(horizontal, params, zero_doppler_bin), params);
  const auto v = dbscan(gate(vertical, params, zero_doppler_bin), params);
  if (h.empty() || v.empty()) {
    fail(ErrorCode::NoCluster, std::string("no cluster with at least ") +
                                   std::to_string(params.min_pts) + " points in the " +
                                   (h.empty() ? "horizontal" : "vertical") + " radar");
  }
  return {0.5 * (h.front().range + v.front().range), h.front().angle, v.front().angle};
}

std::optional<postproc::Detection> detect(const dsp::RadarCube& horizontal,
                                          const dsp::RadarCube& vertical,
                                          const sim::RadarConfig& cfg,
                                          const BaselineParams& params) {
  const auto hp = cfar_detect(horizontal, params.cfar);
  const auto vp = cfar_detect(vertical, params.cfar);
  Estimate est;
  try {
    est = cluster_points(hp, vp, params.cluster, horizontal.bins.zero_doppler_bin);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoCluster) return std::nullopt;
    throw;
  }
  // Compressed range bin c pools native bins k c .. k c + k - 1, whose mean
  // sits (k - 1) / 2k of a compressed bin above c.
  const double k = static_cast<double>(cfg.compression);
  const double r = est.r + (k - 1.0) / (2.0 * k);
  postproc::Detection det;
  det.cls = DroneClass::Small;
  det.bins = {static_cast<int>(std::lround(r)), static_cast<int>(std::lround(est.a)),
              static_cast<int>(std::lround(est.e))};
  det.confidence = 1.0;
  det.cartesian = metrics::polar_bins_to_cartesian(r, est.a, est.e, cfg);
  return det;
}

}  // namespace cubedn::baseline
