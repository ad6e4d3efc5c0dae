#include <doctest.h>

#include <cmath>

#include "cubedn/baseline.hpp"
#include "cubedn/pipeline.hpp"
#include "test_util.hpp"

using namespace cubedn;
using namespace cubedn::baseline;

namespace {

dsp::RadarCube cube_of(Tensor<double> t, RadarId id = RadarId::Horizontal) {
  dsp::RadarCube c;
  c.radar = id;
  c.data = std::move(t);
  return c;
}

bool same(const std::vector<RadarPoint>& x, const std::vector<RadarPoint>& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].d != y[i].d || x[i].r != y[i].r || x[i].angle != y[i].angle || x[i].magnitude != y[i].magnitude) return false;
  }
  return true;
}

RadarPoint pt(std::size_t r, std::size_t a, double m, RadarId id = RadarId::Horizontal) { return {8, r, a, m, id}; }

}  // namespace

TEST_CASE("cfar examples") {
  CHECK(cfar_detect(cube_of(Tensor<double>({2, 32, 2}, 3.0)), {2, 8, 1.5}).empty());

  Tensor<double> impulse({2, 32, 2});
  impulse.at(1, 10, 1) = 5.0;
  const auto hits = cfar_detect(cube_of(impulse));
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].d == 1);
  CHECK(hits[0].r == 10);
  CHECK(hits[0].angle == 1);
  CHECK(hits[0].magnitude == 5.0);

  for (std::size_t guard : {0u, 1u, 3u}) {
    for (std::size_t train : {1u, 4u, 8u}) {
      Tensor<double> bg({1, 32, 1}, 1.0);
      bg.at(0, 16, 0) = 10.0;
      const auto p = cfar_detect(cube_of(bg), {guard, train, 5.0});
      REQUIRE(p.size() == 1);
      CHECK(p[0].r == 16);
    }
  }
}

TEST_CASE("cfar matches the sliding-window reference") {
  auto g = testutil::rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    const auto nr = testutil::uniform_int(g, 11, 40);
    auto t = testutil::random_tensor(g, {testutil::uniform_int(g, 1, 4), nr, testutil::uniform_int(g, 1, 4)});
    for (auto& v : t.values()) v = std::pow(v, 6) * 10;  // heavy tail gives detections
    CfarParams p{testutil::uniform_int(g, 0, 2), testutil::uniform_int(g, 1, 3), testutil::uniform(g, 1.5, 4),
                 trial % 3 ? testutil::uniform(g, 0.0, 0.3) : 0.0};
    CHECK(same(cfar_detect(cube_of(t), p), cfar_detect_reference(cube_of(t), p)));
  }
}

TEST_CASE("cfar rejects oversized or empty windows") {
  try {
    cfar_detect(cube_of(Tensor<double>({1, 20, 1})), {2, 8, 4.0});
    FAIL("expected WindowTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowTooLarge);
  }
  CHECK_THROWS_AS(cfar_detect(cube_of(Tensor<double>({1, 32, 1})), {2, 0, 4.0}), Error);
}

TEST_CASE("clustering examples") {
  try {
    cluster_points({}, {});
    FAIL("expected NoCluster");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCluster);
  }

  const std::vector<RadarPoint> blob{pt(10, 5, 1), pt(11, 5, 2), pt(10, 6, 1), pt(11, 6, 4), pt(12, 5, 2)};
  const auto c = dbscan(blob, {});
  REQUIRE(c.size() == 1);
  CHECK(c[0].members.size() == 5);
  CHECK(c[0].weight == 10.0);
  CHECK(c[0].range == doctest::Approx((10 + 22 + 10 + 44 + 24) / 10.0));
  CHECK(c[0].angle == doctest::Approx((5 + 10 + 6 + 24 + 10) / 10.0));

  auto two = blob;
  for (auto p : {pt(25, 12, 9), pt(26, 12, 9), pt(25, 13, 9)}) two.push_back(p);
  const auto cs = dbscan(two, {});
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].members.size() == 5);
  CHECK(cs[0].range == doctest::Approx(c[0].range));
  CHECK(cs[1].members.size() == 3);

  std::vector<RadarPoint> v_blob;
  for (const auto& p : blob) v_blob.push_back({p.d, p.r, p.angle + 2, p.magnitude, RadarId::Vertical});
  const auto est = cluster_points(two, v_blob);
  CHECK(est.r == doctest::Approx(c[0].range));
  CHECK(est.a == doctest::Approx(c[0].angle));
  CHECK(est.e == doctest::Approx(c[0].angle + 2));

  CHECK(dbscan({pt(1, 1, 1), pt(9, 9, 1)}, {}).empty());
}

TEST_CASE("clustering ignores input order") {
  auto g = testutil::rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RadarPoint> pts;
    for (int i = 0; i < 30; ++i) {
      pts.push_back(pt(testutil::uniform_int(g, 0, 20), testutil::uniform_int(g, 0, 10), double(testutil::uniform_int(g, 1, 3))));
    }
    const auto ref = dbscan(pts, {});
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    const auto got = dbscan(shuffled, {});
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].members.size() == ref[i].members.size());
      CHECK(got[i].range == ref[i].range);
      CHECK(got[i].angle == ref[i].angle);
    }
  }
}

TEST_CASE("doppler gate drops the zero-doppler line") {
  std::vector<RadarPoint> pts{pt(10, 5, 1), pt(11, 5, 1), pt(10, 6, 1)};
  for (auto& p : pts) p.d = 4;
  ClusterParams gated;
  gated.doppler_gate = true;
  CHECK_NOTHROW(cluster_points(pts, pts, {}, 4));
  CHECK_THROWS_AS(cluster_points(pts, pts, gated, 4), Error);
}

TEST_CASE("noiseless single targets land on the exact range bin") {
  const auto cfg = sim::RadarConfig::desk_scale();
  auto g = testutil::rng(73);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    sim::Scene scene;
    sim::Target t;
    t.cls = i % 2 ? DroneClass::Large : DroneClass::Small;
    t.rcs = sim::default_rcs(t.cls);
    // Bin-centre ranges: near a rounding boundary the "exact" bin is a coin flip.
    const double range = static_cast<double>(testutil::uniform_int(g, 5, 29)) * cfg.range_resolution_m;
    const double az = testutil::uniform(g, -0.5, 0.5), el = testutil::uniform(g, -0.4, 0.4);
    t.position = {range * std::cos(el) * std::sin(az), range * std::cos(el) * std::cos(az), range * std::sin(el)};
    t.velocity = {0, testutil::uniform(g, -0.4, 0.4), 0};
    scene.targets.push_back(t);
    const auto frame = pipeline::process(scene, cfg);
    const auto det = detect(frame.horizontal, frame.vertical, cfg);
    REQUIRE(det.has_value());
    const auto want = frame.truth.at(0).polar.rounded();
    CHECK(det->bins.r == want.r);
    CHECK(std::abs(det->bins.a - want.a) <= 1);
    CHECK(std::abs(det->bins.e - want.e) <= 1);
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("peak fraction keeps leakage out of noiseless cubes") {
  const auto cfg = sim::RadarConfig::desk_scale();
  sim::Scene scene;
  scene.targets.push_back({DroneClass::Small, {0.3, 2.0, -0.2}, {0, 0.2, 0}, 1.0});
  const auto frame = pipeline::process(scene, cfg);
  CfarParams open;
  open.peak_fraction = 0.0;
  const auto all = cfar_detect(frame.horizontal, open);
  const auto kept = cfar_detect(frame.horizontal);
  CHECK(kept.size() * 10 < all.size());
  double peak = 0.0;
  for (double v : frame.horizontal.data.values()) peak = std::max(peak, v);
  for (const auto& p : kept) CHECK(p.magnitude >= 0.1 * peak);
  CHECK_THROWS_AS(cfar_detect(frame.horizontal, {2, 8, 4.0, 1.0}), Error);
}

TEST_CASE("empty frames give no baseline detection") {
  const auto cfg = sim::RadarConfig::desk_scale();
  const auto frame = pipeline::process(sim::Scene{}, cfg);
  CHECK_FALSE(detect(frame.horizontal, frame.vertical, cfg).has_value());
}
