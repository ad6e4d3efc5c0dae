#include <doctest.h>

#include <cmath>

#include "cubedn/metrics.hpp"
#include "test_util.hpp"

using namespace cubedn;
using namespace cubedn::metrics;

namespace {

const auto kDesk = sim::RadarConfig::desk_scale();

GroundTruth gt_at(BinIndex b, DroneClass cls = DroneClass::Small) {
  GroundTruth g;
  g.cls = cls;
  g.polar = {double(b.r), double(b.a), double(b.e), cls};
  g.position = polar_bins_to_cartesian(b.r, b.a, b.e, kDesk);
  return g;
}

postproc::Detection pred_at(BinIndex b, double conf, DroneClass cls = DroneClass::Small) {
  postproc::Detection d{cls, b, conf, {}};
  d.cartesian = polar_bins_to_cartesian(b.r, b.a, b.e, kDesk);
  return d;
}

// Random frames: ground truths with predictions jittered by up to `jitter`
// bins, some dropped, plus random false alarms.
std::vector<FrameEval> random_frames(std::mt19937_64& g, int jitter) {
  std::vector<FrameEval> frames;
  for (std::size_t f = 0; f < 20; ++f) {
    FrameEval fe;
    fe.frame_id = f;
    const auto n = testutil::uniform_int(g, 0, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cls = testutil::uniform(g) < 0.5 ? DroneClass::Small : DroneClass::Large;
      const BinIndex b{int(testutil::uniform_int(g, 6, 25)), int(testutil::uniform_int(g, 6, 9)), int(testutil::uniform_int(g, 6, 9))};
      fe.gts.push_back(gt_at(b, cls));
      if (testutil::uniform(g) < 0.8) {
        auto j = [&] { return int(testutil::uniform_int(g, 0, 2 * jitter)) - jitter; };
        fe.preds.push_back(pred_at({b.r + j(), b.a + j(), b.e + j()}, testutil::uniform(g, 0.2, 1.0), cls));
      }
    }
    const auto fa = testutil::uniform_int(g, 0, 2);
    for (std::size_t i = 0; i < fa; ++i) {
      const auto cls = testutil::uniform(g) < 0.5 ? DroneClass::Small : DroneClass::Large;
      fe.preds.push_back(pred_at({int(testutil::uniform_int(g, 0, 31)), int(testutil::uniform_int(g, 0, 15)),
                                  int(testutil::uniform_int(g, 0, 15))},
                                 testutil::uniform(g, 0.05, 1.0), cls));
    }
    frames.push_back(fe);
  }
  return frames;
}

}  // namespace

TEST_CASE("polar to cartesian conversion") {
  const auto b = polar_bins_to_cartesian(20, 8, 8, kDesk);
  CHECK(b.x == doctest::Approx(0.0));
  CHECK(b.y == doctest::Approx(2.32));
  CHECK(b.z == doctest::Approx(0.0));
  const auto p = polar_bins_to_cartesian(10, 12, 4, kDesk);
  const double range = 1.16, az = std::asin(0.5), el = std::asin(-0.5);
  CHECK(p.x == doctest::Approx(range * std::cos(el) * std::sin(az)));
  CHECK(p.y == doctest::Approx(range * std::cos(el) * std::cos(az)));
  CHECK(p.z == doctest::Approx(range * std::sin(el)));
}

TEST_CASE("round trip through bins stays within half a bin") {
  auto g = testutil::rng(61);
  for (int i = 0; i < 200; ++i) {
    const Vec3 pos{testutil::uniform(g, -1.5, 1.5), testutil::uniform(g, 0.5, 3.0), testutil::uniform(g, -1.0, 1.0)};
    labels::PolarPosition pp;
    try {
      pp = labels::to_polar_bins(pos, DroneClass::Small, kDesk);
    } catch (const Error&) {
      continue;
    }
    const auto back = polar_bins_to_cartesian(pp.r, pp.a, pp.e, kDesk);
    CHECK(norm(back - pos) < 1e-9);
    const auto rb = pp.rounded();
    const auto q = labels::to_polar_bins(polar_bins_to_cartesian(rb.r, rb.a, rb.e, kDesk), DroneClass::Small, kDesk);
    CHECK(std::abs(q.r - pp.r) <= 0.5 + 1e-9);
    CHECK(std::abs(q.a - pp.a) <= 0.5 + 1e-9);
    CHECK(std::abs(q.e - pp.e) <= 0.5 + 1e-9);
  }
}

TEST_CASE("one azimuth bin costs more meters far away") {
  const auto full = sim::RadarConfig::full_scale();
  auto err = [&](double r) {
    return norm(polar_bins_to_cartesian(r, 17, 16, full) - polar_bins_to_cartesian(r, 16, 16, full));
  };
  CHECK(err(13.0 / 0.116) >= 4.0 * err(2.0 / 0.116));
}

TEST_CASE("matching follows the Chebyshev threshold") {
  const std::vector<GroundTruth> gts{gt_at({10, 8, 8})};
  const auto exact = match({pred_at({10, 8, 8}, 0.9)}, gts, 1);
  CHECK(exact.tp[0] == 1);
  CHECK(exact.fp[0] == 0);
  const auto off1 = match({pred_at({12, 8, 8}, 0.9)}, gts, 1);
  CHECK(off1.tp[0] == 0);
  CHECK(off1.fp[0] == 1);
  CHECK(off1.fn[0] == 1);
  const auto off3 = match({pred_at({12, 8, 8}, 0.9)}, gts, 3);
  CHECK(off3.tp[0] == 1);
  CHECK(off3.pairs.at(0).offset == BinIndex{2, 0, 0});
  const auto two = match({pred_at({10, 8, 8}, 0.9), pred_at({11, 8, 8}, 0.8)}, gts, 3);
  CHECK(two.tp[0] == 1);
  CHECK(two.fp[0] == 1);
  CHECK(two.pred_is_tp == std::vector<bool>{true, false});
  const auto wrong_class = match({pred_at({10, 8, 8}, 0.9, DroneClass::Large)}, gts, 3);
  CHECK(wrong_class.tp[1] == 0);
  CHECK(wrong_class.fp[1] == 1);
  CHECK(wrong_class.fn[0] == 1);
  CHECK(match({pred_at({10, 8, 8}, 0.9, DroneClass::Large)}, gts, 3, false).total_tp() == 1);
  CHECK(ole_distance({0, 0, 0}, {1, -3, 2}) == 3);
}

TEST_CASE("match counts are consistent on random frames") {
  auto g = testutil::rng(62);
  for (const auto& f : random_frames(g, 2)) {
    for (int ole = 1; ole <= 5; ++ole) {
      const auto m = match(f.preds, f.gts, ole);
      CHECK(m.total_tp() + m.total_fn() == f.gts.size());
      CHECK(m.total_tp() + m.total_fp() == f.preds.size());
      auto shuffled = f.preds;
      std::shuffle(shuffled.begin(), shuffled.end(), g);
      CHECK(match(shuffled, f.gts, ole).total_tp() == m.total_tp());
    }
  }
}

TEST_CASE("AP and AR examples") {
  std::vector<FrameEval> perfect{{0, {pred_at({10, 8, 8}, 1.0)}, {gt_at({10, 8, 8})}}};
  auto v = ap_ar(perfect, 1, DroneClass::Small);
  CHECK(v.ap == 1.0);
  CHECK(v.ar == 1.0);
  std::vector<FrameEval> none{{0, {}, {gt_at({10, 8, 8})}}};
  v = ap_ar(none, 3, DroneClass::Small);
  CHECK(v.ap == 0.0);
  CHECK(v.ar == 0.0);
  std::vector<FrameEval> tp_fp{{0, {pred_at({10, 8, 8}, 0.9), pred_at({20, 8, 8}, 0.8)}, {gt_at({10, 8, 8})}}};
  v = ap_ar(tp_fp, 3, DroneClass::Small);
  CHECK(v.ap == 1.0);
  CHECK(v.ar == doctest::Approx(0.9));  // recall 1 for every threshold up to 0.9
  // FP ranked above the TP halves the precision at full recall.
  std::vector<FrameEval> fp_tp{{0, {pred_at({10, 8, 8}, 0.7), pred_at({20, 8, 8}, 0.8)}, {gt_at({10, 8, 8})}}};
  CHECK(ap_ar(fp_tp, 3, DroneClass::Small).ap == doctest::Approx(0.5));
  CHECK(ap_ar(fp_tp, 3, DroneClass::Small).ar == doctest::Approx(0.7));
  try {
    ap_ar(none, 3, DroneClass::Large);
    FAIL("expected UndefinedMetric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UndefinedMetric);
  }
  CHECK_THROWS_AS(ap_ar(std::vector<FrameEval>{}, 3, DroneClass::Small), Error);
}

TEST_CASE("AP and AR never increase as OLE tightens") {
  auto g = testutil::rng(63);
  for (int trial = 0; trial < 30; ++trial) {
    const auto frames = random_frames(g, 3);
    const auto rep = evaluate(frames, "random");
    for (int ole = 2; ole <= 5; ++ole) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& lo = rep.row(ole - 1).per_class[c];
        const auto& hi = rep.row(ole).per_class[c];
        REQUIRE(lo.has_value() == hi.has_value());
        if (!lo) continue;
        CHECK(lo->ap <= hi->ap + 1e-12);
        CHECK(lo->ar <= hi->ar + 1e-12);
        CHECK((lo->ap >= 0 && hi->ap <= 1 && hi->ar <= 1));
      }
    }
  }
}

TEST_CASE("localization bands") {
  MatchPair p;
  p.cartesian_error = 0.5;
  p.gt_range = 5.0;
  const std::vector<MatchPair> pairs{p};
  const auto rep = localization_report(pairs);
  CHECK(rep.count == 1);
  CHECK(rep.mean_error == 0.5);
  REQUIRE(rep.band_for(5.0) != nullptr);
  CHECK(rep.band_for(5.0)->lo == 3.0);
  CHECK(rep.band_for(5.0)->mean_error == 0.5);
  CHECK(rep.bands[0].count == 0);
  CHECK(rep.band_for(15.0) == &rep.bands.back());
  CHECK(rep.band_for(15.1) == nullptr);
  CHECK(localization_report(std::vector<MatchPair>{}).mean_error == 0.0);
}

TEST_CASE("evaluate on perfect predictions reports zero error") {
  std::vector<FrameEval> frames;
  for (std::size_t i = 0; i < 5; ++i) {
    const BinIndex b{int(5 + i * 4), 8, 7};
    frames.push_back({i, {pred_at(b, 1.0, DroneClass::Large), pred_at({2, 3, 3}, 1.0)}, {gt_at(b, DroneClass::Large), gt_at({2, 3, 3})}});
  }
  const auto rep = evaluate(frames, "oracle");
  for (const auto& row : rep.rows) {
    CHECK(row.combined->ap == 1.0);
    CHECK(row.combined->ar == 1.0);
  }
  CHECK(rep.localization.count == 10);
  CHECK(rep.localization.mean_error == doctest::Approx(0.0));
  CHECK(rep.to_json().find("\"method\": \"oracle\"") != std::string::npos);
  CHECK(rep.to_delimited().find("oracle,large,AP,3,1.0000") != std::string::npos);
  CHECK(rep.to_text().find("combined") != std::string::npos);
  const std::vector<EvalReport> both{rep, rep};
  CHECK(comparison_table(both).rfind("method,class,metric,threshold,value\n", 0) == 0);
}
