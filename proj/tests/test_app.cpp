#include <doctest.h>

#include "cubedn/app.hpp"
#include "test_util.hpp"

using namespace cubedn;

namespace {

config::RunConfig small_run() {
  auto cfg = config::parse(R"({
    "seed": 5,
    "scenario": {"sequences": 10, "frames_per_sequence": 2, "seed": 5},
    "split": {"val_fraction": 0.2, "test_fraction": 0.2},
    "train": {"optimizer": "adam", "epochs": 1, "batch_size": 4}
  })");
  return cfg;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("config parsing reports unknown keys by name") {
  const auto cfg = config::parse("{}");
  CHECK(cfg.radar == sim::RadarConfig::desk_scale());
  CHECK(cfg.network.in_channels == 16);
  try {
    config::parse(R"({"scenario": {"bogus": 1}})");
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("scenario.bogus") != std::string::npos);
  }
  CHECK(code_of([] { config::parse("{"); }) == ErrorCode::Config);
  CHECK(code_of([] { config::parse(R"({"train": {"optimizer": "rmsprop"}})"); }) == ErrorCode::Config);
  CHECK(code_of([] { config::parse(R"({"split": {"test_fraction": 1.0}})"); }) == ErrorCode::Config);
  CHECK(code_of([] { config::parse(R"({"network": {"in_channels": 3}})"); }) == ErrorCode::Config);
  const auto again = config::parse(config::to_json(small_run()));
  CHECK(config::to_json(again) == config::to_json(small_run()));
  const auto full = config::parse(R"({"radar": {"preset": "full"}})");
  CHECK(full.network.grid == GridDims{128, 32, 32});
  CHECK(config::radar_from_json(config::radar_to_json(full.radar)) == full.radar);
}

TEST_CASE("simulate, train, infer and evaluate on a small dataset") {
  testutil::TempDir dir("app");
  const auto cfg = small_run();
  const auto summary = app::simulate(cfg, dir / "data", 2);
  CHECK(summary.frames == 20);
  CHECK(summary.frames_per_split[0] == 12);
  CHECK(summary.frames_per_split[1] == 4);
  CHECK(summary.frames_per_split[2] == 4);
  CHECK(summary.to_text().find("test") != std::string::npos);
  const auto manifest = store::read_manifest(dir / "data/manifest.json");
  CHECK(manifest.frames.size() == 20);
  CHECK(std::filesystem::exists(dir / "data/summary.txt"));
  // Re-simulating is deterministic, also with a different job count.
  app::simulate(cfg, dir / "again", 1);
  for (const auto& f : manifest.frames) {
    CHECK(store::read_file(dir / "data" / f.horizontal) == store::read_file(dir / "again" / f.horizontal));
  }

  const auto trained = app::train(cfg, dir / "data/manifest.json", dir / "w.cdnw");
  CHECK(trained.train_frames == 12);
  CHECK(trained.val_frames == 4);
  REQUIRE(trained.history.size() == 1);
  CHECK(std::filesystem::exists(dir / "w.cdnw"));
  CHECK(store::read_text(dir / "w.cdnw.loss.csv").rfind("epoch,train_loss,val_loss,seconds\n1,", 0) == 0);

  const auto model = app::infer(cfg, app::Method::Model, dir / "w.cdnw", dir / "data/manifest.json", store::Split::Test, dir / "model.csv", 2);
  CHECK(model.latency.per_frame_ms.size() == 4);
  CHECK(std::filesystem::exists(dir / "model.csv.latency.csv"));
  const auto base = app::infer(cfg, app::Method::Baseline, std::nullopt, dir / "data/manifest.json", store::Split::Test, dir / "base.csv");
  CHECK(base.frames.size() <= 4);

  const auto reports = app::evaluate(dir / "data/manifest.json", store::Split::Test,
                                     {{"model", dir / "model.csv", true}, {"baseline", dir / "base.csv", false}},
                                     dir / "eval");
  REQUIRE(reports.size() == 2);
  CHECK(std::filesystem::exists(dir / "eval.model.json"));
  CHECK(std::filesystem::exists(dir / "eval.baseline.txt"));
  CHECK(std::filesystem::exists(dir / "eval.comparison.csv"));

  auto other = cfg;
  other.network.channels = {8, 16, 32};
  CHECK(code_of([&] {
          app::infer(other, app::Method::Model, dir / "w.cdnw", dir / "data/manifest.json", store::Split::Test, dir / "x.csv");
        }) == ErrorCode::SpecMismatch);
  CHECK(code_of([&] {
          app::infer(cfg, app::Method::Model, std::nullopt, dir / "data/manifest.json", store::Split::Test, dir / "x.csv");
        }) == ErrorCode::InvalidArgument);

  store::FrameDetections stray{999, {{DroneClass::Small, {1, 1, 1}, 0.5, {}}}};
  store::write_text(dir / "stray.csv", store::format_detections({stray}));
  try {
    app::evaluate(dir / "data/manifest.json", store::Split::Test, {{"stray", dir / "stray.csv", true}}, dir / "e2");
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
}

TEST_CASE("latency percentiles") {
  std::vector<double> ms;
  for (int i = 1; i <= 100; ++i) ms.push_back(double(101 - i));
  const auto s = app::latency_stats(ms);
  CHECK(s.per_frame_ms == ms);
  CHECK(s.p50 == doctest::Approx(50).epsilon(0.03));
  CHECK(s.p90 == doctest::Approx(90).epsilon(0.03));
  CHECK(s.max == 100);
  CHECK(app::latency_stats({}).max == 0.0);
}

TEST_CASE("heatmap projection") {
  Tensor<double> cube({2, 3, 4});
  cube.at(0, 1, 2) = 2.0;
  cube.at(1, 1, 2) = 4.0;
  cube.at(1, 2, 0) = 1.0;
  const auto ra = app::project(cube, "DRA", "RA", app::Projection::Max);
  CHECK(ra.rows == 3);
  CHECK(ra.cols == 4);
  CHECK(ra.pixels[1 * 4 + 2] == 255);
  CHECK(ra.pixels[2 * 4 + 0] == 64);
  const auto sum = app::project(cube, "DRA", "RA", app::Projection::Sum);
  CHECK(sum.pixels[1 * 4 + 2] == 255);
  CHECK(sum.pixels[2 * 4 + 0] == 43);
  const auto dr = app::project(cube, "DRA", "DR", app::Projection::Max);
  CHECK(dr.rows == 2);
  CHECK(dr.cols == 3);
  CHECK(app::default_axes(4) == "DRAE");
  CHECK(code_of([&] { app::project(cube, "DRA", "RE", app::Projection::Max); }) == ErrorCode::InvalidArgument);
  const auto pgm = app::encode_pgm(ra);
  const std::string head(pgm.begin(), pgm.begin() + 11);
  CHECK(head == "P5\n4 3\n255\n");
  CHECK(pgm.size() == 11 + 12);
}
