#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/labels.hpp"
#include "cubedn/postproc.hpp"
#include "cubedn/sim.hpp"

namespace cubedn::metrics {

// OLE thresholds reported individually.
inline constexpr std::array<int, 3> kReportedOle{1, 3, 5};
// Thresholds averaged into the "mean over OLE" figure.
inline constexpr int kMaxOle = 5;
inline constexpr std::array<double, 6> kRangeBandEdges{0.0, 3.0, 6.0, 9.0, 12.0, 15.0};

// range = r * range resolution, azimuth = asin(sine(a)), elevation =
// asin(sine(e)); then x = R cos(el) sin(az), y = R cos(el) cos(az), z = R sin(el).
Vec3 polar_bins_to_cartesian(double r, double a, double e, const sim::RadarConfig& cfg);

struct GroundTruth {
  DroneClass cls = DroneClass::Small;
  labels::PolarPosition polar;
  Vec3 position;
};

GroundTruth make_ground_truth(const sim::Target& target, const sim::RadarConfig& cfg);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  DroneClass cls = DroneClass::Small;  // ground-truth class
  BinIndex offset;                     // pred - gt
  double cartesian_error = 0.0;        // meters
  double gt_range = 0.0;               // meters
};

struct MatchResult {
  std::array<std::size_t, kNumClasses> tp{};
  std::array<std::size_t, kNumClasses> fp{};
  std::array<std::size_t, kNumClasses> fn{};
  std::vector<MatchPair> pairs;
  std::vector<bool> pred_is_tp;  // parallel to the prediction list

  std::size_t total_tp() const { return tp[0] + tp[1]; }
  std::size_t total_fp() const { return fp[0] + fp[1]; }
  std::size_t total_fn() const { return fn[0] + fn[1]; }
};

// Chebyshev bin distance.
int ole_distance(const BinIndex& a, const BinIndex& b);

// Greedy one-to-one matching in descending confidence (ties by bins, then
// input order). A prediction matches the nearest unmatched ground truth with
// Chebyshev distance <= ole; with class_aware it must also share the class.
MatchResult match(const std::vector<postproc::Detection>& preds,
                  const std::vector<GroundTruth>& gts, int ole, bool class_aware = true);

struct FrameEval {
  std::size_t frame_id = 0;
  std::vector<postproc::Detection> preds;
  std::vector<GroundTruth> gts;
};

struct ApAr {
  double ap = 0.0;
  double ar = 0.0;
};

// Number of thresholds in the recall sweep used for AR (t = k / N, k = 1..N).
inline constexpr int kRecallSweepSteps = 100;

// AP: all-points interpolated area under the precision-recall curve traced by
// lowering the confidence threshold through every prediction. AR: recall
// averaged over the uniform confidence sweep. Throws UndefinedMetric when the
// class has no ground truth.
ApAr ap_ar(std::span<const FrameEval> frames, int ole, DroneClass cls, bool class_aware = true);

// Macro average over classes that have ground truth.
ApAr ap_ar(std::span<const FrameEval> frames, int ole);

struct BandStat {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_error = 0.0;
};

struct LocalizationReport {
  std::size_t count = 0;
  double mean_error = 0.0;
  std::vector<BandStat> bands;  // empty bands have count 0

  const BandStat* band_for(double range) const;
};

// Mean Euclidean error overall and per ground-truth range band [lo, hi); the
// last band is closed.
LocalizationReport localization_report(std::span<const MatchPair> pairs,
                                       std::span<const double> edges = kRangeBandEdges);

struct EvalRow {
  int ole = 0;
  std::array<std::optional<ApAr>, kNumClasses> per_class;
  std::optional<ApAr> combined;
};

struct EvalReport {
  std::string method;
  bool class_aware = true;
  std::vector<EvalRow> rows;  // OLE 1..kMaxOle
  EvalRow mean_over_ole;      // ole = 0 marks the average row
  int localization_ole = 3;
  std::array<LocalizationReport, kNumClasses> localization_per_class;
  LocalizationReport localization;

  const EvalRow& row(int ole) const;
  std::string to_json() const;
  // One line per (method, class, metric) suitable for plotting.
  std::string to_delimited() const;
  std::string to_text() const;
};

EvalReport evaluate(std::span<const FrameEval> frames, std::string method,
                    bool class_aware = true, int localization_ole = 3);

// Side-by-side delimited table of several reports.
std::string comparison_table(std::span<const EvalReport> reports);

}  // namespace cubedn::metrics
