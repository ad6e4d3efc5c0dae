#include "cubedn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace cubedn::metrics {

using json = nlohmann::json;

Vec3 polar_bins_to_cartesian(double r, double a, double e, const sim::RadarConfig& cfg) {
  const double range = r * cfg.range_resolution_m;
  const double az = std::asin(std::clamp(cfg.bin_to_sine(a), -1.0, 1.0));
  const double el = std::asin(std::clamp(cfg.bin_to_sine(e), -1.0, 1.0));
  return {range * std::cos(el) * std::sin(az), range * std::cos(el) * std::cos(az),
          range * std::sin(el)};
}

GroundTruth make_ground_truth(const sim::Target& target, const sim::RadarConfig& cfg) {
  return {target.cls, labels::to_polar_bins(target.position, target.cls, cfg), target.position};
}

int ole_distance(const BinIndex& a, const BinIndex& b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.a - b.a), std::abs(a.e - b.e)});
}

namespace {

int squared(const BinIndex& a, const BinIndex& b) {
  return (a.r - b.r) * (a.r - b.r) + (a.a - b.a) * (a.a - b.a) + (a.e - b.e) * (a.e - b.e);
}

bool ranks_before(const postproc::Detection& x, std::size_t ix, const postproc::Detection& y,
                  std::size_t iy) {
  if (x.confidence != y.confidence) return x.confidence > y.confidence;
  if (x.bins != y.bins) return x.bins < y.bins;
  return ix < iy;
}

// Index of the ground truth that `pred` claims, or gts.size().
std::size_t best_gt(const postproc::Detection& pred, const std::vector<GroundTruth>& gts,
                    const std::vector<bool>& taken, int ole, bool class_aware) {
  std::size_t best = gts.size();
  int best_cheb = 0, best_sq = 0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (taken[g] || (class_aware && gts[g].cls != pred.cls)) continue;
    const BinIndex gb = gts[g].polar.rounded();
    const int cheb = ole_distance(pred.bins, gb);
    if (cheb > ole) continue;
    const int sq = squared(pred.bins, gb);
    if (best == gts.size() || cheb < best_cheb || (cheb == best_cheb && sq < best_sq)) {
      best = g;
      best_cheb = cheb;
      best_sq = sq;
    }
  }
  return best;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

MatchResult match(const std::vector<postproc::Detection>& preds,
                  const std::vector<GroundTruth>& gts, int ole, bool class_aware) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return ranks_before(preds[x], x, preds[y], y);
  });
  MatchResult result;
  result.pred_is_tp.assign(preds.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t p : order) {
    const auto& pred = preds[p];
    const std::size_t g = best_gt(pred, gts, taken, ole, class_aware);
    const auto pc = static_cast<std::size_t>(pred.cls);
    if (g == gts.size()) {
      ++result.fp[pc];
      continue;
    }
    taken[g] = true;
    result.pred_is_tp[p] = true;
    const auto gc = static_cast<std::size_t>(gts[g].cls);
    ++result.tp[class_aware ? pc : gc];
    const BinIndex gb = gts[g].polar.rounded();
    result.pairs.push_back({p, g, gts[g].cls,
                            {pred.bins.r - gb.r, pred.bins.a - gb.a, pred.bins.e - gb.e},
                            norm(pred.cartesian - gts[g].position), norm(gts[g].position)});
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g]) ++result.fn[static_cast<std::size_t>(gts[g].cls)];
  }
  return result;
}

ApAr ap_ar(std::span<const FrameEval> frames, int ole, DroneClass cls, bool class_aware) {
  if (frames.empty()) fail(ErrorCode::UndefinedMetric, "no frames to evaluate");
  struct Ranked {
    double confidence;
    bool tp;
  };
  std::vector<Ranked> ranked;
  std::size_t n_gt = 0;
  for (const auto& f : frames) {
    std::vector<postproc::Detection> preds;
    std::vector<GroundTruth> gts;
    for (const auto& p : f.preds) {
      if (!class_aware || p.cls == cls) preds.push_back(p);
    }
    for (const auto& g : f.gts) {
      if (!class_aware || g.cls == cls) gts.push_back(g);
    }
    n_gt += gts.size();
    const auto m = match(preds, gts, ole, class_aware);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      ranked.push_back({preds[i].confidence, m.pred_is_tp[i]});
    }
  }
  if (n_gt == 0) {
    fail(ErrorCode::UndefinedMetric,
         "no ground truth of class " + std::string(to_string(cls)));
  }
  // Within a frame the matcher already consumed predictions in this order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& x, const Ranked& y) { return x.confidence > y.confidence; });

  const double total = static_cast<double>(n_gt);
  std::vector<double> precision(ranked.size()), recall(ranked.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    tp += ranked[i].tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / total;
  }
  ApAr out;
  double envelope = 0.0;
  for (std::size_t i = ranked.size(); i-- > 0;) {
    envelope = std::max(envelope, precision[i]);
    const double prev_recall = i == 0 ? 0.0 : recall[i - 1];
    out.ap += (recall[i] - prev_recall) * envelope;
  }
  // Recall at threshold t counts the TPs with confidence >= t.
  for (int k = 1; k <= kRecallSweepSteps; ++k) {
    const double t = static_cast<double>(k) / kRecallSweepSteps;
    std::size_t hits = 0;
    for (const auto& r : ranked) hits += (r.tp && r.confidence >= t);
    out.ar += static_cast<double>(hits) / total;
  }
  out.ar /= kRecallSweepSteps;
  return out;
}

ApAr ap_ar(std::span<const FrameEval> frames, int ole) {
  ApAr sum;
  int defined = 0;
  for (DroneClass cls : kAllClasses) {
    try {
      const ApAr v = ap_ar(frames, ole, cls);
      sum.ap += v.ap;
      sum.ar += v.ar;
      ++defined;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedMetric) throw;
    }
  }
  if (defined == 0) fail(ErrorCode::UndefinedMetric, "no ground truth in any class");
  return {sum.ap / defined, sum.ar / defined};
}

const BandStat* LocalizationReport::band_for(double range) const {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const bool last = i + 1 == bands.size();
    if (range >= bands[i].lo && (range < bands[i].hi || (last && range <= bands[i].hi))) {
      return &bands[i];
    }
  }
  return nullptr;
}

LocalizationReport localization_report(std::span<const MatchPair> pairs,
                                       std::span<const double> edges) {
  LocalizationReport rep;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) rep.bands.push_back({edges[i], edges[i + 1], 0, 0.0});
  double total = 0.0;
  for (const auto& p : pairs) {
    total += p.cartesian_error;
    ++rep.count;
    for (std::size_t i = 0; i < rep.bands.size(); ++i) {
      if (&rep.bands[i] != rep.band_for(p.gt_range)) continue;
      rep.bands[i].mean_error += p.cartesian_error;
      ++rep.bands[i].count;
    }
  }
  if (rep.count) rep.mean_error = total / static_cast<double>(rep.count);
  for (auto& b : rep.bands) {
    if (b.count) b.mean_error /= static_cast<double>(b.count);
  }
  return rep;
}

const EvalRow& EvalReport::row(int ole) const {
  for (const auto& r : rows) {
    if (r.ole == ole) return r;
  }
  fail(ErrorCode::InvalidArgument, "no evaluation row for OLE " + std::to_string(ole));
}

EvalReport evaluate(std::span<const FrameEval> frames, std::string method, bool class_aware,
                    int localization_ole) {
  if (frames.empty()) fail(ErrorCode::UndefinedMetric, "no frames to evaluate");
  EvalReport rep;
  rep.method = std::move(method);
  rep.class_aware = class_aware;
  rep.localization_ole = localization_ole;

  auto try_ap = [&](int ole, DroneClass cls, bool aware) -> std::optional<ApAr> {
    try {
      return ap_ar(frames, ole, cls, aware);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedMetric) throw;
      return std::nullopt;
    }
  };

  rep.mean_over_ole.ole = 0;
  std::array<int, kNumClasses> class_rows{};
  int combined_rows = 0;
  for (int ole = 1; ole <= kMaxOle; ++ole) {
    EvalRow row;
    row.ole = ole;
    if (class_aware) {
      double ap = 0, ar = 0;
      int n = 0;
      for (DroneClass cls : kAllClasses) {
        const auto v = try_ap(ole, cls, true);
        row.per_class[static_cast<std::size_t>(cls)] = v;
        if (v) {
          ap += v->ap;
          ar += v->ar;
          ++n;
        }
      }
      if (n) row.combined = ApAr{ap / n, ar / n};
    } else {
      row.combined = try_ap(ole, DroneClass::Small, false);
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!row.per_class[c]) continue;
      auto& acc = rep.mean_over_ole.per_class[c];
      if (!acc) acc = ApAr{};
      acc->ap += row.per_class[c]->ap;
      acc->ar += row.per_class[c]->ar;
      ++class_rows[c];
    }
    if (row.combined) {
      auto& acc = rep.mean_over_ole.combined;
      if (!acc) acc = ApAr{};
      acc->ap += row.combined->ap;
      acc->ar += row.combined->ar;
      ++combined_rows;
    }
    rep.rows.push_back(row);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (auto& acc = rep.mean_over_ole.per_class[c]) {
      acc->ap /= class_rows[c];
      acc->ar /= class_rows[c];
    }
  }
  if (auto& acc = rep.mean_over_ole.combined) {
    acc->ap /= combined_rows;
    acc->ar /= combined_rows;
  }

  std::vector<MatchPair> all;
  std::array<std::vector<MatchPair>, kNumClasses> per_class;
  for (const auto& f : frames) {
    const auto m = match(f.preds, f.gts, localization_ole, class_aware);
    for (const auto& p : m.pairs) {
      all.push_back(p);
      per_class[static_cast<std::size_t>(p.cls)].push_back(p);
    }
  }
  rep.localization = localization_report(all);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    rep.localization_per_class[c] = localization_report(per_class[c]);
  }
  return rep;
}

namespace {

json apar_json(const std::optional<ApAr>& v) {
  if (!v) return nullptr;
  return {{"ap", v->ap}, {"ar", v->ar}};
}

json row_json(const EvalRow& r) {
  return {{"small", apar_json(r.per_class[0])},
          {"large", apar_json(r.per_class[1])},
          {"combined", apar_json(r.combined)}};
}

json loc_json(const LocalizationReport& l) {
  json bands = json::array();
  for (const auto& b : l.bands) {
    bands.push_back({{"lo_m", b.lo},
                     {"hi_m", b.hi},
                     {"count", b.count},
                     {"mean_error_m", b.count ? json(b.mean_error) : json(nullptr)}});
  }
  return {{"count", l.count},
          {"mean_error_m", l.count ? json(l.mean_error) : json(nullptr)},
          {"bands", bands}};
}

}  // namespace

std::string EvalReport::to_json() const {
  json per_ole = json::object();
  for (const auto& r : rows) per_ole[std::to_string(r.ole)] = row_json(r);
  json j = {{"method", method},
            {"class_aware", class_aware},
            {"ap_ar_per_ole", per_ole},
            {"ap_ar_mean_over_ole_1_to_5", row_json(mean_over_ole)},
            {"localization_ole", localization_ole},
            {"localization",
             {{"overall", loc_json(localization)},
              {"small", loc_json(localization_per_class[0])},
              {"large", loc_json(localization_per_class[1])}}}};
  return j.dump(2);
}

std::string EvalReport::to_delimited() const {
  std::ostringstream os;
  auto emit_row = [&](const EvalRow& r, const std::string& ole) {
    const std::array<std::pair<const char*, const std::optional<ApAr>*>, 3> cols{
        {{"small", &r.per_class[0]}, {"large", &r.per_class[1]}, {"combined", &r.combined}}};
    for (const auto& [name, v] : cols) {
      if (!*v) continue;
      os << method << ',' << name << ",AP," << ole << ',' << fmt((*v)->ap) << '\n';
      os << method << ',' << name << ",AR," << ole << ',' << fmt((*v)->ar) << '\n';
    }
  };
  for (const auto& r : rows) emit_row(r, std::to_string(r.ole));
  emit_row(mean_over_ole, "mean1-5");
  auto emit_loc = [&](const LocalizationReport& l, const char* name) {
    if (l.count) os << method << ',' << name << ",LOC,overall," << fmt(l.mean_error) << '\n';
    for (const auto& b : l.bands) {
      if (!b.count) continue;
      os << method << ',' << name << ",LOC," << b.lo << '-' << b.hi << "m," << fmt(b.mean_error)
         << '\n';
    }
  };
  emit_loc(localization_per_class[0], "small");
  emit_loc(localization_per_class[1], "large");
  emit_loc(localization, "combined");
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "method: " << method << (class_aware ? "" : " (class-agnostic)") << '\n';
  os << "detection performance (percent)\n";
  os << "  class      AP-mean1..5  AP1     AP3     AP5     AR-mean1..5  AR1     AR3     AR5\n";
  auto cell = [](const std::optional<ApAr>& v, bool ap) {
    char buf[16];
    if (!v) return std::string("  -    ");
    std::snprintf(buf, sizeof buf, "%6.2f ", 100.0 * (ap ? v->ap : v->ar));
    return std::string(buf);
  };
  auto line = [&](const char* name, auto pick) {
    os << "  " << name;
    os << "      " << cell(pick(mean_over_ole), true);
    for (int ole : kReportedOle) os << ' ' << cell(pick(row(ole)), true);
    os << "      " << cell(pick(mean_over_ole), false);
    for (int ole : kReportedOle) os << ' ' << cell(pick(row(ole)), false);
    os << '\n';
  };
  line("small   ", [](const EvalRow& r) { return r.per_class[0]; });
  line("large   ", [](const EvalRow& r) { return r.per_class[1]; });
  line("combined", [](const EvalRow& r) { return r.combined; });
  os << "mean localization error (m), matched at OLE " << localization_ole << '\n';
  os << "  class      overall";
  for (std::size_t i = 0; i + 1 < kRangeBandEdges.size(); ++i) {
    os << "  " << kRangeBandEdges[i] << '-' << kRangeBandEdges[i + 1] << 'm';
  }
  os << '\n';
  auto loc = [&](const char* name, const LocalizationReport& l) {
    char buf[32];
    os << "  " << name << "  ";
    if (l.count) {
      std::snprintf(buf, sizeof buf, "%7.3f", l.mean_error);
      os << buf;
    } else {
      os << "      -";
    }
    for (const auto& b : l.bands) {
      if (b.count) {
        std::snprintf(buf, sizeof buf, "  %6.3f", b.mean_error);
        os << buf;
      } else {
        os << "       -";
      }
    }
    os << '\n';
  };
  loc("small   ", localization_per_class[0]);
  loc("large   ", localization_per_class[1]);
  loc("combined", localization);
  return os.str();
}

std::string comparison_table(std::span<const EvalReport> reports) {
  std::string out = "method,class,metric,threshold,value\n";
  for (const auto& r : reports) out += r.to_delimited();
  return out;
}

}  // namespace cubedn::metrics
