// Command-line front end. Talks to the library only through cubedn.h.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cubedn/cubedn.h"

namespace {

// Exit codes, documented in README.md.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitSpecMismatch = 5;

int exit_code(cdn_status s) {
  switch (s) {
    case CDN_OK: return kExitOk;
    case CDN_ERR_CONFIG:
    case CDN_ERR_INVALID_ARGUMENT: return kExitUsage;
    case CDN_ERR_IO:
    case CDN_ERR_BAD_MAGIC:
    case CDN_ERR_VERSION_MISMATCH:
    case CDN_ERR_TRUNCATED_PAYLOAD: return kExitIo;
    case CDN_ERR_DIVERGENCE: return kExitDivergence;
    case CDN_ERR_SPEC_MISMATCH: return kExitSpecMismatch;
    default: return kExitFailure;
  }
}

int report(cdn_status s, const char* what) {
  if (s != CDN_OK) std::fprintf(stderr, "cubedn %s: %s: %s\n", what, cdn_status_string(s), cdn_last_error());
  return exit_code(s);
}

void log_to_stderr(cdn_log_level level, const char* msg, void*) {
  static const char* names[] = {"info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[level], msg);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

struct ConfigHandle {
  cdn_config* cfg = nullptr;
  ~ConfigHandle() { cdn_config_free(cfg); }
};

// Loads --config (or defaults), then applies --scenario and --seed overrides.
cdn_status load_config(ConfigHandle& h, const std::string& path, const std::string& scenario,
                       const std::optional<std::uint64_t>& seed) {
  cdn_status s = path.empty() ? cdn_config_default(&h.cfg) : cdn_config_load(path.c_str(), &h.cfg);
  if (s != CDN_OK) return s;
  if (!scenario.empty()) {
    std::string text;
    if (!read_file(scenario, text)) {
      std::fprintf(stderr, "cubedn: cannot read scenario file %s\n", scenario.c_str());
      return CDN_ERR_IO;
    }
    s = cdn_config_merge(h.cfg, ("{\"scenario\":" + text + "}").c_str());
    if (s != CDN_OK) return s;
  }
  if (seed) s = cdn_config_set_seed(h.cfg, *seed);
  return s;
}

cdn_split parse_split(const std::string& s) {
  if (s == "train") return CDN_SPLIT_TRAIN;
  if (s == "val") return CDN_SPLIT_VAL;
  return CDN_SPLIT_TEST;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-radar drone detection: simulate, train, infer, evaluate, export"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(cdn_version()));

  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  std::string config_path, scenario_path, out, manifest, weights, method = "model", split = "test";
  std::string detections, baseline_dets, cube, plane, axes;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool sum = false, print_config = false;
  const std::vector<std::string> splits{"train", "val", "test"};

  auto* sim = app.add_subcommand("simulate", "Simulate a dataset of radar cube pairs with labels");
  sim->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--scenario", scenario_path, "Scenario section override (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Seed for scenario and noise");
  sim->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sim->add_option("--out", out, "Output directory")->required();

  auto* trn = app.add_subcommand("train", "Train the network on the train split of a manifest");
  trn->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  trn->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  trn->add_option("--seed", seed, "Training seed");
  trn->add_option("--out", out, "Weights file to write")->required();

  auto* inf = app.add_subcommand("infer", "Write detections for one split of a manifest");
  inf->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  inf->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  inf->add_option("--weights", weights, "Trained weights (model method)")->check(CLI::ExistingFile);
  inf->add_option("--method", method, "model or baseline")->check(CLI::IsMember({"model", "baseline"}));
  inf->add_option("--split", split, "Split to process")->check(CLI::IsMember(splits));
  inf->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  inf->add_option("--out", out, "Detections file to write")->required();

  auto* ev = app.add_subcommand("eval", "AP/AR and localization error of detection files");
  ev->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--detections", detections, "Model detections")->check(CLI::ExistingFile);
  ev->add_option("--baseline", baseline_dets, "Baseline detections (class-agnostic)")->check(CLI::ExistingFile);
  ev->add_option("--split", split, "Split the detections belong to")->check(CLI::IsMember(splits));
  ev->add_option("--out", out, "Output path prefix")->required();

  auto* ex = app.add_subcommand("export", "Render a cube projection as a PGM heatmap");
  ex->add_option("--cube", cube, "Cube file")->required()->check(CLI::ExistingFile);
  ex->add_option("--plane", plane, "Two axis letters, rows first (e.g. RA, DR)")->required();
  ex->add_option("--axes", axes, "Axis letters of the cube (default DRA or DRAE)");
  ex->add_flag("--sum", sum, "Sum instead of max projection");
  ex->add_option("--out", out, "Image file")->required();

  auto* cfg_cmd = app.add_subcommand("config", "Print the effective configuration");
  cfg_cmd->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cfg_cmd->add_flag("--print", print_config, "Print as JSON (default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!quiet) cdn_set_log_callback(log_to_stderr, nullptr);

  if (*ex) {
    return report(cdn_cmd_export(cube.c_str(), axes.empty() ? nullptr : axes.c_str(), plane.c_str(), sum,
                                 out.c_str()),
                  "export");
  }
  if (*ev) {
    std::vector<const char*> names, files;
    std::vector<int> agnostic;
    if (!detections.empty()) {
      names.push_back("model");
      files.push_back(detections.c_str());
      agnostic.push_back(0);
    }
    if (!baseline_dets.empty()) {
      names.push_back("baseline");
      files.push_back(baseline_dets.c_str());
      agnostic.push_back(1);
    }
    if (names.empty()) {
      std::fprintf(stderr, "cubedn eval: give --detections and/or --baseline\n");
      return kExitUsage;
    }
    char* text = nullptr;
    const auto s = cdn_cmd_eval(manifest.c_str(), parse_split(split), names.data(), files.data(), agnostic.data(),
                                names.size(), out.c_str(), &text);
    if (text) {
      std::fputs(text, stdout);
      cdn_string_free(text);
    }
    return report(s, "eval");
  }

  ConfigHandle h;
  if (const auto s = load_config(h, config_path, scenario_path, seed); s != CDN_OK) return report(s, "config");

  if (*cfg_cmd) {
    std::fputs(cdn_config_json(h.cfg), stdout);
    return kExitOk;
  }
  if (*sim) {
    char* summary = nullptr;
    const auto s = cdn_cmd_simulate(h.cfg, out.c_str(), jobs, &summary);
    if (summary) {
      std::fputs(summary, stdout);
      cdn_string_free(summary);
    }
    return report(s, "simulate");
  }
  if (*trn) return report(cdn_cmd_train(h.cfg, manifest.c_str(), out.c_str()), "train");
  if (*inf) {
    const auto m = method == "baseline" ? CDN_METHOD_BASELINE : CDN_METHOD_MODEL;
    return report(cdn_cmd_infer(h.cfg, m, weights.empty() ? nullptr : weights.c_str(), manifest.c_str(),
                                parse_split(split), out.c_str(), jobs),
                  "infer");
  }
  return kExitUsage;
}
