// diffwitness command-line front end. Everything goes through the C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "diffwitness/diffwitness.h"
#include "json.hpp"

namespace {

using json = nlohmann::json;

constexpr int kExitSeparated = 0;
constexpr int kExitPenetrating = 10;
constexpr int kExitLoadError = 2;
constexpr int kExitCheckFailed = 1;

struct ShapeDeleter {
  void operator()(dw_shape* s) const { dw_shape_free(s); }
};
using ShapePtr = std::unique_ptr<dw_shape, ShapeDeleter>;

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { dw_string_free(p); }
};

int report(dw_status s, const std::string& what) {
  std::cerr << "error: " << what << ": " << dw_status_name(s) << ": " << dw_last_error() << "\n";
  return kExitLoadError;
}

std::string readFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Inline JSON or a path to a JSON file.
json loadJsonArg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') return json::parse(arg);
  return json::parse(readFile(arg));
}

dw_pose parsePose(const std::string& arg) {
  dw_pose p{{1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}};
  if (arg.empty()) return p;
  const json j = loadJsonArg(arg);
  for (const auto& [key, value] : j.items()) {
    if (key != "R" && key != "t") throw std::runtime_error("pose keys are R and t, got '" + key + "'");
  }
  if (j.contains("R")) {
    const auto r = j["R"].get<std::vector<double>>();
    if (r.size() != 9) throw std::runtime_error("pose R needs 9 row-major entries");
    for (int i = 0; i < 9; ++i) p.R[i] = r[i];
  }
  if (j.contains("t")) {
    const auto t = j["t"].get<std::vector<double>>();
    if (t.size() != 3) throw std::runtime_error("pose t needs 3 entries");
    for (int i = 0; i < 3; ++i) p.t[i] = t[i];
  }
  return p;
}

int envWorkers() {
  const char* s = std::getenv("DIFFWITNESS_THREADS");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1) {
    std::cerr << "warning: ignoring DIFFWITNESS_THREADS='" << s << "'\n";
    return 0;
  }
  return static_cast<int>(v);
}

// Explicit --workers wins over the environment, which wins over the config.
dw_run_options runOptions(int workers, const std::optional<unsigned long long>& seed) {
  dw_run_options o{};
  o.workers = workers > 0 ? workers : envWorkers();
  o.has_seed = seed.has_value() ? 1 : 0;
  o.seed = seed.value_or(0);
  return o;
}

std::string fmt(const json& v) {
  if (v.is_null()) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v.get<double>());
  return buf;
}

void printTable(const json& summary) {
  const bool sweep = summary["sweep_axis"] != "none";
  std::printf("%-12s%-12s%12s%12s%9s%8s\n", sweep ? summary["sweep_axis"].get<std::string>().c_str() : "", "method",
              "D5", "D9", "Acc", "failed");
  for (const auto& c : summary["cells"]) {
    std::printf("%-12s%-12s%12s%12s%8.1f%%%8d\n", sweep ? c["value"].get<std::string>().c_str() : "",
                c["method"].get<std::string>().c_str(), fmt(c["d5"]).c_str(), fmt(c["d9"]).c_str(),
                100.0 * c["acc"].get<double>(), c["failed"].get<int>());
  }
  std::printf("%zu tasks, %d workers, %.1f s\n", summary["n_tasks"].get<std::size_t>(), summary["workers"].get<int>(),
              summary["elapsed_s"].get<double>());
}

int runBench(const std::string& configPath, const std::string& out, int workers,
             const std::optional<unsigned long long>& seed, const std::string& axis, const std::string& grid,
             bool requireSweep) {
  json cfg;
  try {
    cfg = configPath.empty() ? json::object() : loadJsonArg(configPath);
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitLoadError;
  }
  if (!axis.empty()) cfg["sweep_axis"] = axis;
  if (!grid.empty()) {
    json g = json::array();
    std::stringstream ss(grid);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) g.push_back(std::stod(item));
    } catch (const std::exception&) {
      std::cerr << "error: --grid expects comma-separated numbers\n";
      return kExitLoadError;
    }
    cfg["sweep_grid"] = g;
  }
  if (requireSweep && cfg.value("sweep_axis", std::string("none")) == "none") {
    std::cerr << "error: sweep needs an axis (--axis or sweep_axis in the config)\n";
    return kExitLoadError;
  }
  const dw_run_options opts = runOptions(workers, seed);
  OwnedString summary;
  const dw_status s = dw_bench_run(cfg.dump().c_str(), out.empty() ? nullptr : out.c_str(), &opts, &summary.p);
  if (s != DW_OK) return report(s, "bench");
  printTable(json::parse(summary.p));
  if (!out.empty()) std::printf("results written to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffwitness: differentiable witness points and pose-optimization benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dw_version()));

  int workers = 0;
  std::optional<unsigned long long> seed;
  std::string config, out;

  auto* detect = app.add_subcommand("detect", "Witness points of two posed shapes (exit 0 separated, 10 penetrating)");
  std::string shape1, shape2, pose1, pose2;
  detect->add_option("shape1", shape1, "Bundled name, OBJ file or composite directory")->required();
  detect->add_option("shape2", shape2, "Bundled name, OBJ file or composite directory")->required();
  detect->add_option("--pose1", pose1, "Pose JSON {\"R\": [9 row-major], \"t\": [3]} or a file holding it");
  detect->add_option("--pose2", pose2, "Pose of shape 2");
  detect->add_option("--out", out, "Also write the JSON result to this file");

  auto* bench = app.add_subcommand("bench", "Run a benchmark described by a JSON config");
  auto* sweep = app.add_subcommand("sweep", "Run a margin, step-size or ablation sweep");
  std::string axis, grid;
  for (auto* sub : {bench, sweep}) {
    sub->add_option("--config", config, "JSON config (file or inline)");
    sub->add_option("--workers", workers, "Worker threads (overrides DIFFWITNESS_THREADS)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", out, "Output directory for results.csv and summary.json");
  }
  sweep->add_option("--axis", axis, "margin, step_size or ablation")
      ->check(CLI::IsMember({"margin", "step_size", "ablation"}));
  sweep->add_option("--grid", grid, "Comma-separated grid values");

  auto* gradcheck = app.add_subcommand("gradcheck", "Check surrogate Jacobians against finite differences");
  std::string g1, g2;
  std::optional<int> probes;
  std::optional<double> corrupt;
  gradcheck->add_option("shape1", g1, "First shape (default icosahedron)");
  gradcheck->add_option("shape2", g2, "Second shape (default: same as the first)");
  gradcheck->add_option("--probes", probes, "Number of random configurations");
  gradcheck->add_option("--config", config, "JSON config (file or inline)");
  gradcheck->add_option("--seed", seed, "Seed");
  gradcheck->add_option("--workers", workers, "Accepted for symmetry; the check is single-threaded");
  gradcheck->add_option("--out", out, "Also write the JSON report to this file");
  gradcheck->add_option("--corrupt-cross", corrupt, "Scale the cross blocks (mutation test hook)");

  CLI11_PARSE(app, argc, argv);

  if (*detect) {
    dw_pose p1, p2;
    try {
      p1 = parsePose(pose1);
      p2 = parsePose(pose2);
    } catch (const std::exception& e) {
      std::cerr << "error: pose: " << e.what() << "\n";
      return kExitLoadError;
    }
    dw_shape* raw = nullptr;
    dw_status s = dw_shape_load(shape1.c_str(), &raw);
    if (s != DW_OK) return report(s, "loading " + shape1);
    ShapePtr a(raw);
    s = dw_shape_load(shape2.c_str(), &raw);
    if (s != DW_OK) return report(s, "loading " + shape2);
    ShapePtr b(raw);
    dw_witness w{};
    s = dw_detect(a.get(), &p1, b.get(), &p2, &w);
    if (s != DW_OK) return report(s, "detect");
    const json j{{"signed_distance", w.signed_distance},
                 {"distance", w.penetrating ? 0.0 : w.signed_distance},
                 {"penetration_depth", w.penetrating ? -w.signed_distance : 0.0},
                 {"penetrating", w.penetrating != 0},
                 {"x1", {w.x1[0], w.x1[1], w.x1[2]}},
                 {"x2", {w.x2[0], w.x2[1], w.x2[2]}},
                 {"normal", {w.normal[0], w.normal[1], w.normal[2]}},
                 {"piece1", w.piece1},
                 {"piece2", w.piece2},
                 {"converged", w.converged != 0}};
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
      std::ofstream f(out);
      f << j.dump(2) << "\n";
      if (!f) {
        std::cerr << "error: cannot write " << out << "\n";
        return kExitLoadError;
      }
    }
    return w.penetrating ? kExitPenetrating : kExitSeparated;
  }

  if (*bench) return runBench(config, out, workers, seed, "", "", false);
  if (*sweep) return runBench(config, out, workers, seed, axis, grid, true);

  if (*gradcheck) {
    json cfg;
    try {
      cfg = config.empty() ? json::object() : loadJsonArg(config);
    } catch (const std::exception& e) {
      std::cerr << "error: config: " << e.what() << "\n";
      return kExitLoadError;
    }
    if (!g1.empty()) cfg["shape1"] = g1;
    if (!g2.empty()) cfg["shape2"] = g2;
    if (probes) cfg["probes"] = *probes;
    if (corrupt) cfg["corrupt_cross"] = *corrupt;
    const dw_run_options opts = runOptions(workers, seed);
    OwnedString rep;
    int passed = 0;
    const dw_status s = dw_gradcheck(cfg.dump().c_str(), &opts, &rep.p, &passed);
    if (s != DW_OK) return report(s, "gradcheck");
    const json r = json::parse(rep.p);
    for (const auto& w : r["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    std::printf("%s vs %s, %d probes\n", r["shape1"].get<std::string>().c_str(), r["shape2"].get<std::string>().c_str(),
                r["probes"].get<int>());
    for (const auto& [block, err] : r["max_rel_error"].items()) {
      std::printf("  %-8s max rel error %s\n", block.c_str(), fmt(err).c_str());
    }
    std::printf("  transport identity max error %s\n", fmt(r["max_transport_error"]).c_str());
    std::printf("%s (tolerance %g)\n", passed ? "PASS" : "FAIL", r["tolerance"].get<double>());
    if (!out.empty()) {
      std::ofstream f(out);
      f << r.dump(2) << "\n";
    }
    return passed ? 0 : kExitCheckFailed;
  }
  return 0;
}
