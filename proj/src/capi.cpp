#include "diffwitness/diffwitness.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffwitness/bench.hpp"
#include "diffwitness/gradcheck.hpp"
#include "json.hpp"

struct dw_shape {
  dw::geom::CompositeShape shape;
};

namespace {

using json = nlohmann::json;
using namespace dw;

thread_local std::string lastError;

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

dw_status fail(dw_status s, const std::string& msg) {
  lastError = msg;
  return s;
}

template <class F>
dw_status guarded(F&& f) {
  try {
    lastError.clear();
    return f();
  } catch (const geom::IoError& e) {
    return fail(DW_ERR_IO, e.what());
  } catch (const geom::ObjParseError& e) {
    return fail(DW_ERR_PARSE, e.what());
  } catch (const geom::DegenerateHull& e) {
    return fail(DW_ERR_DEGENERATE, e.what());
  } catch (const json::parse_error& e) {
    return fail(DW_ERR_PARSE, std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    return fail(DW_ERR_INVALID_ARGUMENT, std::string("config: ") + e.what());
  } catch (const geom::GeometryError& e) {
    return fail(DW_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(DW_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(DW_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(DW_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DW_ERR_INTERNAL, "unknown error");
  }
}

char* dupString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

se3::Pose toPose(const dw_pose* p) {
  if (!p) return se3::Pose::identity();
  Mat3 r;
  for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = p->R[i];
  const se3::Pose pose{r, Vec3(p->t[0], p->t[1], p->t[2])};
  if (!pose.isValid(1e-6)) throw std::invalid_argument("pose rotation is not orthonormal");
  return pose;
}

dw_status storeShape(geom::CompositeShape s, dw_shape** out) {
  if (!out) return fail(DW_ERR_INVALID_ARGUMENT, "null output pointer");
  *out = new dw_shape{std::move(s)};
  return DW_OK;
}

// Flat override keys shared by bench and gradcheck configs.
const std::set<std::string> kSamplingKeys = {"strategy", "k_ring", "subsample", "alpha", "epsilon",
                                             "max_candidates", "min_candidates", "cross_piece"};
const std::set<std::string> kOptimizerKeys = {"iterations", "schedule", "initial_step", "translation_ratio",
                                              "beta", "step_norm", "use_eg", "optimize_t1", "propagate_tau",
                                              "score", "fd_rotation", "fd_translation", "rs0_sigma",
                                              "rs0_samples", "early_exit", "bank_samples"};
const std::set<std::string> kBenchKeys = {"shapes", "pairs", "pair_count", "tasks_per_pair", "methods", "seed",
                                          "sweep_axis", "sweep_grid", "workers", "output_dir"};
const std::set<std::string> kScoreKey = {"score"};
const std::set<std::string> kGradcheckKeys = {"shape1", "shape2", "probes", "seed", "h", "tolerance",
                                              "corrupt_cross"};

void checkKeys(const json& cfg, const std::vector<const std::set<std::string>*>& allowed) {
  if (!cfg.is_object()) throw InvalidConfig("config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    bool ok = false;
    for (const auto* set : allowed) ok = ok || set->count(key) > 0;
    if (!ok) throw InvalidConfig("unknown config key '" + key + "'");
  }
}

smoothing::Strategy parseStrategy(const std::string& s) {
  for (auto st : {smoothing::Strategy::Neighbor, smoothing::Strategy::Fixed, smoothing::Strategy::Adaptive}) {
    if (s == smoothing::strategyName(st)) return st;
  }
  throw InvalidConfig("unknown sampling strategy '" + s + "'");
}

smoothing::Score parseScore(const std::string& s) {
  if (s == "dist") return smoothing::Score::Distance;
  if (s == "dir") return smoothing::Score::Direction;
  throw InvalidConfig("unknown score '" + s + "' (dist or dir)");
}

void applySampling(const json& c, smoothing::SamplingConfig& s) {
  if (c.contains("strategy")) s.strategy = parseStrategy(c["strategy"].get<std::string>());
  if (c.contains("k_ring")) s.kRing = c["k_ring"].get<int>();
  if (c.contains("subsample")) s.subsample = c["subsample"].get<int>();
  if (c.contains("alpha")) s.alpha = c["alpha"].get<double>();
  if (c.contains("epsilon")) s.epsilon = c["epsilon"].get<double>();
  if (c.contains("max_candidates")) s.maxCandidates = c["max_candidates"].get<int>();
  if (c.contains("min_candidates")) s.minCandidates = c["min_candidates"].get<int>();
  if (c.contains("cross_piece")) s.crossPiece = c["cross_piece"].get<bool>();
}

bench::OptimizerConfig optimizerFrom(const json& c) {
  bench::OptimizerConfig o;
  applySampling(c, o.sampling);
  if (c.contains("iterations")) o.iterations = c["iterations"].get<int>();
  if (c.contains("schedule")) {
    o.schedule.clear();
    for (const auto& e : c["schedule"]) {
      if (!e.is_array() || e.size() != 2) throw InvalidConfig("schedule entries are [iteration, step] pairs");
      o.schedule.emplace_back(e[0].get<int>(), e[1].get<double>());
    }
  }
  if (c.contains("initial_step")) o.setInitialRotationStep(c["initial_step"].get<double>());
  if (c.contains("translation_ratio")) o.translationRatio = c["translation_ratio"].get<double>();
  if (c.contains("beta")) o.loss.beta = c["beta"].get<double>();
  if (c.contains("step_norm")) o.stepNorm = bench::parseStepNorm(c["step_norm"].get<std::string>());
  if (c.contains("use_eg")) o.useEg = c["use_eg"].get<bool>();
  if (c.contains("optimize_t1")) o.optimizeT1 = c["optimize_t1"].get<bool>();
  if (c.contains("propagate_tau")) o.propagateTau = c["propagate_tau"].get<bool>();
  if (c.contains("score")) o.score = parseScore(c["score"].get<std::string>());
  if (c.contains("fd_rotation")) o.fdRotation = c["fd_rotation"].get<double>();
  if (c.contains("fd_translation")) o.fdTranslation = c["fd_translation"].get<double>();
  if (c.contains("rs0_sigma")) o.rs0Sigma = c["rs0_sigma"].get<double>();
  if (c.contains("rs0_samples")) o.rs0Samples = c["rs0_samples"].get<int>();
  if (c.contains("early_exit")) o.earlyExit = c["early_exit"].get<double>();
  if (c.contains("bank_samples")) {
    const long long n = c["bank_samples"].get<long long>();
    if (n < 1) throw InvalidConfig("bank_samples must be positive");
    o.bankSamples = static_cast<std::size_t>(n);
  }
  o.validate();
  return o;
}

int resolveWorkers(const json& cfg, const dw_run_options* opts) {
  int w = cfg.value("workers", 1);
  if (opts && opts->workers > 0) w = opts->workers;
  return std::max(1, w);
}

std::uint64_t resolveSeed(const json& cfg, const dw_run_options* opts) {
  if (opts && opts->has_seed) return opts->seed;
  return cfg.value("seed", std::uint64_t{0});
}

json summaryJson(const bench::SweepCell& c) {
  std::size_t failed = 0;
  for (const auto& r : c.records) failed += r.failed ? 1 : 0;
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return json{{"axis", bench::sweepAxisName(c.axis)},
              {"value", c.value},
              {"method", bench::methodName(c.method)},
              {"n_tasks", c.summary.nTasks},
              {"d5", num(c.summary.d5)},
              {"d9", num(c.summary.d9)},
              {"acc", c.summary.acc},
              {"failed", failed}};
}

void writeText(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw geom::IoError("cannot write " + p.string());
  out << text;
  if (!out) throw geom::IoError("write failed for " + p.string());
}

std::string csvFor(const std::vector<const bench::SweepCell*>& cells) {
  std::string s = bench::csvHeader() + "\n";
  for (const auto* c : cells) {
    for (const auto& r : c->records) s += bench::csvRow(r) + "\n";
  }
  return s;
}

}  // namespace

extern "C" {

const char* dw_version(void) { return "0.1.0"; }

const char* dw_last_error(void) { return lastError.c_str(); }

const char* dw_status_name(dw_status s) {
  switch (s) {
    case DW_OK: return "ok";
    case DW_ERR_IO: return "io error";
    case DW_ERR_PARSE: return "parse error";
    case DW_ERR_DEGENERATE: return "degenerate geometry";
    case DW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void dw_string_free(char* s) { std::free(s); }

dw_status dw_shape_load_obj(const char* path, dw_shape** out) {
  return guarded([&] {
    if (!path) return fail(DW_ERR_INVALID_ARGUMENT, "null path");
    const std::filesystem::path p(path);
    return storeShape(geom::makeConvexShape(p.stem().string(), geom::loadObj(p)), out);
  });
}

dw_status dw_shape_load_composite(const char* dir, dw_shape** out) {
  return guarded([&] {
    if (!dir) return fail(DW_ERR_INVALID_ARGUMENT, "null path");
    return storeShape(geom::loadCompositeDir(dir), out);
  });
}

dw_status dw_shape_bundled(const char* name, dw_shape** out) {
  return guarded([&] {
    if (!name) return fail(DW_ERR_INVALID_ARGUMENT, "null name");
    return storeShape(geom::shapes::bundled(name), out);
  });
}

dw_status dw_shape_load(const char* source, dw_shape** out) {
  return guarded([&] {
    if (!source) return fail(DW_ERR_INVALID_ARGUMENT, "null source");
    return storeShape(geom::loadShape(source), out);
  });
}

void dw_shape_free(dw_shape* shape) { delete shape; }

dw_status dw_shape_info_get(const dw_shape* shape, dw_shape_info* out) {
  return guarded([&] {
    if (!shape || !out) return fail(DW_ERR_INVALID_ARGUMENT, "null argument");
    out->pieces = static_cast<int>(shape->shape.pieces.size());
    out->vertices = static_cast<int>(shape->shape.sourceMesh.vertices.size());
    out->triangles = static_cast<int>(shape->shape.sourceMesh.triangles.size());
    out->diag = shape->shape.diag;
    return DW_OK;
  });
}

dw_status dw_bundled_names(char** out) {
  return guarded([&] {
    if (!out) return fail(DW_ERR_INVALID_ARGUMENT, "null output pointer");
    std::string s;
    for (const auto& n : geom::shapes::bundledNames()) s += (s.empty() ? "" : ",") + n;
    *out = dupString(s);
    return DW_OK;
  });
}

dw_status dw_detect(const dw_shape* s1, const dw_pose* p1, const dw_shape* s2, const dw_pose* p2,
                    dw_witness* out) {
  return guarded([&] {
    if (!s1 || !s2 || !out) return fail(DW_ERR_INVALID_ARGUMENT, "null argument");
    const auto w = narrowphase::compositeWitness(s1->shape, toPose(p1), s2->shape, toPose(p2));
    for (int i = 0; i < 3; ++i) {
      out->x1[i] = w.x1World[i];
      out->x2[i] = w.x2World[i];
      out->normal[i] = w.normal[i];
    }
    out->signed_distance = w.signedDistance;
    out->penetrating = w.penetrating ? 1 : 0;
    out->piece1 = w.piece1;
    out->piece2 = w.piece2;
    out->converged = w.converged ? 1 : 0;
    return DW_OK;
  });
}

dw_status dw_bench_run(const char* config_json, const char* out_dir, const dw_run_options* opts,
                       char** summary_json) {
  return guarded([&] {
    if (!config_json) return fail(DW_ERR_INVALID_ARGUMENT, "null config");
    const json cfg = json::parse(config_json);
    checkKeys(cfg, {&kBenchKeys, &kOptimizerKeys, &kSamplingKeys});
    const bench::OptimizerConfig base = optimizerFrom(cfg);
    const std::uint64_t seed = resolveSeed(cfg, opts);
    const int workers = resolveWorkers(cfg, opts);

    std::vector<std::pair<std::string, std::string>> pairs;
    if (cfg.contains("pairs")) {
      for (const auto& p : cfg["pairs"]) {
        if (!p.is_array() || p.size() != 2) throw InvalidConfig("pairs entries are [shape1, shape2]");
        pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
      }
    } else {
      const auto shapes = cfg.value("shapes", std::vector<std::string>{"cube"});
      for (const auto& a : shapes) {
        for (const auto& b : shapes) pairs.emplace_back(a, b);
      }
    }
    if (cfg.contains("pair_count")) {
      const int n = cfg["pair_count"].get<int>();
      if (n < 1) throw InvalidConfig("pair_count must be positive");
      if (static_cast<std::size_t>(n) < pairs.size()) pairs.resize(n);
    }
    if (pairs.empty()) throw InvalidConfig("no shape pairs");
    const int perPair = cfg.value("tasks_per_pair", 16);
    if (perPair < 1) throw InvalidConfig("tasks_per_pair must be positive");

    std::vector<bench::Method> methods;
    for (const auto& m : cfg.value("methods", std::vector<std::string>{"ours"})) methods.push_back(bench::parseMethod(m));
    if (methods.empty()) throw InvalidConfig("methods must not be empty");

    const bench::SweepAxis axis = bench::parseSweepAxis(cfg.value("sweep_axis", std::string("none")));
    const auto grid = cfg.value("sweep_grid", std::vector<double>{});
    const auto variants = bench::expandGrid(axis, grid, base);

    std::vector<bench::TaskSpec> tasks;
    std::map<std::string, std::shared_ptr<const geom::CompositeShape>> cache;
    auto shape = [&](const std::string& src) {
      auto it = cache.find(src);
      if (it == cache.end()) it = cache.emplace(src, std::make_shared<geom::CompositeShape>(geom::loadShape(src))).first;
      return it->second;
    };
    for (const auto& [a, b] : pairs) {
      auto t = bench::generateTasks(shape(a), shape(b), perPair, seed, static_cast<int>(tasks.size()));
      tasks.insert(tasks.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }

    if (!out_dir && cfg.contains("output_dir")) out_dir = cfg["output_dir"].get_ref<const std::string&>().c_str();
    std::filesystem::path out;
    if (out_dir) {
      out = out_dir;
      std::filesystem::create_directories(out);
    }

    const auto start = std::chrono::steady_clock::now();
    const auto cells = bench::runSweep(axis, variants, methods, tasks, workers);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json summary{{"version", dw_version()},
                 {"seed", seed},
                 {"sweep_axis", bench::sweepAxisName(axis)},
                 {"n_tasks", tasks.size()},
                 {"workers", workers},
                 {"elapsed_s", elapsed},
                 {"cells", json::array()}};
    for (const auto& c : cells) summary["cells"].push_back(summaryJson(c));

    if (out_dir) {
      if (axis == bench::SweepAxis::None) {
        std::vector<const bench::SweepCell*> all;
        for (const auto& c : cells) all.push_back(&c);
        writeText(out / "results.csv", csvFor(all));
      } else {
        // One directory per grid value, each with its own CSV and summary.
        for (const auto& v : variants) {
          std::vector<const bench::SweepCell*> sel;
          json cellSummary = json::array();
          for (const auto& c : cells) {
            if (c.value == v.label) {
              sel.push_back(&c);
              cellSummary.push_back(summaryJson(c));
            }
          }
          const auto dir = out / (std::string(bench::sweepAxisName(axis)) + "_" + v.label);
          std::filesystem::create_directories(dir);
          writeText(dir / "results.csv", csvFor(sel));
          writeText(dir / "summary.json", json{{"cells", cellSummary}}.dump(2) + "\n");
        }
      }
      writeText(out / "summary.json", summary.dump(2) + "\n");
    }
    if (summary_json) *summary_json = dupString(summary.dump(2));
    return DW_OK;
  });
}

dw_status dw_gradcheck(const char* config_json, const dw_run_options* opts, char** report_json, int* passed) {
  return guarded([&] {
    if (!config_json) return fail(DW_ERR_INVALID_ARGUMENT, "null config");
    const json cfg = json::parse(config_json);
    checkKeys(cfg, {&kGradcheckKeys, &kSamplingKeys, &kScoreKey});
    gradient::GradcheckOptions o;
    applySampling(cfg, o.sampling);
    o.probes = cfg.value("probes", 100);
    o.seed = resolveSeed(cfg, opts);
    o.h = cfg.value("h", 1e-6);
    o.tolerance = cfg.value("tolerance", 1e-3);
    o.crossScale = cfg.value("corrupt_cross", 1.0);
    if (cfg.contains("score")) o.score = parseScore(cfg["score"].get<std::string>());
    const auto s1 = geom::loadShape(cfg.value("shape1", std::string("icosahedron")));
    const auto s2 = geom::loadShape(cfg.value("shape2", cfg.value("shape1", std::string("icosahedron"))));
    const gradient::GradcheckReport rep = gradient::gradcheck(s1, s2, o);

    json blocks = json::object();
    for (int k = 0; k < 4; ++k) blocks[gradient::blockName(k)] = rep.maxBlockError[k];
    const json report{{"shape1", s1.name},
                      {"shape2", s2.name},
                      {"probes", rep.probes},
                      {"seed", o.seed},
                      {"h", o.h},
                      {"tolerance", o.tolerance},
                      {"max_rel_error", blocks},
                      {"max_transport_error", rep.maxTransportError},
                      {"passed", rep.passed},
                      {"warnings", rep.warnings}};
    if (passed) *passed = rep.passed ? 1 : 0;
    if (report_json) *report_json = dupString(report.dump(2));
    return DW_OK;
  });
}

}  // extern "C"
