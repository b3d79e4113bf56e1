#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "diffwitness/diffwitness.h"
#include "doctest.h"
#include "json.hpp"

using json = nlohmann::json;

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { dw_string_free(p); }
};

dw_pose at(double x, double y = 0, double z = 0) { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}, {x, y, z}}; }

json bench(const json& cfg, const char* out = nullptr, int workers = 1) {
  const dw_run_options o{workers, 0, 0};
  Owned s;
  const dw_status st = dw_bench_run(cfg.dump().c_str(), out, &o, &s.p);
  REQUIRE_MESSAGE(st == DW_OK, dw_last_error());
  return json::parse(s.p);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the two timing columns.
std::string withoutTiming(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    for (int k = 0; k < 2; ++k) line = line.substr(0, line.rfind(','));
    out << line << "\n";
  }
  return out.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dw_capi_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(dw_version()) == "0.1.0");
  CHECK(std::string(dw_status_name(DW_OK)) == "ok");
  CHECK(std::string(dw_status_name(DW_ERR_PARSE)) != std::string(dw_status_name(DW_ERR_IO)));
}

TEST_CASE("shapes") {
  Owned names;
  REQUIRE(dw_bundled_names(&names.p) == DW_OK);
  CHECK(std::string(names.p).find("cube") != std::string::npos);

  dw_shape* s = nullptr;
  REQUIRE(dw_shape_bundled("ring8", &s) == DW_OK);
  dw_shape_info info{};
  REQUIRE(dw_shape_info_get(s, &info) == DW_OK);
  CHECK(info.pieces > 1);
  CHECK(info.diag > 0.0);
  dw_shape_free(s);

  s = nullptr;
  CHECK(dw_shape_load("/nonexistent/shape.obj", &s) == DW_ERR_IO);
  CHECK(s == nullptr);
  CHECK(std::string(dw_last_error()).size() > 0);
  CHECK(dw_shape_bundled("no_such_shape", &s) == DW_ERR_INVALID_ARGUMENT);
  CHECK(dw_shape_load(nullptr, &s) == DW_ERR_INVALID_ARGUMENT);

  const auto bad = std::filesystem::temp_directory_path() / "dw_capi_bad.obj";
  std::ofstream(bad) << "v 0 0 0\nv 1 0 0\nf 1 2 7\n";
  CHECK(dw_shape_load_obj(bad.c_str(), &s) == DW_ERR_PARSE);
  const auto flat = std::filesystem::temp_directory_path() / "dw_capi_flat.obj";
  std::ofstream(flat) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n";
  CHECK(dw_shape_load_obj(flat.c_str(), &s) == DW_ERR_DEGENERATE);
}

TEST_CASE("detect") {
  dw_shape *a = nullptr, *b = nullptr;
  REQUIRE(dw_shape_bundled("cube", &a) == DW_OK);
  REQUIRE(dw_shape_bundled("cube", &b) == DW_OK);
  const dw_pose p1 = at(0), far = at(3), near = at(0.8);
  dw_witness w{};
  REQUIRE(dw_detect(a, &p1, b, &far, &w) == DW_OK);
  CHECK(w.penetrating == 0);
  CHECK(w.signed_distance == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(w.x1[0] == doctest::Approx(0.5));
  CHECK(w.x2[0] == doctest::Approx(2.5));
  REQUIRE(dw_detect(a, &p1, b, &near, &w) == DW_OK);
  CHECK(w.penetrating == 1);
  CHECK(w.signed_distance == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(dw_detect(a, &p1, nullptr, &near, &w) == DW_ERR_INVALID_ARGUMENT);
  dw_shape_free(a);
  dw_shape_free(b);
}

TEST_CASE("bench config errors") {
  const dw_run_options o{1, 0, 0};
  Owned s;
  CHECK(dw_bench_run("{\"shapes\": [\"cube\"], \"bogus\": 1}", nullptr, &o, &s.p) == DW_ERR_INVALID_ARGUMENT);
  CHECK(std::string(dw_last_error()).find("bogus") != std::string::npos);
  CHECK(dw_bench_run("{not json", nullptr, &o, &s.p) == DW_ERR_PARSE);
  CHECK(dw_bench_run("{\"methods\": [\"nope\"]}", nullptr, &o, &s.p) == DW_ERR_INVALID_ARGUMENT);
  CHECK(dw_bench_run("{\"sweep_axis\": \"sideways\"}", nullptr, &o, &s.p) == DW_ERR_INVALID_ARGUMENT);
  CHECK(dw_bench_run("{\"shapes\": [\"/nonexistent.obj\"]}", nullptr, &o, &s.p) == DW_ERR_IO);
  CHECK(s.p == nullptr);
}

TEST_CASE("bench output layout") {
  const json cfg{{"shapes", {"cube", "icosahedron"}}, {"tasks_per_pair", 2}, {"iterations", 40},
                 {"methods", {"ours", "rs0"}}, {"seed", 5}};
  const auto dir = scratch("bench");
  const json s = bench(cfg, dir.c_str());
  CHECK(s["n_tasks"] == 8);
  CHECK(s["seed"] == 5);
  CHECK(s["sweep_axis"] == "none");
  const std::set<std::string> keys{"version", "seed", "sweep_axis", "n_tasks", "workers", "elapsed_s", "cells"};
  for (const auto& [k, v] : s.items()) CHECK(keys.count(k) == 1);
  REQUIRE(s["cells"].size() == 2);
  for (const auto& c : s["cells"]) {
    for (const char* k : {"axis", "value", "method", "n_tasks", "d5", "d9", "acc", "failed"}) CHECK(c.contains(k));
  }
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.rfind("task_id,method,final_loss,iters,fwd_us,bwd_us\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 16);
  CHECK(json::parse(slurp(dir / "summary.json"))["cells"] == s["cells"]);
}

TEST_CASE("workers do not change results") {
  const json cfg{{"shapes", {"cube", "ring8"}}, {"tasks_per_pair", 2}, {"iterations", 60}, {"methods", {"ours", "rs0"}}};
  const auto d1 = scratch("w1"), d3 = scratch("w3");
  bench(cfg, d1.c_str(), 1);
  bench(cfg, d3.c_str(), 3);
  CHECK(withoutTiming(slurp(d1 / "results.csv")) == withoutTiming(slurp(d3 / "results.csv")));
}

TEST_CASE("sweep cells") {
  const json cfg{{"shapes", {"cube"}}, {"tasks_per_pair", 2}, {"iterations", 20}, {"methods", {"ours", "rs1_dir"}},
                 {"sweep_axis", "margin"}, {"sweep_grid", {0.0, 1e-5, 1e-4, 1e-3, 1e-2}}};
  const auto dir = scratch("sweep");
  const json s = bench(cfg, dir.c_str());
  CHECK(s["cells"].size() == 10);
  int subdirs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_directory()) continue;
    ++subdirs;
    CHECK(e.path().filename().string().rfind("margin_", 0) == 0);
    CHECK(std::filesystem::exists(e.path() / "results.csv"));
    CHECK(json::parse(slurp(e.path() / "summary.json"))["cells"].size() == 2);
  }
  CHECK(subdirs == 5);

  const json abl = bench({{"shapes", {"cube"}}, {"tasks_per_pair", 1}, {"iterations", 5}, {"sweep_axis", "ablation"}});
  CHECK(abl["cells"].size() == 8);
}

TEST_CASE("ours beats the analytical gradient") {
  const json s = bench({{"shapes", {"cube", "icosahedron"}}, {"tasks_per_pair", 8}, {"methods", {"ours", "analytical"}}});
  const double ours = s["cells"][0]["acc"], ana = s["cells"][1]["acc"];
  CHECK(s["cells"][0]["method"] == "ours");
  CHECK(ours > ana + 0.3);
}

TEST_CASE("gradcheck") {
  const dw_run_options o{1, 0, 0};
  int passed = -1;
  {
    Owned r;
    REQUIRE(dw_gradcheck("{\"shape1\": \"cube\", \"shape2\": \"lshape\", \"probes\": 20}", &o, &r.p, &passed) == DW_OK);
    const json j = json::parse(r.p);
    CHECK(passed == 1);
    CHECK(j["passed"] == true);
    CHECK(j["max_rel_error"].size() == 4);
    CHECK(j["max_transport_error"].get<double>() < 1e-9);
  }
  {
    Owned r;
    REQUIRE(dw_gradcheck("{\"probes\": 0}", &o, &r.p, &passed) == DW_OK);
    CHECK(passed == 1);
    CHECK(json::parse(r.p)["warnings"].size() == 1);
  }
  {
    Owned r;
    REQUIRE(dw_gradcheck("{\"probes\": 10, \"corrupt_cross\": 1.5}", &o, &r.p, &passed) == DW_OK);
    const json j = json::parse(r.p);
    CHECK(passed == 0);
    CHECK(j["max_rel_error"]["x1_xi2"].get<double>() > 0.1);
    CHECK(j["max_rel_error"]["x1_xi1"].get<double>() < 1e-3);
  }
  Owned r;
  CHECK(dw_gradcheck("{\"probes\": -1}", &o, &r.p, &passed) == DW_ERR_INVALID_ARGUMENT);
  CHECK(dw_gradcheck("{\"whatever\": 1}", &o, &r.p, &passed) == DW_ERR_INVALID_ARGUMENT);
}
