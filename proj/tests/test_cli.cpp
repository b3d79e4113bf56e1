#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + DW_CLI + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Result r;
  std::array<char, 4096> buf;
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dw_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("detect exit codes") {
  const Result sep = run("detect cube cube --pose2 '{\"t\": [3, 0, 0]}'");
  CHECK(sep.code == 0);
  const json j = json::parse(sep.out);
  CHECK(j["distance"].get<double>() == doctest::Approx(2.0));
  CHECK(j["penetrating"] == false);

  const Result pen = run("detect cube icosahedron --pose2 '{\"t\": [0.5, 0, 0]}'");
  CHECK(pen.code == 10);
  CHECK(json::parse(pen.out)["penetration_depth"].get<double>() > 0.0);

  CHECK(run("detect cube /nonexistent/shape.obj").code == 2);
  CHECK(run("detect cube cube --pose2 '{\"t\": [1, 2]}'").code == 2);
  CHECK(run("detect cube cube --pose2 '{\"q\": [1, 2, 3]}'").code == 2);

  const auto pose = std::filesystem::temp_directory_path() / "dw_cli_pose.json";
  std::ofstream(pose) << R"({"R": [0, -1, 0, 1, 0, 0, 0, 0, 1], "t": [0, 4, 0]})";
  CHECK(run("detect lshape ring8 --pose2 " + pose.string()).code == 0);
}

TEST_CASE("bench writes the csv schema") {
  const auto dir = scratch("bench");
  const Result r = run("bench --config '{\"shapes\": [\"cube\"], \"tasks_per_pair\": 3, \"iterations\": 30}' --seed 4 --out " +
                       dir.string());
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "task_id,method,final_loss,iters,fwd_us,bwd_us");
  CHECK(json::parse(slurp(dir / "summary.json"))["seed"] == 4);
}

TEST_CASE("worker count precedence") {
  const std::string cfg = "--config '{\"shapes\": [\"cube\"], \"tasks_per_pair\": 1, \"iterations\": 5, \"workers\": 2}'";
  auto workers = [&](const std::string& extra, const std::string& env) {
    const auto dir = scratch("workers");
    REQUIRE(run("bench " + cfg + " " + extra + " --out " + dir.string(), env).code == 0);
    return json::parse(slurp(dir / "summary.json"))["workers"].get<int>();
  };
  CHECK(workers("", "") == 2);
  CHECK(workers("", "DIFFWITNESS_THREADS=3") == 3);
  CHECK(workers("--workers 4", "DIFFWITNESS_THREADS=3") == 4);
}

TEST_CASE("bench and sweep errors") {
  CHECK(run("bench --config '{\"bogus\": 1}'").code == 2);
  CHECK(run("bench --config /nonexistent/config.json").code == 2);
  CHECK(run("sweep --config '{\"shapes\": [\"cube\"]}'").code == 2);
  CHECK(run("sweep --axis margin --grid 0,abc").code == 2);
}

TEST_CASE("sweep") {
  const auto dir = scratch("sweep");
  const Result r = run("sweep --config '{\"shapes\": [\"cube\"], \"tasks_per_pair\": 1, \"iterations\": 10}' --axis margin "
                       "--grid 0,1e-5,1e-4,1e-3,1e-2 --out " + dir.string());
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(dir / "summary.json"))["cells"].size() == 5);
  CHECK(std::filesystem::exists(dir / "margin_1e-05" / "results.csv"));
}

TEST_CASE("gradcheck") {
  const Result ok = run("gradcheck cube ring8 --probes 10");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS") != std::string::npos);
  CHECK(run("gradcheck --probes 0").code == 0);
  const Result bad = run("gradcheck --probes 5 --corrupt-cross 1.5");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}
