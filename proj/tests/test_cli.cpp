#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "tflim/cli.hpp"
#include "tflim/error.hpp"

using namespace tflim;
using namespace tflim::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tflim_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_args and to_args round trip") {
  const std::vector<std::vector<std::string>> inputs = {
      {"spectrum", "--F", "interval:0,1", "--S", "interval:-2,2", "--n", "64", "--eps", "0.01,0.1"},
      {"crossing", "--c", "10pi,20*pi", "--tol", "0"},
      {"plunge-scan", "--r", "1,2,4", "--S", "ball:1", "--d", "2"},
      {"plunge-scan", "--c", "31.4,62.8", "--out", "x", "--svg"},
      {"basis-check", "--j-max", "3", "--bump", "2", "--reach", "20"},
      {"classify", "--d", "2", "--S", "ball:1", "--r", "4", "--energy", "--partition-csv"},
      {"theorem1", "--d", "2", "--S", "ball:1", "--r", "4,8", "--error-json"},
      {"packing", "--J", "interval:-31.4,31.4", "--delta", "0.25", "--seed", "7"},
  };
  for (const auto& args : inputs) {
    const RunConfig cfg = parse_args(args);
    CHECK(parse_args(to_args(cfg)) == cfg);
  }
}

TEST_CASE("multiples of pi and canonical domains") {
  const RunConfig cfg = parse_args({"crossing", "--c", "pi,2pi,3*pi"});
  REQUIRE(cfg.c.size() == 3);
  CHECK(cfg.c[2] == doctest::Approx(3 * std::numbers::pi));
  const RunConfig b = parse_args({"classify", "--S", "interval:-1.0,1.00", "--r", "2"});
  CHECK(b.s == "interval:-1,1");
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(parse_args({"spectrum", "--F", "interval:0,1"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"crossing", "--bogus"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"classify", "--S", "ball:1", "--r", "0.5"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"classify", "--S", "ball:1", "--d", "2", "--r", "2", "--eps", "0.5"}),
                  ValidationError);
  CHECK_THROWS_AS(parse_args({"plunge-scan", "--c", "1", "--r", "2", "--S", "ball:1"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"packing", "--J", "interval:-1,1", "--delta", "1"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"basis-check", "--bump", "5/2"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"crossing", "--c", "ten"}), ValidationError);
  CHECK_THROWS_AS(parse_args({"nonsense"}), ValidationError);
  CHECK(parse_args({"--help"}).command.empty());
}

TEST_CASE("exit codes") {
  CHECK(invoke({"--help"}).code == 0);
  const Result help = invoke({"packing", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--J") != std::string::npos);
  CHECK(invoke({"spectrum", "--F", "interval:0,1"}).code == 2);
  // 5000 is the size cap of a dense operator.
  CHECK(invoke({"spectrum", "--F", "box:0,1;0,1", "--S", "box:-1,1;-1,1", "--n", "80"}).code == 2);
  // The rounding floor keeps 1e-15 out of reach.
  CHECK(invoke({"spectrum", "--F", "interval:0,1", "--S", "interval:-10,10", "--n", "600", "--tol", "1e-15"})
            .code == 3);
  CHECK(invoke({"crossing", "--c", "10pi", "--n", "300", "--tol", "1e-15"}).code == 3);
  const Result r = invoke({"spectrum", "--F", "interval:0,1", "--error-json"});
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j["error"] == "validation");
  CHECK(j["exit_code"] == 2);
}

TEST_CASE("unknown flag writes no files") {
  const fs::path dir = fresh_dir("unknown");
  const Result r = invoke({"spectrum", "--F", "interval:0,1", "--S", "interval:-1,1", "--frobnicate",
                           "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.out.empty());
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("spectrum crossing near c / 2 pi") {
  const Result r = invoke({"spectrum", "--F", "interval:0,1", "--S",
                           "interval:-31.415926535897931,31.415926535897931", "--n", "400"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["config"]["n"] == 400);
  for (const char* key : {"eigenvalues", "crossing_index", "plunge", "c", "n", "converged"})
    CHECK(j.contains(key));
  CHECK(j["eigenvalues"].size() == 400);
  CHECK(j["plunge"].contains("0.01"));
  CHECK(j["converged"].is_null());
  const int k = j["crossing_index"];
  CHECK(k >= 9);
  CHECK(k <= 11);
}

TEST_CASE("spectrum with refinement reports convergence") {
  const Result r = invoke({"spectrum", "--F", "interval:0,1", "--S", "interval:-10,10", "--n", "256", "--tol",
                           "1e-8"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["converged"] == true);
  CHECK(j["n"].get<int>() <= 256);
}

TEST_CASE("theorem1 example passes") {
  const Result r = invoke({"theorem1", "--d", "2", "--S", "ball:1", "--r", "4,8", "--eps", "0.1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["rows"].size() == 2);
  for (const auto& row : j["rows"]) CHECK(row["plunge"].get<int>() <= 2 * row["res"].get<int>());
}

TEST_CASE("artifacts are complete and deterministic") {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const std::vector<std::string> base = {"plunge-scan", "--c", "10pi,20pi", "--eps", "0.01,0.1", "--svg"};
  auto with_out = [&](const fs::path& p) {
    auto v = base;
    v.push_back("--out");
    v.push_back(p.string());
    return v;
  };
  setenv("TFLIM_WORKERS", "1", 1);
  const Result r1 = invoke(with_out(a));
  setenv("TFLIM_WORKERS", "3", 1);
  const Result r2 = invoke(with_out(b));
  unsetenv("TFLIM_WORKERS");
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  for (const char* name : {"plunge-scan.json", "plunge-scan.csv", "plunge-scan.svg"}) {
    REQUIRE(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  // No temporaries left behind.
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(e.path().string().find(".tmp") == std::string::npos);
  }
  CHECK(files == 3);
  const std::string svg = slurp(a / "plunge-scan.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(slurp(a / "plunge-scan.csv").rfind("c,eps,near_one_count,plunge_count,n_per_axis\n", 0) == 0);
}

TEST_CASE("worker count from the environment") {
  setenv("TFLIM_WORKERS", "4", 1);
  CHECK(worker_count() == 4);
  setenv("TFLIM_WORKERS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), ValidationError);
  unsetenv("TFLIM_WORKERS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](int i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 7) throw ConvergenceError("seven");
                  }),
                  ConvergenceError);
}

TEST_CASE("write_atomic replaces content") {
  const fs::path dir = fresh_dir("atomic");
  fs::create_directories(dir);
  write_atomic(dir / "f.txt", "first");
  write_atomic(dir / "f.txt", "second");
  CHECK(slurp(dir / "f.txt") == "second");
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 1);
}

TEST_CASE("svg escapes labels") {
  const std::string svg = svg_line_chart("a<b", "x&y", "y", {{"s", {0, 1}, {1, 2}}});
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg.find("x&amp;y") != std::string::npos);
}
