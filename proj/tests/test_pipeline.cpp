#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "anosov/pipeline.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace anosov;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("anosov_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small but complete entropy run on H(1).
const char* kSmallEntropy =
    "[model]\nkind = hyperbolic\nc = 1\n"
    "[experiment]\ntype = entropy\nseed = 5\n"
    "[spectrum]\nT = 200\n"
    "[entropy]\nthetas = 3\nsamples_per_depth = 600\npilot_samples = 300\nn_max = 6\n"
    "fit_min_inside = 20\nsuprema_states = 50\npartition_cells = 4\npartition_pairs = 2000\n"
    "[trajectory]\nT = 1\ndt = 0.25\n";

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  std::vector<int> out(20, 0);
  parallel_for(20, 4, [&](int i) { out[i] = i * i; });
  for (int i = 0; i < 20; ++i) CHECK(out[i] == i * i);
  try {
    parallel_for(20, 1, [&](int i) {
      if (i >= 7) throw std::runtime_error(std::to_string(i));
    });
    FAIL("no exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "7");
  }
}

TEST_CASE("spectrum scenario artifacts") {
  Scenario sc = parse_scenario("[model]\nkind = hyperbolic\nc = 1\n[experiment]\ntype = spectrum\n[spectrum]\nT = 1000\n");
  RunResult r = run_scenario(sc);
  REQUIRE(r.exit == ExitCode::Ok);
  const Artifact* a = r.find("spectrum.json");
  REQUIRE(a);
  Json j = Json::parse(a->content);
  // Documented key order.
  std::vector<std::string> keys;
  for (const auto& el : j.items()) keys.push_back(el.key());
  std::vector<std::string> head(keys.begin(), keys.begin() + 7);
  CHECK(head == std::vector<std::string>{"model", "theta0", "T", "exponents", "multiplicities", "chi_plus",
                                         "trace_halfwidth"});
  CHECK(j["model"] == "hyperbolic(c=1)");
  REQUIRE(j["exponents"].size() == 3);
  CHECK(std::abs(j["exponents"][0].get<double>() - 1.0) <= 1e-3);
  CHECK(std::abs(j["exponents"][1].get<double>()) <= 1e-3);
  CHECK(std::abs(j["exponents"][2].get<double>() + 1.0) <= 1e-3);
  CHECK(std::abs(j["chi_plus"].get<double>() - 1.0) <= 1e-3);
  REQUIRE(r.find("report.json"));
  CHECK_FALSE(r.find("error.json"));
}

TEST_CASE("numerical failure gives exit 3 and error.json") {
  Scenario sc = parse_scenario("[model]\nkind = hyperbolic\nc = 2\n[experiment]\ntype = spectrum\n"
                               "[spectrum]\nT = 40000\nrenorm_dt = 400\nwarmup = 0\n");
  RunResult r = run_scenario(sc);
  CHECK(r.exit == ExitCode::Numerical);
  CHECK(r.stage == "spectrum");
  const Artifact* e = r.find("error.json");
  REQUIRE(e);
  Json j = Json::parse(e->content);
  CHECK(j["stage"] == "spectrum");
  CHECK(j["exit_code"] == 3);
  CHECK(j["kind"] == "numerical");
  CHECK_FALSE(r.find("spectrum.json"));
}

TEST_CASE("entropy run is independent of the thread count") {
  Scenario sc = parse_scenario(kSmallEntropy);
  RunResult a = run_scenario(sc, {1, {}});
  RunResult b = run_scenario(sc, {3, {}});
  REQUIRE(a.exit == ExitCode::Ok);
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (size_t i = 0; i < a.artifacts.size(); ++i) {
    CHECK(a.artifacts[i].name == b.artifacts[i].name);
    CHECK_MESSAGE(a.artifacts[i].content == b.artifacts[i].content, a.artifacts[i].name);
  }
  std::vector<std::string> names;
  for (const auto& x : a.artifacts) names.push_back(x.name);
  CHECK(names == std::vector<std::string>{"spectrum.json", "trajectory.csv", "entropy.json", "bowen_counts.csv",
                                          "report.json"});

  std::istringstream csv(a.find("bowen_counts.csv")->content);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "theta_id,n,inside,escaped,indeterminate,ball_measure,nu,nu_lower,halfwidth");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3 * 7);

  Json e = Json::parse(a.find("entropy.json")->content);
  CHECK(e["h_local"].size() == 3);
  CHECK(e["h_partition"]["holds"] == true);
  Json rep = Json::parse(a.find("report.json")->content);
  CHECK(rep["entropy"]["ruelle_pass"] == true);
  CHECK(rep["stages"] == Json::array({"spectrum", "trajectory", "entropy"}));

  // Changing the seed changes the Monte Carlo data.
  sc.seed = 6;
  RunResult c = run_scenario(sc);
  CHECK(c.find("bowen_counts.csv")->content != a.find("bowen_counts.csv")->content);
}

TEST_CASE("write_run, manifest and plots") {
  fs::path dir = scratch("plots");
  Scenario sc = parse_scenario(kSmallEntropy);
  RunResult r = run_scenario(sc);
  REQUIRE(r.exit == ExitCode::Ok);
  write_run(dir.string(), r);
  Json man = Json::parse(slurp(dir / "manifest.json"));
  CHECK(man["files"].size() == r.artifacts.size());
  for (const auto& f : man["files"]) {
    std::string p = f["path"];
    CHECK(f["sha256"] == sha256_hex(slurp(dir / p)));
    CHECK(r.find(p));
  }
  CHECK(verify_manifest(dir.string()).empty());

  auto plots = emit_plots(dir.string());
  std::vector<std::string> names;
  for (const auto& p : plots) names.push_back(p.name);
  CHECK(names.front() == "bowen_decay.csv");
  CHECK(std::find(names.begin(), names.end(), "bowen_decay_theta2.csv") != names.end());
  CHECK(std::find(names.begin(), names.end(), "spectrum_trace_1.csv") != names.end());
  CHECK(plots.front().content.rfind("n,log_nu\n", 0) == 0);

  // Zero exponent trace tends to 0.
  for (const auto& p : plots) {
    if (p.name != "spectrum_trace_1.csv") continue;
    std::istringstream is(p.content);
    std::string line, last;
    while (std::getline(is, line)) last = line;
    auto y = parse_double(last.substr(last.find(',') + 1));
    REQUIRE(y);
    CHECK(std::abs(*y) < 1e-2);
  }

  // Empty depth window: header only.
  auto empty = emit_plots(dir.string(), {5, 4});
  CHECK(empty.front().content == "n,log_nu\n");

  // A second run removes the artifacts of the first.
  Scenario spec = parse_scenario("[model]\nkind = hyperbolic\nc = 1\n[experiment]\ntype = spectrum\n[spectrum]\nT = 100\n");
  write_run(dir.string(), run_scenario(spec));
  CHECK_FALSE(fs::exists(dir / "bowen_counts.csv"));
  CHECK(fs::exists(dir / "spectrum.json"));

  // Tampering is detected and emit_plots refuses.
  { std::ofstream(dir / "spectrum.json", std::ios::app) << " "; }
  CHECK(verify_manifest(dir.string()) == std::vector<std::string>{"spectrum.json"});
  CHECK_THROWS_AS(emit_plots(dir.string()), ScenarioError);
  fs::remove(dir / "spectrum.json");
  CHECK_THROWS_AS(emit_plots(dir.string()), ScenarioError);
  fs::remove_all(dir);
  CHECK_THROWS_AS(emit_plots(dir.string()), ScenarioError);
}
