// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "anosov/pipeline.hpp"
#include "anosov/spectrum.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace anosov;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

int threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Json artifact_json(const RunResult& r, const std::string& name) {
  const Artifact* a = r.find(name);
  if (!a) throw std::runtime_error("missing artifact " + name + " (" + r.message + ")");
  return Json::parse(a->content);
}

RunResult run_text(const std::string& text, int n_threads) {
  RunResult r = run_scenario(parse_scenario(text), {n_threads, {}});
  if (r.exit != ExitCode::Ok) throw std::runtime_error("stage " + r.stage + " failed: " + r.message);
  return r;
}

// Entropy runs shared by the Ruelle, Pesin and soundness criteria.
struct EntropyRun {
  std::string label;
  std::string text;  // empty for file scenarios
  std::string file;
  RunResult result;
  double seconds = 0;
};

std::string entropy_text(const std::string& model, int seed, double T) {
  return "[model]\n" + model + "[experiment]\ntype = entropy\nseed = " + std::to_string(seed) +
         "\n[spectrum]\nT = " + fmt(T, 6) + "\n[entropy]\nthetas = 20\nsamples_per_depth = 4000\nn_max = 12\n";
}

std::vector<EntropyRun>& entropy_runs() {
  static std::vector<EntropyRun> runs = [] {
    std::vector<EntropyRun> v;
    v.push_back({"flat", entropy_text("kind = flat\n", 11, 1000), "", {}, 0});
    v.push_back({"hyperbolic(c=1)", entropy_text("kind = hyperbolic\nc = 1\n", 12, 1000), "", {}, 0});
    v.push_back({"hyperbolic(c=2)", entropy_text("kind = hyperbolic\nc = 2\n", 13, 1000), "", {}, 0});
    v.push_back({"perturbed(c=1,eps=0.1)", entropy_text("kind = perturbed\nc = 1\neps = 0.1\n", 14, 2000), "", {},
                 0});
    v.push_back({"modular", "", std::string(ANOSOV_SCENARIO_DIR) + "/modular_verdict.scenario", {}, 0});
    for (auto& r : v) {
      auto t0 = Clock::now();
      Scenario sc = r.file.empty() ? parse_scenario(r.text) : load_scenario(r.file);
      r.result = run_scenario(sc, {threads(), {}});
      r.seconds = seconds_since(t0);
      if (r.result.exit != ExitCode::Ok)
        throw std::runtime_error(r.label + ": stage " + r.result.stage + " failed: " + r.result.message);
    }
    return v;
  }();
  return runs;
}

Vec2 unit_vector(const SurfaceModel& m, const Vec2& p, std::mt19937_64& rng) {
  Vec2 w = testsupport::random_vec(rng);
  return w / g_norm(m, p, w);
}

// ---------------------------------------------------------------------------

Outcome constant_curvature_spectrum() {
  Outcome o{true, ""};
  for (double c : {1.0, 2.0}) {
    auto m = SurfaceModel::hyperbolic(c);
    auto t0 = Clock::now();
    auto s = lyapunov_spectrum(m, make_state(m, Vec2(0.1, 1.0), 0.4), 1000.0);
    double secs = seconds_since(t0);
    double tol = c == 1.0 ? 1e-3 : 2e-3;
    double err = std::max({std::abs(s.raw[0] - c), std::abs(s.raw[1]), std::abs(s.raw[2] + c)});
    bool ok = err <= tol && secs <= 60.0;
    o.pass = o.pass && ok;
    o.detail += "c=" + fmt(c) + " exponents (" + fmt(s.raw[0], 7) + ", " + fmt(s.raw[1], 3) + ", " +
                fmt(s.raw[2], 7) + ") err " + fmt(err, 2) + " tol " + fmt(tol, 2) + " in " + fmt(secs, 3) + " s; ";
  }
  return o;
}

Outcome spectrum_invariants() {
  Outcome o{true, ""};
  struct Case {
    SurfaceModel m;
    double T;
  };
  std::vector<Case> cases = {{SurfaceModel::hyperbolic(1.0), 1000},
                             {SurfaceModel::hyperbolic(2.0), 1000},
                             {SurfaceModel::modular(), 2000},
                             {SurfaceModel::perturbed(1.0, 0.1), 10000}};
  for (const auto& cs : cases) {
    auto s = lyapunov_spectrum(cs.m, make_state(cs.m, Vec2(0.1, 1.3), 0.9), cs.T);
    double zero_sum = std::abs(s.raw.sum());
    double symmetry = std::abs(s.raw[0] + s.raw[2]);
    double zero = std::abs(s.raw[1]);
    double worst = std::max({zero_sum, symmetry, zero});
    o.pass = o.pass && worst <= 5e-3;
    o.detail += cs.m.name() + " sum " + fmt(zero_sum, 2) + " sym " + fmt(symmetry, 2) + " zero " + fmt(zero, 2) + "; ";
  }
  return o;
}

Outcome pinching() {
  auto m = SurfaceModel::perturbed(1.0, 0.1);
  auto t0 = Clock::now();
  auto s = lyapunov_spectrum(m, make_state(m, Vec2(0.1, 1.0), 0.4), 1e4);
  double secs = seconds_since(t0);
  double chi = chi_plus(s);
  return {chi >= 0.9 && chi <= 1.1 && secs <= 600.0,
          "chi+ " + fmt(chi, 6) + " in [0.9, 1.1], " + fmt(secs, 3) + " s (limit 600)"};
}

Outcome ruelle() {
  Outcome o{true, ""};
  for (const auto& r : entropy_runs()) {
    Json e = artifact_json(r.result, "entropy.json");
    int conclusive = 0, violations = 0;
    double worst = -1e300;
    double chi = e["chi_plus"].get<double>(), tol = e["tolerance"].get<double>();
    for (const auto& h : e["h_local"]) {
      if (!h["conclusive"].get<bool>()) continue;
      ++conclusive;
      double v = h["h"].get<double>();
      worst = std::max(worst, v - chi);
      if (v > chi + 0.15) ++violations;
    }
    bool ok = conclusive >= 20 && violations == 0 && tol <= 0.15 && e["ruelle_pass"].get<bool>();
    o.pass = o.pass && ok;
    o.detail += r.label + " " + std::to_string(conclusive) + " conclusive, max h - chi+ " + fmt(worst, 3) + ", " +
                std::to_string(violations) + " violations; ";
  }
  return o;
}

Outcome pesin() {
  const auto& r = entropy_runs().back();
  Json e = artifact_json(r.result, "entropy.json");
  double chi = e["chi_plus"].get<double>(), h = e["h_central"].get<double>();
  int samples = e["bowen_config"]["samples_per_depth"].get<int>();
  int n_max = e["bowen_config"]["n_max"].get<int>();
  double y_core = e["bowen_config"]["core"]["y_core"].get<double>();
  bool ok = std::abs(h - chi) <= 0.15 && std::abs(chi - 1.0) <= 0.01 && r.seconds <= 1800.0 && samples >= 10000 &&
            n_max <= 12 && y_core == 5.0 && e["pesin_pass"].get<bool>();
  return {ok, "h_central " + fmt(h, 5) + " +- " + fmt(e["h_central_halfwidth"].get<double>(), 3) + ", chi+ " +
                  fmt(chi, 6) + ", |h - chi+| " + fmt(std::abs(h - chi), 3) + ", " + std::to_string(samples) +
                  " samples per depth to n=" + std::to_string(n_max) + ", " +
                  std::to_string(e["cusp_wrapped"].get<int>()) + " estimates cross the cusp wrap, " +
                  fmt(r.seconds, 4) + " s (limit 1800)"};
}

Outcome bound_certificates() {
  Outcome o{true, ""};
  const char* models[] = {"kind = hyperbolic\nc = 1\n", "kind = perturbed\nc = 1\neps = 0.1\n"};
  for (const char* model : models) {
    RunResult r = run_text(std::string("[model]\n") + model +
                               "[experiment]\ntype = bounds\nseed = 3\n[bounds]\nstates = 1000\n",
                           threads());
    Json b = artifact_json(r, "bounds.json");
    int violations = 0, min_samples = 1 << 30;
    for (const auto& c : b["checks"]) {
      violations += c["violations"].get<int>();
      min_samples = std::min(min_samples, c["samples"].get<int>());
    }
    double Q = b["certificate"]["Q"].get<double>();
    int skipped = b["skipped"].get<int>();
    bool ok = violations == 0 && Q < 1.0 && skipped < 10 && min_samples > 0 && b["all_pass"].get<bool>();
    o.pass = o.pass && ok;
    o.detail += b["model"].get<std::string>() + " " + std::to_string(b["checks"].size()) + " checks, " +
                std::to_string(violations) + " violations, Q " + fmt(Q) + ", m " +
                std::to_string(b["certificate"]["m"].get<int>()) + ", skipped " + std::to_string(skipped) +
                "/1000; ";
  }
  return o;
}

Outcome inclusion() {
  RunResult r = run_text("[model]\nkind = hyperbolic\nc = 1\n[experiment]\ntype = inclusion\n"
                         "[inclusion]\nrho = 0.1\nboundary = 1000\n",
                         threads());
  Json j = artifact_json(r, "inclusion.json");
  bool pass = j["pass"].get<bool>();
  double margin = j["worst_margin"].get<double>(), skipped = j["skipped_fraction"].get<double>();
  return {pass && margin > 0 && skipped < 0.01 && j["samples"].get<int>() == 1000,
          "m " + std::to_string(j["iterate"].get<int>()) + ", margin " + fmt(margin) + ", skipped fraction " +
              fmt(skipped, 3)};
}

Outcome sasaki_curvature() {
  Outcome o{true, ""};
  std::mt19937_64 rng(808);
  for (const auto& m : {SurfaceModel::flat(), SurfaceModel::hyperbolic(1.0)}) {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      auto st = testsupport::random_state(m, rng);
      auto [b1, b2] = testsupport::random_admissible(st, rng);
      double val = sasaki_sectional(m, st, b1, b2);
      Vec3 u(st.base.x(), st.base.y(), state_angle(st));
      double orc = oracle::lifted_sectional(m, u, assemble(m, st, b1), assemble(m, st, b2));
      worst = std::max(worst, std::abs(val - orc));
    }
    o.pass = o.pass && worst <= 1e-3;
    o.detail += m.name() + " worst |K - oracle| " + fmt(worst, 3) + " over 100 bases; ";
  }
  return o;
}

Outcome exp_derivative() {
  const double t0 = 0.5, bound = 2.5;
  // Root of sinh(t) / t = 5/2: the radius for w orthogonal to v at curvature -1.
  const double root_c1 = 2.55269;
  Outcome o{true, ""};
  std::mt19937_64 rng(909);
  for (const auto& m : testsupport::all_models()) {
    double worst = 0;
    std::vector<std::pair<UnitTangentState, Vec2>> samples;
    for (int i = 0; i < 100; ++i) {
      auto st = testsupport::random_state(m, rng);
      Vec2 w = unit_vector(m, st.base, rng);
      samples.push_back({st, w});
      for (int k = -5; k <= 5; ++k) {
        double t = t0 * k / 5.0;
        auto e = exp_map(m, st.base, st.dir, t, w);
        worst = std::max(worst, g_norm(m, e.point, *e.dexp_w));
      }
    }
    auto est = estimate_exp_radius(m, samples, bound, 4.0);
    bool ok = worst <= bound;
    if (m.kind() == ModelKind::HyperbolicConstant && m.c() == 1.0) ok = ok && est.t0 >= root_c1 - 1e-3;
    if (m.kind() == ModelKind::Flat) ok = ok && est.capped;
    o.pass = o.pass && ok;
    o.detail += m.name() + " max |dexp w| " + fmt(worst) + ", largest valid t0 " +
                (est.capped ? ">= 4" : fmt(est.t0)) + "; ";
  }
  return o;
}

// Rows of bowen_counts.csv grouped by theta_id.
struct CountRow {
  int n;
  double nu, halfwidth;
};

std::map<int, std::vector<CountRow>> parse_counts(const std::string& csv) {
  std::map<int, std::vector<CountRow>> out;
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error("bad bowen_counts row: " + line);
    out[static_cast<int>(*parse_int(f[0]))].push_back({static_cast<int>(*parse_int(f[1])), *parse_double(f[6]), *parse_double(f[8])});
  }
  return out;
}

Outcome soundness() {
  Outcome o{true, ""};
  int pairs = 0, breaks = 0;
  for (const auto& r : entropy_runs()) {
    for (const auto& [id, rows] : parse_counts(r.result.find("bowen_counts.csv")->content))
      for (size_t i = 1; i < rows.size(); ++i) {
        ++pairs;
        if (rows[i].nu > rows[i - 1].nu + rows[i - 1].halfwidth + rows[i].halfwidth) ++breaks;
      }
  }
  o.pass = breaks == 0 && pairs > 0;
  o.detail = std::to_string(breaks) + " monotonicity breaks in " + std::to_string(pairs) + " depth pairs; ";

  // Repeat two of the runs with a different thread count.
  int mismatched = 0, compared = 0;
  for (size_t k : {size_t(1), size_t(3)}) {
    const auto& first = entropy_runs()[k];
    RunResult again = run_text(first.text, threads() + 1);
    if (again.artifacts.size() != first.result.artifacts.size()) ++mismatched;
    for (size_t i = 0; i < again.artifacts.size() && i < first.result.artifacts.size(); ++i) {
      ++compared;
      if (again.artifacts[i].name != first.result.artifacts[i].name ||
          again.artifacts[i].content != first.result.artifacts[i].content)
        ++mismatched;
    }
  }
  o.pass = o.pass && mismatched == 0;
  o.detail += std::to_string(compared) + " artifacts compared across repeat runs, " + std::to_string(mismatched) +
              " differ";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> all = {
      {1, "constant curvature spectrum", constant_curvature_spectrum},
      {2, "spectrum invariants", spectrum_invariants},
      {3, "pinched perturbation chi+", pinching},
      {4, "Ruelle inequality on every model", ruelle},
      {5, "Pesin equality on the modular surface", pesin},
      {6, "bound certificates", bound_certificates},
      {7, "ball inclusion", inclusion},
      {8, "Sasaki curvature against the lifted metric", sasaki_curvature},
      {9, "exponential map derivative", exp_derivative},
      {10, "estimator monotonicity and determinism", soundness},
  };
  int failed = 0;
  for (const auto& c : all) {
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.title << ": " << o.detail
              << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
