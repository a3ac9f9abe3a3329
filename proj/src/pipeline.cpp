#include "anosov/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "anosov/rng.hpp"

namespace fs = std::filesystem;

namespace anosov {

namespace {

// Raised inside a stage to carry the exit class and the stage name.
struct StageFailure {
  ExitCode exit;
  std::string stage, message;
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

UnitTangentState theta_state(const SurfaceModel& m, const ThetaSpec& t) {
  return make_state(m, Vec2(t.x, t.y), t.angle);
}

struct Certified {
  AnosovFit fit;
  SplittingCensus census;
  AnosovCertificate cert;
};

// Parallel loop body per fixed-size chunk so that chunking never depends on
// the thread count.
constexpr int kChunk = 50;

std::vector<UnitTangentState> core_states(const SurfaceModel& m, int n, std::uint64_t seed,
                                          std::uint64_t label) {
  auto rng = keyed_rng(seed, {stream::kBounds, label});
  CoreSpec core = default_core(m);
  std::vector<UnitTangentState> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_liouville(m, core, rng));
  return out;
}

Certified certify(const SurfaceModel& m, const BoundsBudget& b, std::uint64_t seed, int threads) {
  Certified c;
  c.fit = fit_anosov_constants(m, core_states(m, b.fit_states, seed, 1), b.fit_T);
  auto cs = core_states(m, b.census_states, seed, 2);
  std::vector<std::optional<SplittingEstimate>> est(cs.size());
  parallel_for(static_cast<int>(cs.size()), threads, [&](int i) {
    try {
      est[i] = estimate_splitting(m, cs[i]);
    } catch (const SplittingFailure&) {
    }
  });
  std::vector<SplittingEstimate> ok;
  for (auto& e : est)
    if (e) ok.push_back(*e);
  if (ok.empty()) throw NumericalError("no splitting estimate converged on the census states");
  c.census = splitting_census(ok);
  c.cert = calibrate_certificate(m, c.fit, c.census, b.safety, b.iterate);
  return c;
}

Json certificate_json(const Certified& c) {
  Json j;
  j["fit"] = to_json(c.fit);
  j["census"] = to_json(c.census);
  j["certificate"] = to_json(c.cert);
  return j;
}

}  // namespace

const Artifact* RunResult::find(const std::string& name) const {
  for (const auto& a : artifacts)
    if (a.name == name) return &a;
  return nullptr;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  threads = std::max(1, std::min(threads, n));
  std::vector<std::exception_ptr> errs(n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errs[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
      for (int i; !failed && (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          errs[i] = std::current_exception();
          failed = true;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

RunResult run_scenario(const Scenario& sc, const RunOptions& opts) {
  RunResult res;
  auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };
  const int threads = std::max(1, opts.threads);
  const SurfaceModel m = sc.model.build();
  const std::uint64_t seed = sc.seed;

  Json report;
  report["model"] = to_json(m);
  report["experiment"] = experiment_name(sc.experiment);
  report["seed"] = seed;
  Json stages = Json::array();

  std::optional<LyapunovSpectrum> spec;
  std::optional<Certified> certified;
  std::string stage;

  auto lift = [&](auto&& fn) {
    try {
      fn();
    } catch (const StageFailure&) {
      throw;
    } catch (const ScenarioError& e) {
      throw StageFailure{ExitCode::Schema, stage, e.what()};
    } catch (const std::invalid_argument& e) {
      throw StageFailure{ExitCode::Schema, stage, e.what()};
    } catch (const std::exception& e) {
      throw StageFailure{ExitCode::Numerical, stage, e.what()};
    }
  };

  try {
    if (sc.runs_spectrum()) {
      stage = "spectrum";
      log("spectrum: T = " + format_double(sc.spectrum.T));
      lift([&] {
        SpectrumOptions so;
        so.warmup = sc.spectrum.warmup;
        so.tau = sc.spectrum.tau;
        so.integ.step = sc.spectrum.step;
        spec = lyapunov_spectrum(m, theta_state(m, sc.spectrum.theta), sc.spectrum.T, sc.spectrum.renorm_dt, so);
      });
      Json j = to_json(*spec);
      res.artifacts.push_back({"spectrum.json", dump(j)});
      Json s;
      s["exponents"] = j["exponents"];
      s["multiplicities"] = j["multiplicities"];
      s["chi_plus"] = j["chi_plus"];
      s["trace_halfwidth"] = j["trace_halfwidth"];
      s["converged"] = j["converged"];
      report["spectrum"] = s;
      stages.push_back(stage);
    }

    if (sc.trajectory) {
      stage = "trajectory";
      log("trajectory");
      std::ostringstream os;
      lift([&] {
        auto tr = sample_trajectory(m, theta_state(m, sc.trajectory->theta), sc.trajectory->T, sc.trajectory->dt);
        write_trajectory_header(os);
        for (const auto& s : tr) write_trajectory_row(os, s);
      });
      res.artifacts.push_back({"trajectory.csv", os.str()});
      stages.push_back(stage);
    }

    if (sc.runs_bounds()) {
      stage = "bounds";
      const BoundsBudget& b = *sc.bounds;
      log("bounds: " + std::to_string(b.states) + " states");
      BoundReport rep;
      lift([&] {
        certified = certify(m, b, seed, threads);
        auto states = core_states(m, b.states, seed, 0);
        int chunks = (b.states + kChunk - 1) / kChunk;
        std::vector<BoundReport> parts(chunks);
        parallel_for(chunks, threads, [&](int k) {
          size_t lo = size_t(k) * kChunk, hi = std::min(states.size(), lo + kChunk);
          std::vector<UnitTangentState> part(states.begin() + lo, states.begin() + hi);
          BoundCheckOptions bo;
          bo.neighbour_eps = b.neighbour_eps;
          bo.seed = seed;
          bo.index_offset = lo;
          parts[k] = check_bounds(m, part, certified->cert, bo);
        });
        rep = parts.front();
        for (int k = 1; k < chunks; ++k) rep.merge(parts[k]);
      });
      Json j;
      j["model"] = m.name();
      j["states"] = b.states;
      j["skipped"] = rep.skipped;
      j["all_pass"] = rep.all_pass();
      j["checks"] = to_json(rep);
      Json cj = certificate_json(*certified);
      for (const auto& el : cj.items()) j[el.key()] = el.value();
      res.artifacts.push_back({"bounds.json", dump(j)});
      int violations = 0;
      for (const auto& c : rep.checks) violations += c.violations;
      Json s;
      s["all_pass"] = rep.all_pass();
      s["violations"] = violations;
      s["skipped"] = rep.skipped;
      s["iterate"] = certified->cert.m;
      report["bounds"] = s;
      stages.push_back(stage);
    }

    if (sc.runs_inclusion()) {
      stage = "inclusion";
      const InclusionBudget& b = *sc.inclusion;
      log("inclusion: rho = " + format_double(b.rho));
      InclusionResult r;
      std::vector<InclusionResult> sweep(b.sweep.size());
      int iterate = 0;
      UnitTangentState th = theta_state(m, b.theta);
      lift([&] {
        if (!certified) certified = certify(m, sc.bounds.value_or(BoundsBudget{}), seed, threads);
        iterate = b.iterate.value_or(certified->cert.m);
        const std::uint64_t iseed = seed * 1000003ULL + stream::kInclusion;
        r = ball_inclusion(m, th, iterate, b.rho, certified->cert, b.boundary, iseed);
        parallel_for(static_cast<int>(sweep.size()), threads, [&](int i) {
          sweep[i] = ball_inclusion(m, th, iterate, b.sweep[i], certified->cert, b.boundary, iseed);
        });
      });
      Json j;
      j["model"] = m.name();
      j["theta"] = to_json(th);
      j["iterate"] = iterate;
      j["rho"] = b.rho;
      Json rj = to_json(r);
      for (const auto& el : rj.items()) j[el.key()] = el.value();
      Json sw = Json::array();
      double largest = 0;
      for (size_t i = 0; i < sweep.size(); ++i) {
        Json e;
        e["rho"] = b.sweep[i];
        Json sj = to_json(sweep[i]);
        for (const auto& el : sj.items()) e[el.key()] = el.value();
        sw.push_back(e);
        if (sweep[i].pass) largest = std::max(largest, b.sweep[i]);
      }
      j["sweep"] = sw;
      j["largest_passing_rho"] = b.sweep.empty() ? Json(nullptr) : Json(largest);
      j["certificate"] = to_json(certified->cert);
      res.artifacts.push_back({"inclusion.json", dump(j)});
      Json s;
      s["pass"] = r.pass;
      s["worst_margin"] = j["worst_margin"];
      s["skipped_fraction"] = r.skipped_fraction();
      report["inclusion"] = s;
      stages.push_back(stage);
    }

    if (sc.runs_entropy()) {
      stage = "entropy";
      const EntropyBudget& b = *sc.entropy;
      const BowenConfig& cfg = b.bowen;
      log("entropy: " + std::to_string(b.thetas) + " thetas, " + std::to_string(cfg.samples_per_depth) +
          " samples per depth");
      std::vector<BowenProfile> profiles(b.thetas);
      std::vector<LocalEntropy> hs(b.thetas);
      Suprema sup;
      std::optional<PartitionReport> part;
      EntropyReport er;
      lift([&] {
        std::atomic<int> done{0};
        std::mutex log_mu;
        parallel_for(b.thetas, threads, [&](int i) {
          auto rng = keyed_rng(seed, {stream::kThetaSample, static_cast<std::uint64_t>(i)});
          UnitTangentState th = sample_liouville(m, cfg.core, rng);
          profiles[i] = bowen_profile(m, th, cfg, seed, static_cast<std::uint64_t>(i));
          hs[i] = local_entropy(profiles[i], cfg);
          int d = ++done;
          std::lock_guard<std::mutex> lk(log_mu);
          log("entropy: theta " + std::to_string(d) + "/" + std::to_string(b.thetas));
        });
        log("entropy: suprema over " + std::to_string(b.suprema_states) + " states");
        sup = estimate_suprema(m, cfg.core, b.suprema_states, seed);
        if (b.partition) {
          log("entropy: partition");
          PartitionSpec ps;
          ps.nx = ps.ny = ps.nphi = b.partition_cells;
          ps.core = cfg.core;
          part = partition_entropy_bound(m, ps, b.partition_m, b.partition_pairs, seed, cfg.step);
        }
        er = verdict(m, cfg, *spec, hs, sup, b.tolerance);
        er.partition = part;
      });
      Json j = to_json(er);
      j["bowen_config"] = to_json(cfg);
      j["suprema"] = to_json(sup);
      Json rho = Json::array();
      for (const auto& p : profiles) rho.push_back(to_json(p.rho0));
      j["return_times"] = rho;
      res.artifacts.push_back({"entropy.json", dump(j)});
      res.artifacts.push_back({"bowen_counts.csv", bowen_counts_csv(profiles)});
      Json s;
      for (const char* k : {"chi_plus", "h_central", "h_central_halfwidth", "ruelle_slack", "pesin_deviation",
                            "tolerance", "ruelle_violations", "ruelle_pass", "pesin_applicable", "pesin_pass",
                            "lower_bound_fraction", "lower_bound_pass", "cusp_fraction", "cusp_wrapped"})
        s[k] = j[k];
      s["partition_holds"] = part ? Json(part->holds()) : Json(nullptr);
      report["entropy"] = s;
      stages.push_back(stage);
    }
  } catch (const StageFailure& f) {
    res.exit = f.exit;
    res.stage = f.stage;
    res.message = f.message;
    Json e;
    e["stage"] = f.stage;
    e["kind"] = f.exit == ExitCode::Schema ? "invalid_argument" : "numerical";
    e["message"] = f.message;
    e["exit_code"] = static_cast<int>(f.exit);
    e["completed_stages"] = stages;
    res.artifacts.push_back({"error.json", dump(e)});
    return res;
  }
  report["stages"] = stages;
  res.artifacts.push_back({"report.json", dump(report)});
  return res;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

std::optional<Json> read_manifest(const fs::path& dir) {
  fs::path p = dir / "manifest.json";
  if (!fs::is_regular_file(p)) return std::nullopt;
  try {
    Json j = Json::parse(read_file(p));
    if (!j.contains("files") || !j["files"].is_array()) return std::nullopt;
    return j;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

void refresh_manifest(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  Json files = Json::array();
  for (const auto& n : names) {
    std::string c = read_file(fs::path(dir) / n);
    Json f;
    f["path"] = n;
    f["bytes"] = c.size();
    f["sha256"] = sha256_hex(c);
    files.push_back(f);
  }
  Json j;
  j["hash"] = "sha256";
  j["files"] = files;
  write_file(fs::path(dir) / "manifest.json", dump(j));
}

void write_run(const std::string& dir, const RunResult& r) {
  fs::create_directories(dir);
  if (auto old = read_manifest(dir)) {
    for (const auto& f : (*old)["files"]) {
      if (!f.contains("path") || !f["path"].is_string()) continue;
      fs::path p = fs::path(dir) / f["path"].get<std::string>();
      std::error_code ec;
      fs::remove(p, ec);
    }
    std::error_code ec;
    fs::remove(fs::path(dir) / "plots", ec);
  }
  for (const auto& a : r.artifacts) write_file(fs::path(dir) / a.name, a.content);
  refresh_manifest(dir);
}

std::vector<std::string> verify_manifest(const std::string& dir) {
  auto man = read_manifest(dir);
  if (!man) throw ScenarioError(0, "no readable manifest.json in '" + dir + "'");
  std::vector<std::string> bad;
  for (const auto& f : (*man)["files"]) {
    std::string n = f.value("path", std::string());
    fs::path p = fs::path(dir) / n;
    if (n.empty() || !fs::is_regular_file(p) || sha256_hex(read_file(p)) != f.value("sha256", std::string()))
      bad.push_back(n);
  }
  return bad;
}

std::vector<Artifact> emit_plots(const std::string& dir, const PlotOptions& opts) {
  auto bad = verify_manifest(dir);
  if (!bad.empty()) throw ScenarioError(0, "report '" + bad.front() + "' is missing or differs from the manifest");
  const fs::path d(dir);
  std::vector<Artifact> out;
  bool any = false;

  if (fs::is_regular_file(d / "bowen_counts.csv")) {
    any = true;
    std::istringstream is(read_file(d / "bowen_counts.csv"));
    std::string line;
    std::getline(is, line);
    // theta_id -> (n, log nu)
    std::map<long long, std::vector<std::pair<double, double>>> per;
    std::map<int, std::pair<double, int>> mean;
    int row = 1;
    while (std::getline(is, line)) {
      ++row;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      std::string c;
      while (std::getline(ls, c, ',')) cols.push_back(c);
      auto id = cols.size() >= 7 ? parse_int(cols[0]) : std::nullopt;
      auto n = cols.size() >= 7 ? parse_int(cols[1]) : std::nullopt;
      auto nu = cols.size() >= 7 ? parse_double(cols[6]) : std::nullopt;
      if (!id || !n || !nu) throw ScenarioError(row, "bowen_counts.csv: malformed row");
      if (opts.n_min && *n < *opts.n_min) continue;
      if (opts.n_max && *n > *opts.n_max) continue;
      if (!(*nu > 0)) continue;
      per[*id].push_back({double(*n), std::log(*nu)});
      auto& acc = mean[int(*n)];
      acc.first += std::log(*nu);
      ++acc.second;
    }
    std::vector<std::pair<double, double>> ms;
    for (const auto& [n, acc] : mean) ms.push_back({double(n), acc.first / acc.second});
    out.push_back({"bowen_decay.csv", series_csv("n", "log_nu", ms)});
    for (const auto& [id, pts] : per)
      out.push_back({"bowen_decay_theta" + std::to_string(id) + ".csv", series_csv("n", "log_nu", pts)});
  }

  if (fs::is_regular_file(d / "spectrum.json")) {
    any = true;
    Json j = Json::parse(read_file(d / "spectrum.json"));
    for (int i = 0; i < 3; ++i) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : j.at("convergence_trace"))
        if (p.at(0).is_number() && p.at(i + 1).is_number())
          pts.push_back({p.at(0).get<double>(), p.at(i + 1).get<double>()});
      out.push_back({"spectrum_trace_" + std::to_string(i) + ".csv", series_csv("t", "estimate", pts)});
    }
  }

  if (fs::is_regular_file(d / "bounds.json")) {
    any = true;
    Json j = Json::parse(read_file(d / "bounds.json"));
    std::vector<std::pair<double, double>> pts;
    int k = 0;
    for (const auto& c : j.at("checks")) {
      if (c.at("worst_margin").is_number()) pts.push_back({double(k), c.at("worst_margin").get<double>()});
      ++k;
    }
    out.push_back({"bound_margins.csv", series_csv("check", "worst_margin", pts)});
  }

  if (!any) throw ScenarioError(0, "no spectrum.json, bowen_counts.csv or bounds.json in '" + dir + "'");
  return out;
}

}  // namespace anosov
