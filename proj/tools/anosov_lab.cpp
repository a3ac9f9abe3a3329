// anosov_lab run <scenario> [--seed N] [--threads N] [--output DIR]
// anosov_lab emit-plots <report-dir> [--output DIR] [--n-min N] [--n-max N]
//
// Exit codes: 0 success, 2 schema or usage error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "anosov/pipeline.hpp"

namespace fs = std::filesystem;
using namespace anosov;

namespace {

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed, int threads,
            const std::string& output, bool quiet) {
  Scenario sc;
  try {
    sc = load_scenario(file);
  } catch (const ScenarioError& e) {
    if (e.line() > 0) std::cerr << file << ":" << e.line() << ": " << e.message() << "\n";
    else std::cerr << file << ": " << e.message() << "\n";
    return 2;
  }
  if (seed) sc.seed = *seed;
  if (!output.empty()) sc.output_dir = output;

  RunOptions ro;
  ro.threads = threads;
  if (!quiet) ro.log = [](const std::string& s) { std::cerr << "[anosov_lab] " << s << "\n"; };
  RunResult r = run_scenario(sc, ro);
  try {
    write_run(sc.output_dir, r);
  } catch (const std::exception& e) {
    std::cerr << "cannot write outputs: " << e.what() << "\n";
    return 3;
  }
  if (r.exit != ExitCode::Ok) {
    std::cerr << "stage '" << r.stage << "' failed: " << r.message << "\n";
    return static_cast<int>(r.exit);
  }
  if (!quiet) std::cerr << "[anosov_lab] wrote " << sc.output_dir << "\n";
  return 0;
}

int cmd_plots(const std::string& dir, const std::string& output, std::optional<int> n_min,
              std::optional<int> n_max) {
  std::vector<Artifact> plots;
  try {
    if (!fs::is_directory(dir)) throw ScenarioError(0, "report directory '" + dir + "' does not exist");
    plots = emit_plots(dir, {n_min, n_max});
  } catch (const ScenarioError& e) {
    std::cerr << e.message() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unreadable report: " << e.what() << "\n";
    return 2;
  }
  fs::path out = output.empty() ? fs::path(dir) / "plots" : fs::path(output);
  try {
    fs::create_directories(out);
    for (const auto& a : plots) {
      std::ofstream f(out / a.name, std::ios::binary | std::ios::trunc);
      f << a.content;
      if (!f) throw std::runtime_error("cannot write " + (out / a.name).string());
    }
    // Plots written inside the report directory join its manifest.
    auto rel = fs::relative(fs::weakly_canonical(out), fs::weakly_canonical(dir)).generic_string();
    if (!rel.empty() && rel.rfind("..", 0) != 0) refresh_manifest(dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geodesic flow entropy and Lyapunov laboratory"};
  app.require_subcommand(1);

  std::string scenario, output;
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario, "Scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override [experiment] seed");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 256));
  run->add_option("--output", output, "Override [experiment] output_dir");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::string dir, plot_out;
  int n_min = 0, n_max = 0;
  auto* plots = app.add_subcommand("emit-plots", "Write plot-ready CSV series from a report directory");
  plots->add_option("report_dir", dir, "Directory written by run")->required();
  plots->add_option("--output", plot_out, "Destination (default <report_dir>/plots)");
  auto* nmin_opt = plots->add_option("--n-min", n_min, "First Bowen depth");
  auto* nmax_opt = plots->add_option("--n-max", n_max, "Last Bowen depth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run)
    return cmd_run(scenario, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, threads, output,
                   quiet);
  return cmd_plots(dir, plot_out, *nmin_opt ? std::optional<int>(n_min) : std::nullopt,
                   *nmax_opt ? std::optional<int>(n_max) : std::nullopt);
}
