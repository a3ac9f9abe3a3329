#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anosov/report.hpp"
#include "anosov/scenario.hpp"

namespace anosov {

struct Artifact {
  std::string name;  // path relative to the output directory
  std::string content;
};

struct RunOptions {
  int threads = 1;
  // Progress lines ("stage: ..."); may be empty.
  std::function<void(const std::string&)> log;
};

enum class ExitCode { Ok = 0, Schema = 2, Numerical = 3 };

struct RunResult {
  ExitCode exit = ExitCode::Ok;
  // Failing stage and its diagnostic, when exit != Ok.
  std::string stage, message;
  // In emission order; error.json is last on failure.
  std::vector<Artifact> artifacts;

  const Artifact* find(const std::string& name) const;
};

// Runs every stage the experiment needs. Results depend only on the scenario
// (seed included), never on the thread count. Schema-level problems surfacing
// inside a stage give ExitCode::Schema, numerical failures ExitCode::Numerical;
// both come with error.json.
RunResult run_scenario(const Scenario& sc, const RunOptions& opts = {});

// Independent parallel loop with results in index order; the exception of the
// lowest failing index is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

// Deletes the artifacts listed by an existing manifest, writes the new ones
// and a manifest covering every regular file under `dir`.
void write_run(const std::string& dir, const RunResult& r);

// manifest.json for the current contents of `dir` (manifest.json itself
// excluded), written in place.
void refresh_manifest(const std::string& dir);

// Names of manifest entries whose file is missing or whose hash differs.
// Throws ScenarioError when there is no readable manifest.
std::vector<std::string> verify_manifest(const std::string& dir);

struct PlotOptions {
  std::optional<int> n_min, n_max;  // Bowen depth window
};

// Plot-ready two-column series from the reports in `dir`:
//   bowen_decay.csv            n, mean log nu(S_n) over theta
//   bowen_decay_theta<id>.csv  n, log nu(S_n) for one theta
//   spectrum_trace_<i>.csv     t, running estimate of exponent i (descending)
//   bound_margins.csv          check index (bounds.json order), worst margin
// Throws ScenarioError when the manifest is missing, a listed report is gone
// or changed, or there is no report to plot.
std::vector<Artifact> emit_plots(const std::string& dir, const PlotOptions& opts = {});

}  // namespace anosov
