#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "anosov/entropy.hpp"
#include "anosov/geometry.hpp"

namespace anosov {

// Schema violation in a scenario file; line 0 means the file as a whole.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, const std::string& msg);
  int line() const { return line_; }
  const std::string& message() const { return msg_; }

 private:
  int line_;
  std::string msg_;
};

// Raw sectioned key-value file:
//   # comment
//   [section]
//   key = value
struct ConfigEntry {
  std::string value;
  int line = 0;
};

struct ConfigSection {
  int line = 0;
  std::map<std::string, ConfigEntry> entries;
};

struct ConfigFile {
  std::map<std::string, ConfigSection> sections;
  int last_line = 0;
};

ConfigFile parse_config(const std::string& text);

// Decimal parsing through from_chars, independent of the locale. The whole
// token must be consumed.
std::optional<double> parse_double(const std::string& s);
std::optional<long long> parse_int(const std::string& s);

enum class Experiment { Spectrum, Bounds, Inclusion, Entropy, FullVerdict };
std::string experiment_name(Experiment e);

struct ModelSpec {
  ModelKind kind = ModelKind::Flat;
  double c = 1.0;
  double eps = 0.0;
  double period = 2.0;
  std::vector<BumpMode> modes = SurfaceModel::default_modes();

  SurfaceModel build() const;
};

struct ThetaSpec {
  double x = 0.1, y = 1.3, angle = 0.4;
};

struct SpectrumBudget {
  double T = 1000.0;
  double renorm_dt = 1.0;
  double warmup = 10.0;
  double tau = 1.0;
  double step = 1e-3;
  ThetaSpec theta;
};

struct BoundsBudget {
  int states = 1000;
  int fit_states = 8;
  double fit_T = 8.0;
  int census_states = 200;
  double safety = 1.1;
  double neighbour_eps = 0.1;
  std::optional<int> iterate;
};

struct InclusionBudget {
  double rho = 0.1;
  int boundary = 1000;
  ThetaSpec theta{0.0, 1.0, 0.3};
  std::optional<int> iterate;
  std::vector<double> sweep;
};

struct EntropyBudget {
  int thetas = 20;
  BowenConfig bowen;
  double tolerance = 0.15;
  int suprema_states = 10000;
  bool partition = true;
  int partition_cells = 8;
  long partition_pairs = 20000;
  double partition_m = 1.0;
};

struct TrajectoryBudget {
  double T = 10.0;
  double dt = 0.1;
  ThetaSpec theta;
};

struct Scenario {
  ModelSpec model;
  Experiment experiment = Experiment::Spectrum;
  std::uint64_t seed = 1;
  std::string output_dir = "output";
  SpectrumBudget spectrum;
  std::optional<BoundsBudget> bounds;
  std::optional<InclusionBudget> inclusion;
  std::optional<EntropyBudget> entropy;
  std::optional<TrajectoryBudget> trajectory;

  bool runs_spectrum() const;
  bool runs_bounds() const;
  bool runs_inclusion() const;
  bool runs_entropy() const;
};

// Parses and validates; every failure is a ScenarioError naming the line and
// the offending or missing key.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

}  // namespace anosov
