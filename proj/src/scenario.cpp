#include "anosov/scenario.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace anosov {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
  return true;
}

// Typed access to one section, with the set of keys it accepts.
class Reader {
 public:
  Reader(const ConfigFile& f, const std::string& name, std::set<std::string> allowed)
      : name_(name), allowed_(std::move(allowed)) {
    auto it = f.sections.find(name);
    if (it != f.sections.end()) sec_ = &it->second;
    last_line_ = f.last_line;
    if (sec_)
      for (const auto& [k, e] : sec_->entries)
        if (!allowed_.count(k)) throw ScenarioError(e.line, "unknown key '" + k + "' in [" + name + "]");
  }

  bool present() const { return sec_ != nullptr; }
  int line() const { return sec_ ? sec_->line : last_line_; }
  bool has(const std::string& k) const { return sec_ && sec_->entries.count(k); }

  const ConfigEntry& entry(const std::string& k) const {
    if (!has(k)) throw ScenarioError(line(), "missing key '" + k + "' in [" + name_ + "]");
    return sec_->entries.at(k);
  }

  std::string str(const std::string& k) const { return entry(k).value; }

  double real(const std::string& k) const {
    const auto& e = entry(k);
    auto v = parse_double(e.value);
    if (!v) throw ScenarioError(e.line, "'" + k + "' expects a number, got '" + e.value + "'");
    return *v;
  }

  double positive(const std::string& k) const {
    double v = real(k);
    if (!(v > 0)) throw ScenarioError(entry(k).line, "'" + k + "' must be positive");
    return v;
  }

  long long integer(const std::string& k) const {
    const auto& e = entry(k);
    auto v = parse_int(e.value);
    if (!v) throw ScenarioError(e.line, "'" + k + "' expects an integer, got '" + e.value + "'");
    return *v;
  }

  long long count(const std::string& k, long long min = 1) const {
    long long v = integer(k);
    if (v < min) throw ScenarioError(entry(k).line, "'" + k + "' must be >= " + std::to_string(min));
    if (v > 2000000000LL) throw ScenarioError(entry(k).line, "'" + k + "' is too large");
    return v;
  }

  bool boolean(const std::string& k) const {
    const auto& e = entry(k);
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    throw ScenarioError(e.line, "'" + k + "' expects true or false");
  }

  std::vector<double> reals(const std::string& k, size_t min_n = 1, size_t max_n = 1000) const {
    const auto& e = entry(k);
    std::vector<double> out;
    for (const auto& w : split_ws(e.value)) {
      auto v = parse_double(w);
      if (!v) throw ScenarioError(e.line, "'" + k + "' expects numbers, got '" + w + "'");
      out.push_back(*v);
    }
    if (out.size() < min_n || out.size() > max_n) {
      std::string want = min_n == max_n ? std::to_string(min_n) : std::to_string(min_n) + ".." + std::to_string(max_n);
      throw ScenarioError(e.line, "'" + k + "' expects " + want + " numbers");
    }
    return out;
  }

  ThetaSpec theta(const std::string& k) const {
    auto v = reals(k, 3, 3);
    return {v[0], v[1], v[2]};
  }

  // Sets `out` when the key is present.
  template <class T, class F>
  void opt(const std::string& k, T& out, F get) const {
    if (has(k)) out = get(k);
  }

  void fail(const std::string& k, const std::string& msg) const { throw ScenarioError(entry(k).line, msg); }

 private:
  std::string name_;
  std::set<std::string> allowed_;
  const ConfigSection* sec_ = nullptr;
  int last_line_ = 0;
};

void check_theta(const Reader& r, const std::string& k, const ThetaSpec& t, const SurfaceModel& m) {
  if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(t.angle) || !m.valid(Vec2(t.x, t.y)))
    r.fail(k, "'" + k + "' is outside the chart of " + m.name());
}

}  // namespace

ScenarioError::ScenarioError(int line, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line), msg_(msg) {}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  double v = 0;
  auto r = std::from_chars(b, e, v, std::chars_format::general);
  if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  long long v = 0;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) return std::nullopt;
  return v;
}

ConfigFile parse_config(const std::string& text) {
  ConfigFile f;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  ConfigSection* cur = nullptr;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ScenarioError(line, "unterminated section header");
      std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_name(name)) throw ScenarioError(line, "bad section name '" + name + "'");
      if (f.sections.count(name)) throw ScenarioError(line, "duplicate section [" + name + "]");
      cur = &f.sections[name];
      cur->line = line;
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ScenarioError(line, "expected 'key = value'");
    if (!cur) throw ScenarioError(line, "key outside of any section");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (!valid_name(key)) throw ScenarioError(line, "bad key '" + key + "'");
    if (value.empty()) throw ScenarioError(line, "empty value for '" + key + "'");
    if (cur->entries.count(key)) throw ScenarioError(line, "duplicate key '" + key + "'");
    cur->entries[key] = {value, line};
  }
  f.last_line = line;
  return f;
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Spectrum: return "spectrum";
    case Experiment::Bounds: return "bounds";
    case Experiment::Inclusion: return "inclusion";
    case Experiment::Entropy: return "entropy";
    case Experiment::FullVerdict: return "full-verdict";
  }
  return "?";
}

SurfaceModel ModelSpec::build() const {
  switch (kind) {
    case ModelKind::Flat: return SurfaceModel::flat();
    case ModelKind::HyperbolicConstant: return SurfaceModel::hyperbolic(c);
    case ModelKind::ModularSurface: return SurfaceModel::modular();
    case ModelKind::PerturbedHyperbolic: return SurfaceModel::perturbed(c, eps, modes, period);
  }
  return SurfaceModel::flat();
}

bool Scenario::runs_spectrum() const {
  return experiment == Experiment::Spectrum || experiment == Experiment::Entropy ||
         experiment == Experiment::FullVerdict;
}
bool Scenario::runs_bounds() const {
  return experiment == Experiment::Bounds || (experiment == Experiment::FullVerdict && bounds.has_value());
}
bool Scenario::runs_inclusion() const {
  return experiment == Experiment::Inclusion || (experiment == Experiment::FullVerdict && inclusion.has_value());
}
bool Scenario::runs_entropy() const {
  return experiment == Experiment::Entropy || experiment == Experiment::FullVerdict;
}

Scenario parse_scenario(const std::string& text) {
  ConfigFile f = parse_config(text);
  static const std::set<std::string> known = {"model", "experiment", "spectrum", "bounds",
                                              "inclusion", "entropy", "trajectory"};
  for (const auto& [name, sec] : f.sections)
    if (!known.count(name)) throw ScenarioError(sec.line, "unknown section [" + name + "]");

  Scenario sc;

  Reader model(f, "model", {"kind", "c", "eps", "period", "modes"});
  if (!model.present()) throw ScenarioError(0, "missing section [model] (key 'kind')");
  std::string kind = model.str("kind");
  if (kind == "flat") {
    sc.model.kind = ModelKind::Flat;
  } else if (kind == "hyperbolic") {
    sc.model.kind = ModelKind::HyperbolicConstant;
    sc.model.c = model.positive("c");
  } else if (kind == "modular") {
    sc.model.kind = ModelKind::ModularSurface;
  } else if (kind == "perturbed") {
    sc.model.kind = ModelKind::PerturbedHyperbolic;
    sc.model.c = model.positive("c");
    sc.model.eps = model.real("eps");
    if (sc.model.eps < 0) model.fail("eps", "'eps' must be >= 0");
    model.opt("period", sc.model.period, [&](auto& k) { return model.positive(k); });
    if (model.has("modes")) {
      const auto& e = model.entry("modes");
      sc.model.modes.clear();
      for (const auto& w : split_ws(e.value)) {
        auto c1 = w.find(':');
        auto c2 = c1 == std::string::npos ? c1 : w.find(':', c1 + 1);
        if (c2 == std::string::npos) throw ScenarioError(e.line, "mode '" + w + "' is not n:amplitude:phase");
        auto n = parse_int(w.substr(0, c1));
        auto a = parse_double(w.substr(c1 + 1, c2 - c1 - 1));
        auto p = parse_double(w.substr(c2 + 1));
        if (!n || !a || !p || *n < 1) throw ScenarioError(e.line, "mode '" + w + "' is not n:amplitude:phase");
        sc.model.modes.push_back({static_cast<int>(*n), *a, *p});
      }
      if (sc.model.modes.empty()) throw ScenarioError(e.line, "'modes' is empty");
    }
  } else {
    model.fail("kind", "unknown model kind '" + kind + "' (flat, hyperbolic, modular, perturbed)");
  }
  if (sc.model.kind != ModelKind::PerturbedHyperbolic)
    for (const char* k : {"eps", "period", "modes"})
      if (model.has(k)) model.fail(k, std::string("'") + k + "' only applies to kind = perturbed");
  if ((sc.model.kind == ModelKind::Flat || sc.model.kind == ModelKind::ModularSurface) && model.has("c"))
    model.fail("c", "'c' does not apply to kind = " + kind);
  SurfaceModel m = [&] {
    try {
      return sc.model.build();
    } catch (const std::exception& ex) {
      throw ScenarioError(model.line(), std::string("invalid model: ") + ex.what());
    }
  }();

  Reader exp(f, "experiment", {"type", "seed", "output_dir"});
  if (!exp.present()) throw ScenarioError(0, "missing section [experiment] (key 'type')");
  std::string type = exp.str("type");
  if (type == "spectrum") sc.experiment = Experiment::Spectrum;
  else if (type == "bounds") sc.experiment = Experiment::Bounds;
  else if (type == "inclusion") sc.experiment = Experiment::Inclusion;
  else if (type == "entropy") sc.experiment = Experiment::Entropy;
  else if (type == "full-verdict") sc.experiment = Experiment::FullVerdict;
  else exp.fail("type", "unknown experiment '" + type + "' (spectrum, bounds, inclusion, entropy, full-verdict)");
  if (exp.has("seed")) sc.seed = static_cast<std::uint64_t>(exp.count("seed", 0));
  exp.opt("output_dir", sc.output_dir, [&](auto& k) { return exp.str(k); });

  Reader spec(f, "spectrum", {"T", "renorm_dt", "warmup", "tau", "step", "theta"});
  if (sc.runs_spectrum()) {
    sc.spectrum.T = spec.positive("T");
    spec.opt("renorm_dt", sc.spectrum.renorm_dt, [&](auto& k) { return spec.positive(k); });
    spec.opt("tau", sc.spectrum.tau, [&](auto& k) { return spec.positive(k); });
    spec.opt("step", sc.spectrum.step, [&](auto& k) { return spec.positive(k); });
    if (spec.has("warmup")) {
      sc.spectrum.warmup = spec.real("warmup");
      if (sc.spectrum.warmup < 0) spec.fail("warmup", "'warmup' must be >= 0");
    }
    spec.opt("theta", sc.spectrum.theta, [&](auto& k) { return spec.theta(k); });
    if (spec.has("theta")) check_theta(spec, "theta", sc.spectrum.theta, m);
    if (sc.spectrum.T < 50 * sc.spectrum.renorm_dt) spec.fail("T", "'T' must be at least 50 x renorm_dt");
  }

  Reader bnd(f, "bounds", {"states", "fit_states", "fit_T", "census_states", "safety", "neighbour_eps", "iterate"});
  if (sc.experiment == Experiment::Bounds || (sc.experiment == Experiment::FullVerdict && bnd.present())) {
    BoundsBudget b;
    b.states = static_cast<int>(bnd.count("states"));
    bnd.opt("fit_states", b.fit_states, [&](auto& k) { return static_cast<int>(bnd.count(k)); });
    bnd.opt("fit_T", b.fit_T, [&](auto& k) { return bnd.positive(k); });
    bnd.opt("census_states", b.census_states, [&](auto& k) { return static_cast<int>(bnd.count(k)); });
    bnd.opt("safety", b.safety, [&](auto& k) { return bnd.positive(k); });
    bnd.opt("neighbour_eps", b.neighbour_eps, [&](auto& k) { return bnd.positive(k); });
    if (bnd.has("iterate")) b.iterate = static_cast<int>(bnd.count("iterate"));
    if (b.safety < 1.0) bnd.fail("safety", "'safety' must be >= 1");
    sc.bounds = b;
  }

  Reader inc(f, "inclusion", {"rho", "boundary", "theta", "iterate", "sweep"});
  if (sc.experiment == Experiment::Inclusion || (sc.experiment == Experiment::FullVerdict && inc.present())) {
    InclusionBudget b;
    b.rho = inc.positive("rho");
    inc.opt("boundary", b.boundary, [&](auto& k) { return static_cast<int>(inc.count(k)); });
    inc.opt("theta", b.theta, [&](auto& k) { return inc.theta(k); });
    if (inc.has("theta")) check_theta(inc, "theta", b.theta, m);
    if (inc.has("iterate")) b.iterate = static_cast<int>(inc.count("iterate", 0));
    if (inc.has("sweep")) {
      b.sweep = inc.reals("sweep");
      for (double r : b.sweep)
        if (!(r > 0)) inc.fail("sweep", "'sweep' radii must be positive");
    }
    sc.inclusion = b;
  }
  if ((sc.runs_bounds() || sc.runs_inclusion()) && !m.hyperbolic_flow()) {
    const Reader& r = sc.runs_bounds() ? bnd : inc;
    throw ScenarioError(r.line(), "bound certificates need a model with a hyperbolic geodesic flow, not " + m.name());
  }

  Reader ent(f, "entropy", {"thetas", "samples_per_depth", "pilot_samples", "n_min", "n_max", "N", "rho_const",
                            "xi_graph", "t0", "eps", "y_core", "core_lo", "core_hi", "L_max", "step", "fit_from",
                            "fit_min_inside", "max_indeterminate", "tolerance", "suprema_states", "partition",
                            "partition_cells", "partition_pairs", "partition_m"});
  if (sc.runs_entropy()) {
    EntropyBudget b;
    b.bowen = default_bowen_config(m);
    auto& c = b.bowen;
    b.thetas = static_cast<int>(ent.count("thetas"));
    ent.opt("samples_per_depth", c.samples_per_depth, [&](auto& k) { return static_cast<int>(ent.count(k, 10)); });
    ent.opt("pilot_samples", c.pilot_samples, [&](auto& k) { return static_cast<int>(ent.count(k, 10)); });
    ent.opt("n_min", c.n_min, [&](auto& k) { return static_cast<int>(ent.count(k, 0)); });
    ent.opt("n_max", c.n_max, [&](auto& k) { return static_cast<int>(ent.count(k, 0)); });
    ent.opt("N", c.N, [&](auto& k) { return ent.positive(k); });
    ent.opt("rho_const", c.rho_const, [&](auto& k) { return ent.positive(k); });
    ent.opt("xi_graph", c.xi_graph, [&](auto& k) { return ent.positive(k); });
    ent.opt("t0", c.t0, [&](auto& k) { return ent.positive(k); });
    ent.opt("eps", c.eps_prop, [&](auto& k) { return ent.positive(k); });
    ent.opt("L_max", c.L_max, [&](auto& k) { return static_cast<int>(ent.count(k)); });
    ent.opt("step", c.step, [&](auto& k) { return ent.positive(k); });
    ent.opt("fit_from", c.fit_from, [&](auto& k) { return static_cast<int>(ent.count(k, 0)); });
    ent.opt("fit_min_inside", c.fit_min_inside, [&](auto& k) { return static_cast<int>(ent.count(k, 0)); });
    ent.opt("max_indeterminate", c.max_indeterminate, [&](auto& k) { return ent.positive(k); });
    if (ent.has("y_core")) {
      if (m.kind() != ModelKind::ModularSurface) ent.fail("y_core", "'y_core' only applies to kind = modular");
      c.core.y_core = ent.positive("y_core");
      if (c.core.y_core <= 1.0) ent.fail("y_core", "'y_core' must exceed 1");
    }
    for (const char* k : {"core_lo", "core_hi"}) {
      if (!ent.has(k)) continue;
      if (m.kind() == ModelKind::ModularSurface) ent.fail(k, std::string("'") + k + "' does not apply to kind = modular");
      auto v = ent.reals(k, 2, 2);
      (std::string(k) == "core_lo" ? c.core.lo : c.core.hi) = Vec2(v[0], v[1]);
    }
    if (c.core.kind == CoreSpec::Kind::Box) {
      const std::string k = ent.has("core_lo") ? "core_lo" : "core_hi";
      bool bad = !(c.core.hi.x() > c.core.lo.x() && c.core.hi.y() > c.core.lo.y()) || !m.valid(c.core.lo);
      if (bad) {
        if (ent.has(k)) ent.fail(k, "core box must satisfy lo < hi inside the chart");
        throw ScenarioError(ent.line(), "core box must satisfy lo < hi inside the chart");
      }
    }
    ent.opt("tolerance", b.tolerance, [&](auto& k) { return ent.positive(k); });
    ent.opt("suprema_states", b.suprema_states, [&](auto& k) { return static_cast<int>(ent.count(k)); });
    ent.opt("partition", b.partition, [&](auto& k) { return ent.boolean(k); });
    ent.opt("partition_cells", b.partition_cells, [&](auto& k) { return static_cast<int>(ent.count(k)); });
    ent.opt("partition_pairs", b.partition_pairs, [&](auto& k) { return static_cast<long>(ent.count(k)); });
    if (ent.has("partition_m")) {
      b.partition_m = ent.real("partition_m");
      if (b.partition_m < 0) ent.fail("partition_m", "'partition_m' must be >= 0");
    }
    if (c.n_max < c.n_min) throw ScenarioError(ent.has("n_max") ? ent.entry("n_max").line : ent.line(),
                                               "'n_max' must be >= n_min");
    try {
      c.validate();
    } catch (const std::invalid_argument& ex) {
      throw ScenarioError(ent.line(), std::string("[entropy] ") + ex.what());
    }
    sc.entropy = b;
  }

  Reader tr(f, "trajectory", {"T", "dt", "theta"});
  if (tr.present()) {
    TrajectoryBudget b;
    b.T = tr.positive("T");
    b.dt = tr.positive("dt");
    tr.opt("theta", b.theta, [&](auto& k) { return tr.theta(k); });
    if (tr.has("theta")) check_theta(tr, "theta", b.theta, m);
    if (b.T / b.dt > 1e6) tr.fail("dt", "trajectory would exceed 10^6 rows");
    sc.trajectory = b;
  }

  // Sections that the experiment would silently ignore are flagged.
  auto unused = [&](const Reader& r, const std::string& name, bool used) {
    if (r.present() && !used)
      throw ScenarioError(r.line(), "section [" + name + "] is not used by experiment '" + type + "'");
  };
  unused(spec, "spectrum", sc.runs_spectrum());
  unused(bnd, "bounds", sc.runs_bounds());
  unused(inc, "inclusion", sc.runs_inclusion());
  unused(ent, "entropy", sc.runs_entropy());
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(0, "cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace anosov
