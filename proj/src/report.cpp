#include "anosov/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace anosov {

namespace {

Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

Json vec(const Vec3& v) { return Json::array({num(v[0]), num(v[1]), num(v[2])}); }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json to_json(const UnitTangentState& s) {
  Json j;
  j["x"] = num(s.base.x());
  j["y"] = num(s.base.y());
  j["angle"] = num(state_angle(s));
  return j;
}

Json to_json(const SurfaceModel& m) {
  Json j;
  j["name"] = m.name();
  switch (m.kind()) {
    case ModelKind::Flat: j["kind"] = "flat"; break;
    case ModelKind::HyperbolicConstant: j["kind"] = "hyperbolic"; break;
    case ModelKind::ModularSurface: j["kind"] = "modular"; break;
    case ModelKind::PerturbedHyperbolic: j["kind"] = "perturbed"; break;
  }
  j["c"] = m.c();
  if (m.kind() == ModelKind::PerturbedHyperbolic) {
    j["eps"] = m.eps();
    j["period"] = m.period();
    Json modes = Json::array();
    for (const auto& md : m.modes()) modes.push_back({{"n", md.n}, {"amplitude", md.amplitude}, {"phase", md.phase}});
    j["modes"] = modes;
  }
  auto [lo, hi] = m.curvature_bounds();
  j["curvature_bounds"] = Json::array({lo, hi});
  j["finite_volume"] = m.finite_volume();
  return j;
}

Json to_json(const LyapunovSpectrum& s) {
  Json j;
  j["model"] = s.model;
  j["theta0"] = to_json(s.theta0);
  j["T"] = s.T;
  Json ex = Json::array();
  for (double e : s.exponents) ex.push_back(num(e));
  j["exponents"] = ex;
  j["multiplicities"] = s.multiplicities;
  try {
    j["chi_plus"] = num(chi_plus(s));
  } catch (const NumericalError&) {
    j["chi_plus"] = nullptr;
  }
  j["trace_halfwidth"] = num(s.trace_halfwidth);
  j["raw"] = vec(s.raw);
  j["renorm_dt"] = s.renorm_dt;
  j["renorm_count"] = s.renorm_count;
  j["converged"] = s.converged();
  Json tr = Json::array();
  for (const auto& p : s.convergence_trace)
    tr.push_back(Json::array({num(p.t), num(p.estimate[0]), num(p.estimate[1]), num(p.estimate[2])}));
  j["convergence_trace"] = tr;
  return j;
}

Json to_json(const InequalityCheck& c) {
  Json j;
  j["name"] = c.name;
  j["samples"] = c.samples;
  j["violations"] = c.violations;
  j["worst_margin"] = c.samples ? num(c.worst_margin) : Json(nullptr);
  Json w;
  w["theta"] = to_json(c.witness.theta);
  w["lhs"] = num(c.witness.lhs);
  w["rhs"] = num(c.witness.rhs);
  j["witness"] = c.samples ? w : Json(nullptr);
  return j;
}

Json to_json(const BoundReport& r) {
  Json a = Json::array();
  for (const auto& c : r.checks) a.push_back(to_json(c));
  return a;
}

Json to_json(const AnosovFit& f) {
  Json j;
  j["C"] = num(f.C);
  j["lambda"] = num(f.lambda);
  j["C_fwd"] = num(f.C_fwd);
  j["lambda_fwd"] = num(f.lambda_fwd);
  j["C_rev"] = num(f.C_rev);
  j["lambda_rev"] = num(f.lambda_rev);
  j["rms"] = num(f.rms);
  j["samples"] = f.samples;
  j["horizon"] = f.horizon;
  j["lambda_floor"] = num(f.lambda_floor);
  j["lambda_floor_ok"] = f.lambda_floor_ok;
  return j;
}

Json to_json(const AnosovCertificate& c) {
  Json j;
  j["c"] = num(c.c);
  j["C"] = num(c.C);
  j["lambda"] = num(c.lambda);
  j["C_rev"] = num(c.C_rev);
  j["lambda_rev"] = num(c.lambda_rev);
  j["Q"] = num(c.Q);
  j["delta_proj"] = num(c.delta_proj);
  j["L"] = num(c.L);
  j["P1"] = num(c.P1);
  j["P2"] = num(c.P2);
  j["P"] = num(c.P);
  j["tau1"] = num(c.tau1);
  j["tau2"] = num(c.tau2);
  j["kappa"] = num(c.kappa);
  j["K1"] = num(c.K1);
  j["K2"] = num(c.K2);
  j["beta"] = num(c.beta);
  j["h_c"] = num(c.h_c);
  j["norm1_bound"] = num(c.norm1_bound);
  j["m"] = c.m;
  return j;
}

Json to_json(const SplittingCensus& c) {
  Json j;
  j["f_max"] = num(c.f_max);
  j["delta_max"] = num(c.delta_max);
  j["samples"] = c.samples;
  return j;
}

Json to_json(const InclusionResult& r) {
  Json j;
  j["pass"] = r.pass;
  j["worst_margin"] = num(r.worst_margin);
  j["samples"] = r.samples;
  j["skipped"] = r.skipped;
  j["skipped_fraction"] = r.skipped_fraction();
  j["radius"] = num(r.radius);
  return j;
}

Json to_json(const RhoResult& r) {
  Json j;
  j["rho"] = num(r.rho);
  j["L"] = r.L;
  j["in_core"] = r.in_core;
  j["truncated"] = r.truncated;
  return j;
}

Json to_json(const BowenConfig& c) {
  Json j;
  j["N"] = c.N;
  j["rho_const"] = c.rho_const;
  j["xi_graph"] = c.xi_graph;
  j["t0"] = c.t0;
  Json core;
  if (c.core.kind == CoreSpec::Kind::ModularDomain) {
    core["kind"] = "modular_domain";
    core["y_core"] = c.core.y_core;
  } else {
    core["kind"] = "box";
    core["lo"] = Json::array({c.core.lo.x(), c.core.lo.y()});
    core["hi"] = Json::array({c.core.hi.x(), c.core.hi.y()});
  }
  j["core"] = core;
  j["n_min"] = c.n_min;
  j["n_max"] = c.n_max;
  j["fit_from"] = c.fit_from;
  j["fit_min_inside"] = c.fit_min_inside;
  j["samples_per_depth"] = c.samples_per_depth;
  j["pilot_samples"] = c.pilot_samples;
  j["L_max"] = c.L_max;
  j["step"] = c.step;
  j["eps_prop"] = c.eps_prop;
  j["max_indeterminate"] = c.max_indeterminate;
  return j;
}

Json to_json(const LocalEntropy& h) {
  Json j;
  j["theta_id"] = h.theta_id;
  j["theta"] = to_json(h.theta);
  j["conclusive"] = h.conclusive;
  if (h.conclusive) {
    j["h"] = num(h.h);
    j["halfwidth"] = num(h.halfwidth);
    j["h_fit"] = num(h.h_fit);
    j["a"] = num(h.a);
    j["p"] = num(h.p);
    j["prefactor"] = h.prefactor;
    j["window"] = Json::array({h.n_lo, h.n_hi});
    j["slope_early"] = num(h.slope_early);
    j["slope_late"] = num(h.slope_late);
  } else {
    j["h"] = nullptr;
    j["halfwidth"] = nullptr;
  }
  j["indeterminate_fraction"] = num(h.indeterminate_fraction);
  j["rho"] = num(h.rho);
  j["L"] = h.L;
  j["cusp_wrap_steps"] = h.cusp_wrap_steps;
  return j;
}

Json to_json(const Suprema& s) {
  Json j;
  j["P_logdet"] = num(s.P_logdet);
  j["Upsilon"] = num(s.Upsilon);
  j["samples"] = s.samples;
  return j;
}

Json to_json(const PartitionReport& p) {
  Json j;
  j["lhs"] = num(p.lhs);
  j["rhs"] = num(p.rhs);
  j["holds"] = p.holds();
  j["cell_diameter"] = num(p.cell_diameter);
  j["pairs"] = p.pairs;
  j["cells"] = p.cells;
  j["merged_cells"] = p.merged_cells;
  j["census_misses"] = p.census_misses;
  return j;
}

Json to_json(const EntropyReport& r) {
  Json j;
  j["model"] = r.model;
  j["chi_plus"] = num(r.chi_plus);
  j["h_central"] = num(r.h_central);
  j["h_central_halfwidth"] = num(r.h_central_halfwidth);
  j["ruelle_slack"] = num(r.ruelle_slack);
  j["pesin_deviation"] = num(r.pesin_deviation);
  j["tolerance"] = r.tolerance;
  j["ruelle_violations"] = r.ruelle_violations;
  j["ruelle_pass"] = r.ruelle_pass;
  j["pesin_applicable"] = r.pesin_applicable;
  j["pesin_pass"] = r.pesin_pass;
  j["lower_bound_fraction"] = num(r.lower_bound_fraction);
  j["lower_bound_pass"] = r.lower_bound_pass;
  j["P_logdet"] = num(r.P_logdet);
  j["Upsilon"] = num(r.Upsilon);
  j["cusp_fraction"] = num(r.cusp_fraction);
  j["cusp_wrapped"] = r.cusp_wrapped;
  j["h_partition"] = r.partition ? to_json(*r.partition) : Json(nullptr);
  j["indeterminate_bias"] = "indeterminate samples count as inside: nu is an upper estimate and h a lower one";
  Json hl = Json::array();
  for (const auto& h : r.h_local) hl.push_back(to_json(h));
  j["h_local"] = hl;
  return j;
}

std::string bowen_counts_csv(const std::vector<BowenProfile>& profiles) {
  std::ostringstream os;
  os << "theta_id,n,inside,escaped,indeterminate,ball_measure,nu,nu_lower,halfwidth\n";
  for (const auto& p : profiles)
    for (const auto& d : p.depths)
      os << p.theta_id << ',' << d.n << ',' << d.inside << ',' << d.escaped << ',' << d.indeterminate << ','
         << format_double(d.box_measure) << ',' << format_double(d.nu) << ',' << format_double(d.nu_lower)
         << ',' << format_double(d.halfwidth) << '\n';
  return os.str();
}

std::string series_csv(const std::string& x_name, const std::string& y_name,
                       const std::vector<std::pair<double, double>>& points) {
  std::string out = x_name + "," + y_name + "\n";
  for (const auto& [x, y] : points) out += format_double(x) + "," + format_double(y) + "\n";
  return out;
}

}  // namespace anosov
