#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "anosov/flow.hpp"
#include "anosov/sasaki.hpp"
#include "anosov/spectrum.hpp"

namespace anosov {

// Compact core K'. Box: x in [lo.x, hi.x], y in [lo.y, hi.y] (any angle).
// ModularDomain: the fundamental domain truncated at y <= y_core.
struct CoreSpec {
  enum class Kind { Box, ModularDomain };
  Kind kind = Kind::Box;
  Vec2 lo = Vec2(-1.0, 0.5), hi = Vec2(1.0, 2.0);
  double y_core = 5.0;

  bool contains(const UnitTangentState& s) const;
  // Far enough out that a geodesic of a non-compact box model will not come
  // back (the return-time search stops there).
  bool escaped(const UnitTangentState& s) const;
  // Chart bounding box of the core (x range, y range).
  Vec2 box_lo() const;
  Vec2 box_hi() const;
};

CoreSpec default_core(const SurfaceModel& m);

// Liouville measure of the core (density exp(2 psi) dx dy dphi).
double core_liouville_mass(const SurfaceModel& m, const CoreSpec& core);
// Liouville mass of the cusp cut off by the core, as a fraction of the whole
// surface; only defined for the modular surface.
double excluded_cusp_fraction(const CoreSpec& core);
UnitTangentState sample_liouville(const SurfaceModel& m, const CoreSpec& core, std::mt19937_64& rng);

struct BowenConfig {
  double N = 1.0;           // g = phi^N
  double rho_const = 0.05;  // a
  double xi_graph = 0.9;    // xi
  double t0 = 0.5;          // a <= t0 / 2
  CoreSpec core;
  int n_min = 0, n_max = 12;
  // First depth used by the entropy fit; earlier depths still carry the
  // shape of the ball.
  int fit_from = 2;
  // Depths with fewer non-escaped samples are left out of the fit: there the
  // sampling box may no longer contain all of S_n.
  int fit_min_inside = 100;
  int samples_per_depth = 10000;
  int pilot_samples = 2000;
  int L_max = 200;
  double step = 0.02;       // RK4 step where there is no closed form
  double eps_prop = 0.05;   // epsilon of the one-sided local-entropy bound
  double max_indeterminate = 0.10;

  void validate() const;
};

BowenConfig default_bowen_config(const SurfaceModel& m);

struct RhoResult {
  double rho = 0.0;
  int L = 0;
  bool in_core = false;
  bool truncated = false;  // no return within L_max
};

RhoResult return_time_rho(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg);

struct BowenDepth {
  int n = 0;
  long samples = 0, inside = 0, escaped = 0, indeterminate = 0;
  // Measure counting inside + indeterminate (upper estimate) and inside only.
  double nu = 0.0, nu_lower = 0.0;
  double halfwidth = 0.0;
  double box_measure = 0.0;
  Vec3 extents = Vec3::Zero();
  double indeterminate_fraction() const { return samples ? double(indeterminate) / samples : 0.0; }
};

struct BowenProfile {
  std::string model;
  UnitTangentState theta;
  std::uint64_t theta_id = 0;
  RhoResult rho0;
  std::vector<BowenDepth> depths;
  // Steps j at which g^j theta is so far up the modular cusp that the
  // rho-ball meets its own translate by z -> z + 1 (y >= 1 / (2 sinh rho)).
  // There the quotient Bowen set is larger than in the cover and decays more
  // slowly, which biases the finite-n slope low.
  std::vector<int> cusp_wrap_steps;
};

// nu(S_n(g, rho, theta)) for every n in [cfg.n_min, cfg.n_max]. Samples are
// drawn per depth from a box in the frame (G, e_s, e_u) of theta whose
// unstable extent adapts to the depth. Counter-keyed by (seed, theta_id, n).
// Throws NumericalError when the indeterminate band exceeds
// cfg.max_indeterminate of the samples at some depth.
BowenProfile bowen_profile(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                           std::uint64_t seed, std::uint64_t theta_id);

struct BowenMembership {
  enum class Kind { Inside, Escaped, Indeterminate };
  Kind kind = Kind::Inside;
  int escape_depth = -1;  // first j with a certified escape
};

// The predicate used by the estimator: Inside when the distance upper bound
// is <= rho(g^j theta) for every j <= n, Escaped at the first j whose lower
// bound exceeds it (after one refinement of both bounds).
BowenMembership bowen_membership(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                                 const UnitTangentState& omega, int n);

// Single depth. `extents` are the half-widths of the sampling box along
// (G, e_s, e_u); the default box contains the whole rho-ball.
BowenDepth bowen_set_measure(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                             int n, std::uint64_t seed, std::uint64_t theta_id,
                             std::optional<Vec3> extents = std::nullopt);

struct LocalEntropy {
  std::string model;
  UnitTangentState theta;
  std::uint64_t theta_id = 0;
  bool conclusive = false;
  // -log nu(S_n) = a + h n + p log(1 + n), weighted least squares; h is the
  // fitted slope clipped at zero, h_fit the raw value. The log term is kept
  // only when it improves the fit significantly (prefactor); otherwise p = 0.
  double h = 0.0, h_fit = 0.0, halfwidth = 0.0, a = 0.0, p = 0.0;
  bool prefactor = false;
  int n_lo = 0, n_hi = 0;
  // Plain linear slopes on the first and second half of the window.
  double slope_early = 0.0, slope_late = 0.0;
  double indeterminate_fraction = 0.0;
  double rho = 0.0;
  int L = 0;
  // Cusp-wrap steps of the profile that fall inside the fit window.
  int cusp_wrap_steps = 0;
};

LocalEntropy local_entropy(const BowenProfile& prof, const BowenConfig& cfg);

// N (chi+ - eps - eps / N - 4 P sqrt(eps))
double lower_bound_rhs(double chi_plus, double P_logdet, const BowenConfig& cfg);

struct Suprema {
  double P_logdet = 0.0;  // sup log |det d phi^1|_E|, times safety
  double Upsilon = 0.0;   // sup max(|d phi^1|, |d phi^-1|), times safety
  int samples = 0;
};

Suprema estimate_suprema(const SurfaceModel& m, const CoreSpec& core, int n_states, std::uint64_t seed,
                         double safety = 1.1);

struct PartitionSpec {
  int nx = 8, ny = 8, nphi = 8;
  CoreSpec core;
  int min_count = 5;
};

struct PartitionReport {
  double lhs = 0.0;  // H(P | phi^m P)
  double rhs = 0.0;  // sum_D mu(D) log card{X : X meets D}
  double cell_diameter = 0.0;
  long pairs = 0;
  int cells = 0, merged_cells = 0;
  long census_misses = 0;
  bool holds() const { return lhs <= rhs + 1e-12; }
};

// Conditional entropy of the grid partition (plus the complement cell) with
// respect to its image under phi^m, from pairs (theta, phi^m theta) with
// theta drawn from the Liouville measure of the core, and the intersection
// census from lattice points of each cell pushed by phi^m.
PartitionReport partition_entropy_bound(const SurfaceModel& m, const PartitionSpec& spec, double m_time,
                                        long n_pairs, std::uint64_t seed, double step = 0.02);

struct EntropyReport {
  std::string model;
  double chi_plus = 0.0;
  std::vector<LocalEntropy> h_local;
  double h_central = 0.0, h_central_halfwidth = 0.0;
  std::optional<PartitionReport> partition;
  double ruelle_slack = 0.0;
  double pesin_deviation = 0.0;
  double P_logdet = 0.0, Upsilon = 0.0;
  double tolerance = 0.15;
  int ruelle_violations = 0;
  bool ruelle_pass = false;
  bool pesin_applicable = false;
  bool pesin_pass = false;
  double lower_bound_fraction = 0.0;
  bool lower_bound_pass = false;
  double cusp_fraction = 0.0;
  // Estimates whose fit window contains cusp-wrap steps.
  int cusp_wrapped = 0;
};

// h estimates are per step of g = phi^N and are compared with N chi+.
EntropyReport verdict(const SurfaceModel& m, const BowenConfig& cfg, const LyapunovSpectrum& spectrum,
                      const std::vector<LocalEntropy>& h_estimates, const Suprema& sup,
                      double tolerance = 0.15);

}  // namespace anosov
