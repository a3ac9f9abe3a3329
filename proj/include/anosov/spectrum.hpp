#pragma once

#include <string>
#include <vector>

#include "anosov/flow.hpp"

namespace anosov {

struct SpectrumOptions {
  // Flow time discarded before averaging starts, so that the orthonormal
  // frame aligns with the Oseledec directions first.
  double warmup = 10.0;
  // Ergodic-time multiplier: exponents are reported for phi^tau.
  double tau = 1.0;
  // Number of checkpoints kept in the convergence trace.
  int trace_points = 200;
  IntegratorOptions integ{1e-3, true, 1e3};
};

struct TracePoint {
  double t = 0.0;
  Vec3 estimate = Vec3::Zero();  // descending
};

struct LyapunovSpectrum {
  std::string model;
  // All three exponents, descending.
  Vec3 raw = Vec3::Zero();
  // Distinct exponents after clustering, descending, with multiplicities.
  std::vector<double> exponents;
  std::vector<int> multiplicities;
  double T = 0.0;
  double renorm_dt = 1.0;
  int renorm_count = 0;
  UnitTangentState theta0;
  std::vector<TracePoint> convergence_trace;
  // Largest half-spread of a running estimate over the second half of the run.
  double trace_halfwidth = 0.0;
  bool converged(double threshold = 1e-2) const { return trace_halfwidth <= threshold; }
};

// Benettin QR iteration of the frame cocycle d phi^t on T SM.
LyapunovSpectrum lyapunov_spectrum(const SurfaceModel& m, const UnitTangentState& theta0, double T,
                                   double renorm_dt = 1.0, const SpectrumOptions& opts = {});

// Clusters `raw` at resolution 10 x halfwidth and fills exponents/multiplicities.
void cluster_spectrum(LyapunovSpectrum& s);

// Sum of positive exponents with multiplicity; an exponent counts as positive
// above 3 x trace_halfwidth. Throws NumericalError when not converged.
double chi_plus(const LyapunovSpectrum& s, double threshold = 1e-2);

// Time average of log |d phi^1|E^u| over n unit steps from theta.
double mean_unstable_growth(const SurfaceModel& m, const UnitTangentState& theta, int n);

struct RegularityProbe {
  Vec3 xi = Vec3::UnitY();  // frame coordinates
  double exponent = 0.0;    // X(theta, xi)
};

struct RegularityWitness {
  UnitTangentState theta;
  int k = 0;
  double epsilon = 0.0;
  std::vector<bool> pass;  // one entry per probe
};

// e^{k(X - eps)} |xi| <= |d phi^k xi| <= e^{k(X + eps)} |xi| for k = 1..k_max.
// A relative slack of 1e-8 absorbs integration error in the equality case.
std::vector<RegularityWitness> regularity_check(const SurfaceModel& m, const UnitTangentState& theta,
                                                int k_max, double epsilon,
                                                const std::vector<RegularityProbe>& probes,
                                                const IntegratorOptions& io = {});

double pass_fraction(const std::vector<RegularityWitness>& w);

// Smallest k such that probe `i` passes for every k' >= k in the list, or -1.
int regularity_crossover(const std::vector<RegularityWitness>& w, size_t i);

}  // namespace anosov
