#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anosov/flow.hpp"
#include "anosov/sasaki.hpp"

namespace anosov {

// Thrown when power iteration does not settle on a stable/unstable direction
// (expected for flows without hyperbolicity).
class SplittingFailure : public NumericalError {
 public:
  SplittingFailure(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SplittingOptions {
  double horizon = 12.0;
  double threshold = 1e-6;
  IntegratorOptions integ{1e-3, true, 1e3};
};

struct SplittingEstimate {
  UnitTangentState theta;
  SplitVector e_s, e_u;
  SplitVector g_dir;
  // The same directions as unit (J, J') pairs, J >= 0: in frame coordinates
  // e = (0, J, J').
  Vec2 s_jac = Vec2::UnitX(), u_jac = Vec2::UnitX();
  double horizon = 0.0;
  double residual = 0.0;

  // Sasaki cosine <e_s, e_u>.
  double cosine() const { return s_jac.dot(u_jac); }
};

SplittingEstimate estimate_splitting(const SurfaceModel& m, const UnitTangentState& theta,
                                     const SplittingOptions& opts = {});

// |P_theta| for the projection onto E^s along E^u + <G>, from the frames.
double projection_norm(const SplittingEstimate& e);

struct AnosovFit {
  double C = 1.0, lambda = 0.5;
  // Forward stable contraction and backward unstable contraction separately.
  double C_fwd = 1.0, lambda_fwd = 0.5;
  double C_rev = 1.0, lambda_rev = 0.5;
  // RMS deviation of the fitted line from the maxima.
  double rms = 0.0;
  int samples = 0;
  double horizon = 0.0;
  // lambda >= exp(-c) for the model's curvature scale.
  bool lambda_floor_ok = true;
  double lambda_floor = 0.0;
};

// Envelope fit of log |d phi^t|E^s| and log |d phi^-t|E^u| over t in [0, T]
// for the given states; both are measured by integrating in the direction in
// which the bundle expands.
AnosovFit fit_anosov_constants(const SurfaceModel& m, const std::vector<UnitTangentState>& thetas,
                               double T, double dt = 0.25, const SplittingOptions& opts = {});

struct AnosovCertificate {
  double c = 1.0, C = 1.0, lambda = 0.5;
  double C_rev = 1.0, lambda_rev = 0.5;
  double Q = 0.0, delta_proj = 1.0;
  double L = 2.0;
  double P1 = 0.0, P2 = 0.0, P = 0.0;
  double tau1 = 0.0, tau2 = 0.0, kappa = 0.0;
  double K1 = 0.0, K2 = 0.0, beta = 0.0, h_c = 0.0;
  // LC lambda + L sqrt(1 + c^2) P + 1
  double norm1_bound = 0.0;
  int m = 1;
};

// Smallest m >= 1 with C lambda^m < 1/2.
int default_iterate(double C, double lambda);

// C_rev / lambda_rev default to (C, lambda). m = nullopt picks default_iterate.
AnosovCertificate build_certificate(double c, double C, double lambda, double Q, double delta_proj,
                                    std::optional<int> m = std::nullopt,
                                    std::optional<double> C_rev = std::nullopt,
                                    std::optional<double> lambda_rev = std::nullopt);

struct SplittingCensus {
  double f_max = 0.0;
  double delta_max = 1.0;
  int samples = 0;
};
SplittingCensus splitting_census(const std::vector<SplittingEstimate>& est);

// Certificate from a fit and measured splittings: Q and delta_proj are the
// sampled maxima times `safety`; c is the model's curvature scale.
AnosovCertificate calibrate_certificate(const SurfaceModel& m, const AnosovFit& fit,
                                        const SplittingCensus& census, double safety = 1.1,
                                        std::optional<int> iterate = std::nullopt);

struct Witness {
  UnitTangentState theta;
  double lhs = 0.0, rhs = 0.0;
};

struct InequalityCheck {
  std::string name;
  int samples = 0;
  int violations = 0;
  // min over samples of (rhs - lhs) / |rhs|; positive means every sample holds.
  double worst_margin = 1e300;
  Witness witness;

  void record(const UnitTangentState& th, double lhs, double rhs, bool strict = false);
};

struct BoundReport {
  std::vector<InequalityCheck> checks;
  int skipped = 0;
  const InequalityCheck& get(const std::string& name) const;
  bool all_pass() const;
  void merge(const BoundReport& other);
};

// Singular values of a frame cocycle, descending.
Vec3 singular_values(const Mat3& D);

struct BoundCheckOptions {
  SplittingOptions split;
  // Radius for the neighbour comparison.
  double neighbour_eps = 0.1;
  unsigned long long seed = 1;
  // Position of thetas[0] in the full sample; keys the neighbour stream so
  // that a sample split into chunks gives the same draws.
  std::size_t index_offset = 0;
};

// Evaluates each inequality at every sampled state. States whose splitting
// does not converge are skipped and counted.
BoundReport check_bounds(const SurfaceModel& m, const std::vector<UnitTangentState>& thetas,
                         const AnosovCertificate& cert, const BoundCheckOptions& opts = {});

struct InclusionResult {
  bool pass = false;
  double worst_margin = 0.0;
  int samples = 0;
  int skipped = 0;
  double radius = 0.0;
  double skipped_fraction() const { return samples ? double(skipped) / samples : 0.0; }
};

// phi^m(exp_theta(B(0, beta kappa^-1 rho))) inside exp_{phi^m theta}(d phi^m B(0, rho)),
// sampled on the boundary sphere. m = 0 uses the identity flow.
InclusionResult ball_inclusion(const SurfaceModel& m, const UnitTangentState& theta, int iterate,
                                    double rho, const AnosovCertificate& cert, int n_boundary,
                                    unsigned long long seed = 1);

// Largest rho on the grid for which the inclusion passes, or 0.
double inclusion_sweep(const SurfaceModel& m, const UnitTangentState& theta, int iterate,
                       const std::vector<double>& rhos, const AnosovCertificate& cert, int n_boundary,
                       unsigned long long seed = 1);

struct RatioSample {
  double t = 0.0;
  double r = 0.0, lower = 0.0, upper = 0.0;
  bool inside() const;
};

// r(t) = lambda^-t |J_s(t)| / (lambda^t |J_u(t)|) with its exponential
// envelope. J_s is propagated backward from a stable estimate at the end of
// the grid, since forward integration of a contracting field is unstable.
std::vector<RatioSample> ratio_diagnostic(const SurfaceModel& m, const UnitTangentState& theta,
                                          const std::vector<double>& t_grid, double lambda, double c,
                                          const SplittingOptions& opts = {});

}  // namespace anosov
