#pragma once

#include <iosfwd>
#include <vector>

#include "anosov/integrator.hpp"
#include "anosov/modular.hpp"
#include "anosov/state.hpp"

namespace anosov {

struct IntegratorOptions {
  double step = 1e-3;
  // Replace the chart point by an isometric copy near y = 1 between steps.
  // Modular orbits are always folded back into the fundamental domain.
  bool recenter = false;
  double y_cap = 1e3;
};

struct JacobiState {
  double J = 0.0;
  double Jp = 0.0;
  double t = 0.0;
};

struct FlowSample {
  UnitTangentState state;
  double t = 0.0;
  // d phi^t in the Sasaki-orthonormal frames (G, H_perp, V_perp) at source
  // and target; G is invariant and the lower 2x2 block holds the Jacobi data.
  Mat3 cocycle = Mat3::Identity();
  bool cusp_excursion = false;
};

// Geodesic plus two perpendicular Jacobi solutions integrated together.
class Orbit {
 public:
  Orbit(const SurfaceModel& m, const UnitTangentState& s, IntegratorOptions opts = {});

  void advance(double t);
  UnitTangentState state() const;
  // Columns are two Jacobi solutions (j, j').
  Mat2 jacobi() const;
  void set_jacobi(const Mat2& J);
  double time() const { return t_; }
  bool cusp_excursion() const { return cusp_; }
  const SurfaceModel& model() const { return *m_; }

 private:
  void normalize();

  const SurfaceModel* m_;
  IntegratorOptions opts_;
  OrbitVec s_;
  double t_ = 0.0;
  bool cusp_ = false;
};

// Thin QR with non-negative diagonal: A = Q R.
void qr_positive(const Mat2& A, Mat2& Q, Mat2& R);

// Long Jacobi cocycle products kept in the factored form
// Q diag(exp(log_r)) U with U unit upper triangular, so that determinants
// and growth rates stay accurate far beyond the range of doubles.
struct FactoredJacobi {
  Mat2 Q = Mat2::Identity();
  Vec2 log_r = Vec2::Zero();
  double u12 = 0.0;
  int renorm_count = 0;

  double log_abs_det() const { return log_r.sum(); }
  double det_sign() const { return Q.determinant() < 0 ? -1.0 : 1.0; }
};

// Advances the orbit by t, renormalizing every renorm_dt. The orbit's Jacobi
// matrix must equal f.Q on entry; it equals the new f.Q on exit. Returns the
// per-interval log growth of the two QR columns, one entry per interval.
std::vector<Vec2> advance_factored(Orbit& o, FactoredJacobi& f, double t, double renorm_dt);

FlowSample flow(const SurfaceModel& m, const UnitTangentState& s, double t,
                const IntegratorOptions& opts = {});

JacobiState jacobi_propagate(const SurfaceModel& m, const UnitTangentState& s,
                             const JacobiState& init, double t, const IntegratorOptions& opts = {});

Mat3 flow_derivative(const SurfaceModel& m, const UnitTangentState& s, double t,
                     const IntegratorOptions& opts = {});

// Geodesic only, without Jacobi data: closed forms on Flat, H^2(c) and the
// modular surface (reduced into the fundamental domain), classical RK4 on
// (x, y, phi) with the given step otherwise. No recentering.
UnitTangentState flow_fast(const SurfaceModel& m, const UnitTangentState& s, double t,
                           double step = 0.02);

// Maps a state by an isometry of the chart that brings it near (0, 1), when
// the model has one (translations and dilations of the half-plane models).
UnitTangentState recenter_state(const SurfaceModel& m, const UnitTangentState& s);

// Largest t <= t_max with |d(exp_x)_{s v} w| <= bound for every |s| <= t,
// for unit v = s.dir and unit w. Uses d(exp_x)_{tv} w = <w, v> v_t +
// (J(t) / t) n_t with J the Jacobi field across the geodesic, J(0) = 0,
// J'(0) = <w, n>, checked every `step` and interpolated at the crossing.
double exp_bound_radius(const SurfaceModel& m, const UnitTangentState& s, const Vec2& w, double bound = 2.5,
                        double t_max = 4.0, double step = 1e-3);

struct ExpRadiusEstimate {
  double t0 = 0.0;      // minimum of exp_bound_radius over the samples
  bool capped = false;  // no sample crossed the bound before t_max
  int samples = 0;
};

ExpRadiusEstimate estimate_exp_radius(const SurfaceModel& m,
                                      const std::vector<std::pair<UnitTangentState, Vec2>>& samples,
                                      double bound = 2.5, double t_max = 4.0);

// Trajectory CSV: t,x,y,vx,vy,d11..d33 (cocycle row-major).
void write_trajectory_header(std::ostream& os);
void write_trajectory_row(std::ostream& os, const FlowSample& s);
std::vector<FlowSample> sample_trajectory(const SurfaceModel& m, const UnitTangentState& s,
                                          double t_total, double dt,
                                          const IntegratorOptions& opts = {});

}  // namespace anosov
