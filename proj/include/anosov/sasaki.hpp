#pragma once

#include <optional>

#include "anosov/state.hpp"

namespace anosov {

inline constexpr double kUnitTolerance = 1e-9;

// Throws DomainError when g(v, v) differs from 1 by more than kUnitTolerance.
void require_unit(const SurfaceModel& m, const UnitTangentState& s);

// Connection one-form in chart coordinates: the vertical part of a curve
// (x(t), phi(t)) in SM is (phi' + omega(x')) v_perp.
Vec2 connection_form(const SurfaceModel& m, const Vec2& p);

// Sasaki metric of SM in the coordinates (x, y, phi).
Mat3 sasaki_metric_coords(const SurfaceModel& m, const Vec2& p);

// Coordinate tangent vector (dx, dy, dphi) <-> split form.
SplitVector split_vector(const SurfaceModel& m, const UnitTangentState& s, const Vec3& d);
Vec3 assemble(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi);

// Components in the orthonormal frame (G, H_perp, V_perp):
// horiz = a v + b v_perp, vert = c v_perp.
Vec3 frame_coords(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi);
SplitVector from_frame(const UnitTangentState& s, const Vec3& abc);

double sasaki_inner(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi,
                    const SplitVector& eta);
double sasaki_norm(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi);

// Sectional curvature of the Sasaki metric on the plane spanned by
// (v1, w1), (v2, w2), evaluated term by term from R and nabla R of the base.
// The basis must satisfy |v_i|^2 + |w_i|^2 = 1 and <v1, v2> = <w1, w2> = 0.
double sasaki_sectional(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& b1,
                        const SplitVector& b2, double tol = 1e-9);

// Exponential map of SM with the Sasaki metric: the point reached at time 1
// by the lifted-metric geodesic through s with initial velocity xi
// (frame coordinates), integrated by RK4 in the chart (x, y, phi). The
// returned angle is not wrapped, so nearby results stay comparable.
struct SmPoint {
  Vec3 coords = Vec3::Zero();
};
SmPoint sm_exp(const SurfaceModel& m, const UnitTangentState& s, const Vec3& xi, int steps = 32);
inline SmPoint sm_point(const UnitTangentState& s) {
  return {Vec3(s.base.x(), s.base.y(), state_angle(s))};
}
UnitTangentState sm_state(const SurfaceModel& m, const SmPoint& p);

// Local inverse of sm_exp at s by damped Newton from the initial guess.
// Returns nullopt when the iteration does not converge.
std::optional<Vec3> sm_log(const SurfaceModel& m, const UnitTangentState& s, const SmPoint& target,
                           const Vec3& guess, double tol = 1e-12, int max_iter = 40);

struct DistanceBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Base distance d(pi(theta), pi(omega)), or a certified lower bound for it
// when there is no closed form (perturbed metric).
double base_distance_lower(const SurfaceModel& m, const Vec2& p, const Vec2& q);

// lower: base distance. upper: horizontal lift of a base path followed by a
// rotation in the fiber.
DistanceBounds sm_distance_bounds(const SurfaceModel& m, const UnitTangentState& a,
                                  const UnitTangentState& b);

// Tighter bounds: the upper bound moves along the base path and rotates the
// fiber simultaneously; the lower bound adds the least fiber rotation any
// path must make, given holonomy is at most sup|K| times the enclosed area.
DistanceBounds sm_distance_bounds_refined(const SurfaceModel& m, const UnitTangentState& a,
                                          const UnitTangentState& b);

}  // namespace anosov
