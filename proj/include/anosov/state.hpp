#pragma once

#include <cmath>

#include "anosov/geometry.hpp"

namespace anosov {

// A point theta = (x, v) of the unit tangent bundle in chart components.
struct UnitTangentState {
  Vec2 base = Vec2::Zero();
  Vec2 dir = Vec2::UnitX();
};

// A tangent vector to SM at `base`, stored as (d pi(xi), K(xi)).
struct SplitVector {
  Vec2 base = Vec2::Zero();
  Vec2 horiz = Vec2::Zero();
  Vec2 vert = Vec2::Zero();
};

// Unit vector at p making chart angle `angle` with the x axis.
inline UnitTangentState make_state(const SurfaceModel& m, const Vec2& p, double angle) {
  double e = std::exp(-m.jet(p).psi);
  return {p, Vec2(e * std::cos(angle), e * std::sin(angle))};
}

inline double state_angle(const UnitTangentState& s) { return std::atan2(s.dir.y(), s.dir.x()); }

// v rotated by +90 degrees; unit and g-orthogonal to v for a conformal metric.
inline Vec2 rotate90(const Vec2& v) { return Vec2(-v.y(), v.x()); }

}  // namespace anosov
