#pragma once

#include <vector>

#include "anosov/state.hpp"

namespace anosov {

// Point of the unit tangent bundle of the modular surface as an element of
// PSL(2, R): the base point is g.i and the direction is the image of the
// upward unit vector at i.
struct ModularState {
  Mat2 matrix = Mat2::Identity();
  bool reduced = false;
};

struct Reduction {
  Vec2 z;
  Mat2 gamma = Mat2::Identity();  // element of SL(2, Z) with gamma.z_in = z
  int iterations = 0;
};

Vec2 mobius_apply(const Mat2& g, const Vec2& z);
// Change of chart angle of a tangent vector at z under z -> g.z.
double mobius_angle_shift(const Mat2& g, const Vec2& z);

bool in_fundamental_domain(const Vec2& z, double tol = 0.0);

// Standard reduction into {|Re z| <= 1/2, |z| >= 1}. Ties: Re z = 1/2 goes to
// -1/2; points on the unit circle with Re z > 0 are inverted.
// Throws NumericalError after `cap` iterations.
Reduction reduce_to_fundamental_domain(const Vec2& z, int cap = 1000);

// Applies g to a unit tangent state of the half-plane metric with scale c.
UnitTangentState mobius_apply_state(const SurfaceModel& m, const Mat2& g,
                                    const UnitTangentState& s);
UnitTangentState reduce_state(const SurfaceModel& m, const UnitTangentState& s);

// Words of length <= 4 in S, T, T^{-1}, deduplicated up to sign.
const std::vector<Mat2>& modular_neighbor_words();

ModularState modular_from_unit(const UnitTangentState& s);
// Base point and unit direction for the c = 1 half-plane metric.
UnitTangentState modular_to_unit(const ModularState& s);
Vec2 modular_base(const ModularState& s);

// Right multiplication by diag(exp(r t / 2), exp(-r t / 2)), then reduction
// (when `reduce`). Rate r = c realizes the flow of the metric of curvature -c^2.
ModularState modular_flow(const ModularState& s, double t, bool reduce = true, double rate = 1.0);

// Equality in PSL(2, R) up to tolerance.
bool same_projective(const Mat2& a, const Mat2& b, double tol);

}  // namespace anosov
