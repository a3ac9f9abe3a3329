#pragma once

#include <array>

#include "anosov/geometry.hpp"

namespace anosov {

// Phase-space state of the combined geodesic + Jacobi system:
// (x, y, phi, j1, j1', j2, j2'), where the unit velocity is
// exp(-psi) (cos phi, sin phi) and (j, j') solve j'' + K j = 0 along the orbit.
using OrbitVec = std::array<double, 7>;

OrbitVec orbit_rhs(const SurfaceModel& m, const OrbitVec& s);

// One step of the two-stage Gauss-Legendre collocation method (order 4,
// symmetric, exact on quadratic invariants such as the Wronskian).
// Throws NumericalError when the stage equations fail to converge or the
// state leaves the chart.
void gauss_legendre_step(const SurfaceModel& m, OrbitVec& s, double h);

// Integrates for time t with steps of at most h (the last one shortened).
void integrate_orbit(const SurfaceModel& m, OrbitVec& s, double t, double h);

}  // namespace anosov
