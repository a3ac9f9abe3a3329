#include "anosov/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace anosov {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kA11 = 0.25, kA12 = 0.25 - kSqrt3 / 6.0;
constexpr double kA21 = 0.25 + kSqrt3 / 6.0, kA22 = 0.25;
constexpr int kMaxIter = 50;

// Per-component magnitudes used by the stage convergence test: positions
// relative to the local chart scale, Jacobi pairs relative to their size.
OrbitVec component_scales(const OrbitVec& s) {
  double pos = std::max(std::abs(s[0]), std::abs(s[1]));
  if (pos == 0.0) pos = 1.0;
  double j1 = std::max({std::abs(s[3]), std::abs(s[4]), 1e-300});
  double j2 = std::max({std::abs(s[5]), std::abs(s[6]), 1e-300});
  return {pos, pos, 1.0, j1, j1, j2, j2};
}

double scaled_diff(const OrbitVec& a, const OrbitVec& b, const OrbitVec& sc) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]) / sc[i]);
  return d;
}

}  // namespace

OrbitVec orbit_rhs(const SurfaceModel& m, const OrbitVec& s) {
  ConformalJet j = m.jet(Vec2(s[0], s[1]));
  double e = std::exp(-j.psi);
  double xd = e * std::cos(s[2]);
  double yd = e * std::sin(s[2]);
  double K = -e * e * (j.pxx + j.pyy);
  return {xd, yd, j.py * xd - j.px * yd, s[4], -K * s[3], s[6], -K * s[5]};
}

void gauss_legendre_step(const SurfaceModel& m, OrbitVec& s, double h) {
  OrbitVec k1 = orbit_rhs(m, s), k2 = k1;
  OrbitVec y1, y2;
  OrbitVec sc = component_scales(s);
  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    for (size_t i = 0; i < s.size(); ++i) {
      y1[i] = s[i] + h * (kA11 * k1[i] + kA12 * k2[i]);
      y2[i] = s[i] + h * (kA21 * k1[i] + kA22 * k2[i]);
    }
    if (!m.valid(Vec2(y1[0], y1[1])) || !m.valid(Vec2(y2[0], y2[1]))) {
      std::ostringstream os;
      os << "integrator stage left the chart near (" << s[0] << ", " << s[1] << ") with h=" << h;
      throw NumericalError(os.str());
    }
    OrbitVec n1 = orbit_rhs(m, y1), n2 = orbit_rhs(m, y2);
    double d = std::max(scaled_diff(n1, k1, sc), scaled_diff(n2, k2, sc));
    k1 = n1;
    k2 = n2;
    if (d * std::abs(h) <= 1e-15) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "Gauss-Legendre stage iteration did not converge at (" << s[0] << ", " << s[1]
       << ") with h=" << h;
    throw NumericalError(os.str());
  }
  for (size_t i = 0; i < s.size(); ++i) s[i] += 0.5 * h * (k1[i] + k2[i]);
}

void integrate_orbit(const SurfaceModel& m, OrbitVec& s, double t, double h) {
  if (!(h > 0)) throw InvalidArgument("integrator step must be positive");
  if (!std::isfinite(t)) throw InvalidArgument("integration time must be finite");
  double sgn = t >= 0 ? 1.0 : -1.0;
  double remaining = std::abs(t);
  long n = static_cast<long>(std::ceil(remaining / h - 1e-9));
  if (n == 0) return;
  double step = remaining / n;
  for (long i = 0; i < n; ++i) gauss_legendre_step(m, s, sgn * step);
}

}  // namespace anosov
