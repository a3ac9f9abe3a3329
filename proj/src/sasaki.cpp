#include "anosov/sasaki.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <sstream>

#include "anosov/modular.hpp"

namespace anosov {

namespace {

using cplx = std::complex<double>;

// Base path used by the distance upper bounds: its length, a lower bound for
// the base distance, and how much the chart angle of a vector changes under
// parallel transport along the path.
struct BasePath {
  double length = 0;
  double lower = 0;
  double shift = 0;
};

double half_plane_d1(const Vec2& p, const Vec2& q) {
  double r = (q - p).norm();
  return 2.0 * std::asinh(r / (2.0 * std::sqrt(p.y() * q.y())));
}

// 16-point Gauss-Legendre nodes on [-1, 1].
constexpr double kGLx[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                            0.9445750230732326, 0.9894009349916499};
constexpr double kGLw[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                            0.0622535239386479, 0.0271524594117541};

BasePath base_path(const SurfaceModel& m, const Vec2& p, const Vec2& q) {
  BasePath bp;
  if (m.chart() == ChartKind::Plane) {
    bp.length = bp.lower = (q - p).norm();
    return bp;
  }
  double d1 = half_plane_d1(p, q);
  double c = m.c();
  if (d1 == 0.0) return bp;
  cplx z1(p.x(), p.y()), z2(q.x(), q.y());
  double th1 = std::arg((z2 - z1) / (z2 - std::conj(z1))) + 0.5 * kPi;
  double th2 = std::arg((z1 - z2) / (z1 - std::conj(z2))) + 1.5 * kPi;
  bp.shift = th2 - th1;
  if (m.kind() != ModelKind::PerturbedHyperbolic || m.eps() == 0.0) {
    bp.length = bp.lower = d1 / c;
    return bp;
  }
  // Unit-speed H^2 geodesic sigma -> g.(i e^sigma), g = A(z1) k(alpha).
  double sy = std::sqrt(p.y());
  double alpha = 0.5 * (th1 - 0.5 * kPi);
  Mat2 A, k;
  A << sy, p.x() / sy, 0, 1 / sy;
  k << std::cos(alpha), std::sin(alpha), -std::sin(alpha), std::cos(alpha);
  Mat2 g = A * k;
  double eps = m.eps();
  int segs = std::max(1, static_cast<int>(std::ceil(d1 / 0.25)));
  double h = d1 / segs;
  double len = 0, extra = 0;
  for (int sgi = 0; sgi < segs; ++sgi) {
    double mid = (sgi + 0.5) * h;
    for (int i = 0; i < 16; ++i) {
      double xi = i < 8 ? -kGLx[7 - i] : kGLx[i - 8];
      double wi = i < 8 ? kGLw[7 - i] : kGLw[i - 8];
      double sig = mid + 0.5 * h * xi;
      cplx w(0.0, std::exp(sig));
      cplx num = g(0, 0) * w + g(0, 1), den = g(1, 0) * w + g(1, 1);
      cplx z = num / den;
      // dz/dsigma = (dz/dw) (dw/dsigma) = w / den^2 for det g = 1.
      cplx dz = w / (den * den);
      auto f = m.profile(std::log(z.imag()));
      len += 0.5 * h * wi * std::exp(eps * f[0]);
      extra += 0.5 * h * wi * eps * f[1] / z.imag() * dz.real();
    }
  }
  bp.length = len / c;
  bp.shift += extra;
  bp.lower = std::exp(eps * m.profile_min()) * d1 / c;
  return bp;
}

double sup_abs_curvature(const SurfaceModel& m) { return -m.curvature_bounds().first; }

double fiber_gap(const UnitTangentState& a, const UnitTangentState& b, double shift) {
  return std::abs(wrap_angle(state_angle(b) - state_angle(a) - shift));
}

DistanceBounds bounds_direct(const SurfaceModel& m, const UnitTangentState& a,
                             const UnitTangentState& b, bool refined) {
  BasePath bp = base_path(m, a.base, b.base);
  double alpha = fiber_gap(a, b, bp.shift);
  if (!refined) return {bp.lower, bp.length + alpha};
  DistanceBounds r;
  r.upper = std::hypot(bp.length, alpha);
  double kmax = sup_abs_curvature(m);
  auto F = [&](double l) {
    double hol = kmax * (l + bp.length) * (l + bp.length) / (4.0 * kPi);
    return std::hypot(bp.lower, std::max(0.0, alpha - hol));
  };
  double lo = bp.lower, hi = std::hypot(bp.lower, alpha);
  if (hi - F(hi) <= 0) {
    r.lower = hi;
  } else {
    for (int i = 0; i < 80 && hi - lo > 1e-15 * (1 + hi); ++i) {
      double mid = 0.5 * (lo + hi);
      if (mid - F(mid) < 0)
        lo = mid;
      else
        hi = mid;
    }
    r.lower = lo;
  }
  r.lower = std::min(r.lower, r.upper);
  return r;
}

DistanceBounds bounds_any(const SurfaceModel& m, const UnitTangentState& a,
                          const UnitTangentState& b, bool refined) {
  if (m.kind() != ModelKind::ModularSurface) return bounds_direct(m, a, b, refined);
  double k0 = std::round(a.base.x() - b.base.x());
  Mat2 shift;
  shift << 1, k0, 0, 1;
  DistanceBounds best{1e300, 1e300};
  for (const Mat2& w : modular_neighbor_words()) {
    Mat2 g = w * shift;
    UnitTangentState bb = mobius_apply_state(m, g, b);
    // Cheap screen: the base distance alone already exceeds the best upper.
    double d1 = half_plane_d1(a.base, bb.base);
    if (d1 > best.upper && d1 > best.lower) continue;
    DistanceBounds r = bounds_direct(m, a, bb, refined);
    best.lower = std::min(best.lower, r.lower);
    best.upper = std::min(best.upper, r.upper);
  }
  return best;
}

}  // namespace

void require_unit(const SurfaceModel& m, const UnitTangentState& s) {
  double n = g_inner(m, s.base, s.dir, s.dir);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    std::ostringstream os;
    os << "state is not on the unit bundle: g(v,v) = " << n;
    throw DomainError(os.str());
  }
}

Vec2 connection_form(const SurfaceModel& m, const Vec2& p) {
  ConformalJet j = m.jet(p);
  return Vec2(-j.py, j.px);
}

Mat3 sasaki_metric_coords(const SurfaceModel& m, const Vec2& p) {
  ConformalJet j = m.jet(p);
  double e2 = std::exp(2 * j.psi);
  Vec3 w(-j.py, j.px, 1.0);
  Mat3 G = w * w.transpose();
  G(0, 0) += e2;
  G(1, 1) += e2;
  return G;
}

SplitVector split_vector(const SurfaceModel& m, const UnitTangentState& s, const Vec3& d) {
  Vec2 h(d.x(), d.y());
  double c = d.z() + connection_form(m, s.base).dot(h);
  return {s.base, h, c * rotate90(s.dir)};
}

Vec3 assemble(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi) {
  double tang = g_inner(m, s.base, xi.vert, s.dir);
  double scale = 1.0 + g_norm(m, s.base, xi.vert);
  if (std::abs(tang) > 1e-9 * scale)
    throw InvalidArgument("vertical part must be orthogonal to the base direction on SM");
  double c = g_inner(m, s.base, xi.vert, rotate90(s.dir));
  return Vec3(xi.horiz.x(), xi.horiz.y(), c - connection_form(m, s.base).dot(xi.horiz));
}

Vec3 frame_coords(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi) {
  Vec2 n = rotate90(s.dir);
  return Vec3(g_inner(m, s.base, xi.horiz, s.dir), g_inner(m, s.base, xi.horiz, n),
              g_inner(m, s.base, xi.vert, n));
}

SplitVector from_frame(const UnitTangentState& s, const Vec3& abc) {
  Vec2 n = rotate90(s.dir);
  return {s.base, abc.x() * s.dir + abc.y() * n, abc.z() * n};
}

double sasaki_inner(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi,
                    const SplitVector& eta) {
  double tol = 1e-12 * (1.0 + s.base.norm());
  if ((xi.base - s.base).norm() > tol || (eta.base - s.base).norm() > tol)
    throw DomainError("sasaki_inner: vectors are attached to a different base point");
  return g_inner(m, s.base, xi.horiz, eta.horiz) + g_inner(m, s.base, xi.vert, eta.vert);
}

double sasaki_norm(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& xi) {
  return std::sqrt(sasaki_inner(m, s, xi, xi));
}

double sasaki_sectional(const SurfaceModel& m, const UnitTangentState& s, const SplitVector& b1,
                        const SplitVector& b2, double tol) {
  const Vec2& x = s.base;
  auto ip = [&](const Vec2& a, const Vec2& b) { return g_inner(m, x, a, b); };
  const Vec2 &v1 = b1.horiz, &w1 = b1.vert, &v2 = b2.horiz, &w2 = b2.vert;
  double n1 = ip(v1, v1) + ip(w1, w1), n2 = ip(v2, v2) + ip(w2, w2);
  if (std::abs(n1 - 1) > tol || std::abs(n2 - 1) > tol) {
    std::ostringstream os;
    os << "basis violates |v_i|^2 + |w_i|^2 = 1 (got " << n1 << ", " << n2 << ")";
    throw InvalidArgument(os.str());
  }
  if (std::abs(ip(v1, v2)) > tol) throw InvalidArgument("basis violates <v1, v2> = 0");
  if (std::abs(ip(w1, w2)) > tol) throw InvalidArgument("basis violates <w1, w2> = 0");
  const Vec2& v = s.dir;
  auto R = [&](const Vec2& a, const Vec2& b, const Vec2& c) { return riemann_apply(m, x, a, b, c); };
  auto DR = [&](const Vec2& d, const Vec2& a, const Vec2& b, const Vec2& c) {
    return riemann_derivative_apply(m, x, d, a, b, c);
  };
  double k = ip(R(v1, v2, v1), v2);
  k += 3.0 * ip(R(v1, v2, w1), w2);
  k += ip(w1, w1) * ip(w2, w2);
  Vec2 r12v = R(v1, v2, v);
  k -= 0.75 * ip(r12v, r12v);
  Vec2 a = R(v, w2, v1), b = R(v, w1, v2);
  k += 0.25 * ip(a, a) + 0.25 * ip(b, b);
  k += 0.5 * ip(R(v, w1, w2), R(v, w2, v1));
  k -= ip(R(v, w1, v1), R(v, w2, v2));
  // With the sign convention above, the two nabla R terms pair the last two
  // slots as (v1, v2) and (v2, v1); the opposite pairing disagrees with the
  // curvature of the lifted metric wherever dK != 0.
  k += ip(DR(v1, v, w2, v1), v2);
  k += ip(DR(v2, v, w1, v2), v1);
  return k;
}

namespace {

// Second derivative of a geodesic of the lifted metric: -Gamma(u', u').
Vec3 lifted_geodesic_acc(const SurfaceModel& m, const Vec3& q, const Vec3& dq) {
  ConformalJet j = m.jet(Vec2(q.x(), q.y()));
  double e2 = std::exp(2 * j.psi);
  Vec3 w(-j.py, j.px, 1.0);
  Mat3 G = w * w.transpose();
  G(0, 0) += e2;
  G(1, 1) += e2;
  std::array<Mat3, 3> dG;
  const double pk[2] = {j.px, j.py};
  const Vec3 dw[2] = {Vec3(-j.pxy, j.pxx, 0.0), Vec3(-j.pyy, j.pxy, 0.0)};
  for (int k = 0; k < 2; ++k) {
    dG[k] = dw[k] * w.transpose() + w * dw[k].transpose();
    dG[k](0, 0) += 2 * pk[k] * e2;
    dG[k](1, 1) += 2 * pk[k] * e2;
  }
  dG[2].setZero();
  // Gamma_{m,ij} u^i u^j = (dG_i)_{mj} u^i u^j - 0.5 (dG_m)_{ij} u^i u^j
  Vec3 low;
  for (int mm = 0; mm < 3; ++mm) {
    double a = 0;
    for (int i = 0; i < 3; ++i) a += dq[i] * dG[i].row(mm).dot(dq);
    low[mm] = a - 0.5 * dq.dot(dG[mm] * dq);
  }
  return -G.ldlt().solve(low);
}

Vec3 sm_gap(const SmPoint& a, const SmPoint& b) {
  Vec3 d = a.coords - b.coords;
  d.z() = wrap_angle(d.z());
  return d;
}

}  // namespace

SmPoint sm_exp(const SurfaceModel& m, const UnitTangentState& s, const Vec3& xi, int steps) {
  if (steps < 1) throw InvalidArgument("sm_exp needs at least one step");
  Vec3 q(s.base.x(), s.base.y(), state_angle(s));
  Vec3 dq = assemble(m, s, from_frame(s, xi));
  double h = 1.0 / steps;
  auto check = [&](const Vec3& p) {
    if (!m.valid(Vec2(p.x(), p.y())) || !p.allFinite())
      throw NumericalError("Sasaki geodesic left the chart");
  };
  for (int i = 0; i < steps; ++i) {
    Vec3 k1q = dq, k1v = lifted_geodesic_acc(m, q, dq);
    Vec3 q2 = q + 0.5 * h * k1q, v2 = dq + 0.5 * h * k1v;
    check(q2);
    Vec3 k2q = v2, k2v = lifted_geodesic_acc(m, q2, v2);
    Vec3 q3 = q + 0.5 * h * k2q, v3 = dq + 0.5 * h * k2v;
    check(q3);
    Vec3 k3q = v3, k3v = lifted_geodesic_acc(m, q3, v3);
    Vec3 q4 = q + h * k3q, v4 = dq + h * k3v;
    check(q4);
    Vec3 k4q = v4, k4v = lifted_geodesic_acc(m, q4, v4);
    q += h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
    dq += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    check(q);
  }
  return {q};
}

UnitTangentState sm_state(const SurfaceModel& m, const SmPoint& p) {
  return make_state(m, Vec2(p.coords.x(), p.coords.y()), wrap_angle(p.coords.z()));
}

std::optional<Vec3> sm_log(const SurfaceModel& m, const UnitTangentState& s, const SmPoint& target,
                           const Vec3& guess, double tol, int max_iter) {
  Vec3 z = guess;
  auto resid = [&](const Vec3& v) { return sm_gap(sm_exp(m, s, v), target); };
  try {
    Vec3 r = resid(z);
    double scale = std::max(1.0, target.coords.y());
    for (int it = 0; it < max_iter; ++it) {
      if (r.norm() <= tol * scale) return z;
      Mat3 Jm;
      double h = 1e-6 * std::max(1.0, z.norm());
      for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        Jm.col(k) = (resid(z + e) - resid(z - e)) / (2 * h);
      }
      Vec3 step = Jm.fullPivLu().solve(-r);
      if (!step.allFinite()) return std::nullopt;
      double damp = 1.0;
      bool moved = false;
      for (int k = 0; k < 30; ++k, damp *= 0.5) {
        Vec3 zn = z + damp * step;
        Vec3 rn = resid(zn);
        if (rn.norm() < r.norm()) {
          z = zn;
          r = rn;
          moved = true;
          break;
        }
      }
      if (!moved) return r.norm() <= 1e3 * tol * scale ? std::optional<Vec3>(z) : std::nullopt;
    }
    if (r.norm() <= tol * scale) return z;
  } catch (const NumericalError&) {
  }
  return std::nullopt;
}

double base_distance_lower(const SurfaceModel& m, const Vec2& p, const Vec2& q) {
  if (m.kind() != ModelKind::ModularSurface) return base_path(m, p, q).lower;
  Mat2 shift;
  shift << 1, std::round(p.x() - q.x()), 0, 1;
  double best = 1e300;
  for (const Mat2& w : modular_neighbor_words())
    best = std::min(best, half_plane_d1(p, mobius_apply(w * shift, q)));
  return best;
}

DistanceBounds sm_distance_bounds(const SurfaceModel& m, const UnitTangentState& a,
                                  const UnitTangentState& b) {
  return bounds_any(m, a, b, false);
}

DistanceBounds sm_distance_bounds_refined(const SurfaceModel& m, const UnitTangentState& a,
                                          const UnitTangentState& b) {
  return bounds_any(m, a, b, true);
}

}  // namespace anosov
