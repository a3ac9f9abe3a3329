#include "anosov/flow.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace anosov {

namespace {

bool needs_recenter(const SurfaceModel& m, const Vec2& p) {
  if (m.chart() == ChartKind::Plane) return std::abs(p.x()) > 1e6 || std::abs(p.y()) > 1e6;
  return p.y() > 1e2 || p.y() < 1e-2 || std::abs(p.x()) > 1e2 * p.y();
}

// Isometry z -> (z - b) / lambda bringing p near the reference point.
std::pair<Vec2, double> recenter_map(const SurfaceModel& m, const Vec2& p) {
  switch (m.kind()) {
    case ModelKind::Flat: return {p, 1.0};
    case ModelKind::HyperbolicConstant: return {Vec2(p.x(), 0.0), p.y()};
    case ModelKind::PerturbedHyperbolic: {
      double k = std::round(std::log(p.y()) / m.period());
      return {Vec2(p.x(), 0.0), std::exp(k * m.period())};
    }
    case ModelKind::ModularSurface: break;
  }
  return {Vec2::Zero(), 1.0};
}

}  // namespace

Orbit::Orbit(const SurfaceModel& m, const UnitTangentState& s, IntegratorOptions opts)
    : m_(&m), opts_(opts) {
  m.require_valid(s.base);
  s_ = {s.base.x(), s.base.y(), state_angle(s), 1.0, 0.0, 0.0, 1.0};
  normalize();
}

void Orbit::normalize() {
  Vec2 p(s_[0], s_[1]);
  if (m_->kind() == ModelKind::ModularSurface) {
    if (!in_fundamental_domain(p)) {
      Reduction r = reduce_to_fundamental_domain(p);
      s_[2] += mobius_angle_shift(r.gamma, p);
      s_[0] = r.z.x();
      s_[1] = r.z.y();
    }
    if (s_[1] > opts_.y_cap) cusp_ = true;
  } else if (opts_.recenter && needs_recenter(*m_, p)) {
    auto [b, lam] = recenter_map(*m_, p);
    s_[0] = (s_[0] - b.x()) / lam;
    s_[1] = (s_[1] - b.y()) / lam;
  }
  if (std::abs(s_[2]) > 4 * kPi) s_[2] = wrap_angle(s_[2]);
}

void Orbit::advance(double t) {
  if (!std::isfinite(t)) throw InvalidArgument("flow time must be finite");
  double remaining = std::abs(t);
  long n = static_cast<long>(std::ceil(remaining / opts_.step - 1e-9));
  if (n == 0) return;
  double h = (t >= 0 ? 1.0 : -1.0) * remaining / n;
  for (long i = 0; i < n; ++i) {
    gauss_legendre_step(*m_, s_, h);
    normalize();
  }
  t_ += t;
}

UnitTangentState Orbit::state() const {
  return make_state(*m_, Vec2(s_[0], s_[1]), wrap_angle(s_[2]));
}

Mat2 Orbit::jacobi() const {
  Mat2 J;
  J << s_[3], s_[5], s_[4], s_[6];
  return J;
}

void Orbit::set_jacobi(const Mat2& J) {
  s_[3] = J(0, 0);
  s_[4] = J(1, 0);
  s_[5] = J(0, 1);
  s_[6] = J(1, 1);
}

void qr_positive(const Mat2& A, Mat2& Q, Mat2& R) {
  Eigen::HouseholderQR<Mat2> qr(A);
  Q = qr.householderQ();
  R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 2; ++i) {
    if (R(i, i) < 0) {
      R.row(i) *= -1.0;
      Q.col(i) *= -1.0;
    }
  }
}

std::vector<Vec2> advance_factored(Orbit& o, FactoredJacobi& f, double t, double renorm_dt) {
  if (!(renorm_dt > 0)) throw InvalidArgument("renormalization interval must be positive");
  std::vector<Vec2> growth;
  double remaining = std::abs(t), sgn = t >= 0 ? 1.0 : -1.0;
  long n = static_cast<long>(std::ceil(remaining / renorm_dt - 1e-9));
  for (long i = 0; i < n; ++i) {
    double dt = std::min(renorm_dt, remaining - i * renorm_dt);
    o.advance(sgn * dt);
    Mat2 A = o.jacobi();
    if (!A.allFinite()) throw NumericalError("Jacobi cocycle overflowed between renormalizations; use a smaller interval");
    Mat2 Q, R;
    qr_positive(A, Q, R);
    if (!(R(0, 0) > 0) || !(R(1, 1) > 0))
      throw NumericalError("Jacobi cocycle became singular between renormalizations");
    Vec2 g(std::log(R(0, 0)), std::log(R(1, 1)));
    // R diag(d) U = diag(r d) U' with U'12 = u12 + (r12 / r11)(d2 / d1).
    f.u12 = f.u12 + (R(0, 1) / R(0, 0)) * std::exp(f.log_r.y() - f.log_r.x());
    f.log_r += g;
    f.Q = Q;
    ++f.renorm_count;
    o.set_jacobi(Q);
    growth.push_back(g);
  }
  return growth;
}

FlowSample flow(const SurfaceModel& m, const UnitTangentState& s, double t,
                const IntegratorOptions& opts) {
  if (!std::isfinite(t)) throw InvalidArgument("flow time must be finite");
  Orbit o(m, s, opts);
  o.advance(t);
  FlowSample out;
  out.state = o.state();
  out.t = t;
  out.cocycle.block<2, 2>(1, 1) = o.jacobi();
  out.cusp_excursion = o.cusp_excursion();
  return out;
}

JacobiState jacobi_propagate(const SurfaceModel& m, const UnitTangentState& s,
                             const JacobiState& init, double t, const IntegratorOptions& opts) {
  if (init.t != 0.0) throw InvalidArgument("jacobi_propagate: initial data must sit at t = 0");
  Orbit o(m, s, opts);
  o.advance(t);
  Vec2 r = o.jacobi() * Vec2(init.J, init.Jp);
  return {r.x(), r.y(), t};
}

Mat3 flow_derivative(const SurfaceModel& m, const UnitTangentState& s, double t,
                     const IntegratorOptions& opts) {
  return flow(m, s, t, opts).cocycle;
}

UnitTangentState flow_fast(const SurfaceModel& m, const UnitTangentState& s, double t, double step) {
  if (!std::isfinite(t)) throw InvalidArgument("flow time must be finite");
  switch (m.kind()) {
    case ModelKind::Flat: return {s.base + t * s.dir, s.dir};
    case ModelKind::ModularSurface: return modular_to_unit(modular_flow(modular_from_unit(s), t));
    case ModelKind::HyperbolicConstant: {
      // Flow from (0, 1) and map back by the translation and dilation that
      // took s.base there; keeps the SL(2) matrices well conditioned.
      static const SurfaceModel h1 = SurfaceModel::hyperbolic(1.0);
      double x0 = s.base.x(), y0 = s.base.y();
      auto u = modular_to_unit(
          modular_flow(modular_from_unit(make_state(h1, Vec2(0, 1), state_angle(s))), t, false, m.c()));
      return make_state(m, Vec2(x0 + y0 * u.base.x(), y0 * u.base.y()), state_angle(u));
    }
    case ModelKind::PerturbedHyperbolic: break;
  }
  if (!(step > 0)) throw InvalidArgument("step must be positive");
  auto rhs = [&](const Vec3& q) {
    ConformalJet j = m.jet(Vec2(q.x(), q.y()));
    double e = std::exp(-j.psi);
    double xd = e * std::cos(q.z()), yd = e * std::sin(q.z());
    return Vec3(xd, yd, j.py * xd - j.px * yd);
  };
  Vec3 q(s.base.x(), s.base.y(), state_angle(s));
  long n = static_cast<long>(std::ceil(std::abs(t) / step - 1e-9));
  double h = n ? t / n : 0.0;
  for (long i = 0; i < n; ++i) {
    Vec3 k1 = rhs(q);
    Vec3 k2 = rhs(q + 0.5 * h * k1);
    Vec3 k3 = rhs(q + 0.5 * h * k2);
    Vec3 k4 = rhs(q + h * k3);
    q += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  if (!q.allFinite()) throw NumericalError("geodesic left the chart");
  return make_state(m, Vec2(q.x(), q.y()), wrap_angle(q.z()));
}

UnitTangentState recenter_state(const SurfaceModel& m, const UnitTangentState& s) {
  if (m.kind() == ModelKind::ModularSurface) return reduce_state(m, s);
  auto [b, lam] = recenter_map(m, s.base);
  Vec2 p = (s.base - b) / lam;
  return make_state(m, p, state_angle(s));
}

void write_trajectory_header(std::ostream& os) {
  os << "t,x,y,vx,vy";
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) os << ",d" << i << j;
  os << "\n";
}

double exp_bound_radius(const SurfaceModel& m, const UnitTangentState& s, const Vec2& w, double bound,
                        double t_max, double step) {
  if (!(bound > 1) || !(t_max > 0) || !(step > 0)) throw InvalidArgument("need bound > 1, t_max > 0, step > 0");
  double wn = g_norm(m, s.base, w), vn = g_norm(m, s.base, s.dir);
  if (!(wn > 0) || std::abs(vn - 1.0) > 1e-9) throw InvalidArgument("need unit v and nonzero w");
  Vec2 wu = w / wn;
  double a = g_inner(m, s.base, wu, s.dir);
  double b = g_inner(m, s.base, wu, rotate90(s.dir));
  double best = t_max;
  for (double sign : {1.0, -1.0}) {
    UnitTangentState d{s.base, sign * s.dir};
    Orbit o(m, d, IntegratorOptions{step, true, 1e3});
    // Along -v the normal n flips with v, so J'(0) = <w, n> changes sign; the
    // norm only sees |J|.
    double t = 0.0, prev = std::sqrt(a * a + b * b);
    while (t < best) {
      double h = std::min(step, best - t);
      o.advance(h);
      t += h;
      double J = b * o.jacobi()(0, 1);
      double val = std::sqrt(a * a + (J / t) * (J / t));
      if (val > bound) {
        best = t - h + h * (bound - prev) / (val - prev);
        break;
      }
      prev = val;
    }
  }
  return best;
}

ExpRadiusEstimate estimate_exp_radius(const SurfaceModel& m,
                                      const std::vector<std::pair<UnitTangentState, Vec2>>& samples,
                                      double bound, double t_max) {
  ExpRadiusEstimate e;
  e.t0 = t_max;
  for (const auto& [s, w] : samples) {
    e.t0 = std::min(e.t0, exp_bound_radius(m, s, w, bound, t_max));
    ++e.samples;
  }
  e.capped = e.t0 >= t_max;
  return e;
}

void write_trajectory_row(std::ostream& os, const FlowSample& s) {
  auto old = os.precision();
  os << std::setprecision(17) << s.t << ',' << s.state.base.x() << ',' << s.state.base.y() << ','
     << s.state.dir.x() << ',' << s.state.dir.y();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) os << ',' << s.cocycle(i, j);
  os << "\n";
  os.precision(old);
}

std::vector<FlowSample> sample_trajectory(const SurfaceModel& m, const UnitTangentState& s,
                                          double t_total, double dt,
                                          const IntegratorOptions& opts) {
  if (!(dt > 0) || !(t_total >= 0)) throw InvalidArgument("trajectory needs dt > 0, T >= 0");
  Orbit o(m, s, opts);
  std::vector<FlowSample> out;
  long n = static_cast<long>(std::floor(t_total / dt + 1e-9));
  for (long i = 0; i <= n; ++i) {
    if (i > 0) o.advance(dt);
    FlowSample fs;
    fs.state = o.state();
    fs.t = i * dt;
    fs.cocycle.block<2, 2>(1, 1) = o.jacobi();
    fs.cusp_excursion = o.cusp_excursion();
    out.push_back(fs);
  }
  return out;
}

}  // namespace anosov
