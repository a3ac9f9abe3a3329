#include "anosov/geometry.hpp"

#include <cmath>
#include <sstream>

#include "anosov/integrator.hpp"

namespace anosov {

namespace {

constexpr int kPinchSamples = 4096;

std::pair<double, double> sample_profile_curvature(const SurfaceModel& m) {
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < kPinchSamples; ++i) {
    double s = m.period() * i / kPinchSamples;
    double K = gaussian_curvature(m, Vec2(0.0, std::exp(s)));
    lo = std::min(lo, K);
    hi = std::max(hi, K);
  }
  return {lo, hi};
}

}  // namespace

SurfaceModel SurfaceModel::flat() { return SurfaceModel(); }

SurfaceModel SurfaceModel::hyperbolic(double c) {
  if (!(c > 0) || !std::isfinite(c)) throw InvalidArgument("hyperbolic model needs c > 0");
  SurfaceModel m;
  m.kind_ = ModelKind::HyperbolicConstant;
  m.chart_ = ChartKind::UpperHalfPlane;
  m.c_ = c;
  m.bounds_ = {-c * c, -c * c};
  return m;
}

SurfaceModel SurfaceModel::modular() {
  SurfaceModel m = hyperbolic(1.0);
  m.kind_ = ModelKind::ModularSurface;
  return m;
}

std::vector<BumpMode> SurfaceModel::default_modes() { return {{1, 0.12, 0.0}, {2, 0.01, 0.5}}; }

SurfaceModel SurfaceModel::perturbed(double c, double eps, std::vector<BumpMode> modes,
                                     double period) {
  if (!(c > 0)) throw InvalidArgument("perturbed model needs c > 0");
  if (!(eps >= 0 && eps < 1)) throw InvalidArgument("perturbation amplitude must lie in [0, 1)");
  if (!(period > 0)) throw InvalidArgument("perturbation period must be positive");
  SurfaceModel m = hyperbolic(c);
  m.kind_ = ModelKind::PerturbedHyperbolic;
  m.eps_ = eps;
  m.modes_ = std::move(modes);
  m.period_ = period;
  m.bounds_ = {-c * c * (1 + eps) * (1 + eps), -c * c * (1 - eps) * (1 - eps)};
  double fmin = 1e300, slope = 0;
  for (int i = 0; i < kPinchSamples; ++i) fmin = std::min(fmin, m.profile(period * i / kPinchSamples)[0]);
  for (const auto& md : m.modes_) slope += std::abs(md.amplitude) * 2 * kPi * md.n / period;
  m.profile_min_ = std::min(0.0, fmin - slope * period / (2.0 * kPinchSamples));
  auto [lo, hi] = sample_profile_curvature(m);
  if (lo < m.bounds_.first || hi > m.bounds_.second) {
    std::ostringstream os;
    os << "perturbation leaves the pinching interval: sampled K in [" << lo << ", " << hi
       << "], declared [" << m.bounds_.first << ", " << m.bounds_.second << "]";
    throw InvalidArgument(os.str());
  }
  return m;
}

double SurfaceModel::curvature_scale() const { return std::sqrt(-bounds_.first); }

std::string SurfaceModel::name() const {
  std::ostringstream os;
  switch (kind_) {
    case ModelKind::Flat: return "flat";
    case ModelKind::ModularSurface: return "modular";
    case ModelKind::HyperbolicConstant: os << "hyperbolic(c=" << c_ << ")"; break;
    case ModelKind::PerturbedHyperbolic: os << "perturbed(c=" << c_ << ",eps=" << eps_ << ")"; break;
  }
  return os.str();
}

bool SurfaceModel::valid(const Vec2& p) const {
  if (!std::isfinite(p.x()) || !std::isfinite(p.y())) return false;
  return chart_ == ChartKind::Plane || p.y() > 0.0;
}

void SurfaceModel::require_valid(const Vec2& p) const {
  if (!valid(p)) {
    std::ostringstream os;
    os << "point (" << p.x() << ", " << p.y() << ") outside the chart of " << name();
    throw DomainError(os.str());
  }
}

std::array<double, 4> SurfaceModel::profile(double s) const {
  std::array<double, 4> f{0, 0, 0, 0};
  for (const auto& md : modes_) {
    double w = 2 * kPi * md.n / period_;
    double arg = w * s + md.phase;
    double co = std::cos(arg), si = std::sin(arg);
    f[0] += md.amplitude * co;
    f[1] -= md.amplitude * w * si;
    f[2] -= md.amplitude * w * w * co;
    f[3] += md.amplitude * w * w * w * si;
  }
  return f;
}

ConformalJet SurfaceModel::jet(const Vec2& p) const {
  require_valid(p);
  ConformalJet j;
  if (chart_ == ChartKind::Plane) return j;
  double y = p.y();
  j.psi = -std::log(c_ * y);
  j.py = -1.0 / y;
  j.pyy = 1.0 / (y * y);
  j.pyyy = -2.0 / (y * y * y);
  if (kind_ == ModelKind::PerturbedHyperbolic && eps_ != 0.0) {
    auto f = profile(std::log(y));
    j.psi += eps_ * f[0];
    j.py += eps_ * f[1] / y;
    j.pyy += eps_ * (f[2] - f[1]) / (y * y);
    j.pyyy += eps_ * (f[3] - 3 * f[2] + 2 * f[1]) / (y * y * y);
  }
  return j;
}

bool SurfaceModel::operator==(const SurfaceModel& o) const {
  if (kind_ != o.kind_ || c_ != o.c_ || eps_ != o.eps_ || period_ != o.period_) return false;
  if (modes_.size() != o.modes_.size()) return false;
  for (size_t i = 0; i < modes_.size(); ++i) {
    const auto &a = modes_[i], &b = o.modes_[i];
    if (a.n != b.n || a.amplitude != b.amplitude || a.phase != b.phase) return false;
  }
  return true;
}

Mat2 metric_at(const SurfaceModel& m, const Vec2& p) {
  double e = std::exp(2 * m.jet(p).psi);
  return e * Mat2::Identity();
}

Christoffel christoffel_at(const SurfaceModel& m, const Vec2& p) {
  ConformalJet j = m.jet(p);
  Christoffel G;
  G[0] << j.px, j.py, j.py, -j.px;
  G[1] << -j.py, j.px, j.px, j.py;
  return G;
}

double gaussian_curvature(const SurfaceModel& m, const Vec2& p) {
  ConformalJet j = m.jet(p);
  return -std::exp(-2 * j.psi) * (j.pxx + j.pyy);
}

Vec2 curvature_gradient(const SurfaceModel& m, const Vec2& p) {
  ConformalJet j = m.jet(p);
  double e = std::exp(-2 * j.psi);
  double lap = j.pxx + j.pyy;
  double dlx = j.pxxx + j.pxyy, dly = j.pxxy + j.pyyy;
  return Vec2(e * (2 * lap * j.px - dlx), e * (2 * lap * j.py - dly));
}

double g_inner(const SurfaceModel& m, const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::exp(2 * m.jet(p).psi) * a.dot(b);
}

double g_norm(const SurfaceModel& m, const Vec2& p, const Vec2& a) {
  return std::sqrt(g_inner(m, p, a, a));
}

double curvature_at(const SurfaceModel& m, const Vec2& p, const Vec2& u, const Vec2& w) {
  double e2 = std::exp(2 * m.jet(p).psi);
  double area2 = e2 * e2 * (u.squaredNorm() * w.squaredNorm() - u.dot(w) * u.dot(w));
  double scale = e2 * e2 * u.squaredNorm() * w.squaredNorm();
  if (!(area2 > 1e-24 * scale) || scale == 0.0)
    throw InvalidArgument("curvature_at: plane vectors are linearly dependent");
  Vec2 r = riemann_apply(m, p, u, w, u);
  return e2 * r.dot(w) / area2;
}

Vec2 riemann_apply(const SurfaceModel& m, const Vec2& p, const Vec2& X, const Vec2& Y,
                   const Vec2& Z) {
  double K = gaussian_curvature(m, p);
  return K * (g_inner(m, p, X, Z) * Y - g_inner(m, p, Y, Z) * X);
}

Vec2 riemann_derivative_apply(const SurfaceModel& m, const Vec2& p, const Vec2& A,
                              const Vec2& X, const Vec2& Y, const Vec2& Z) {
  double dK = curvature_gradient(m, p).dot(A);
  return dK * (g_inner(m, p, X, Z) * Y - g_inner(m, p, Y, Z) * X);
}

double curvature_tensor_norm(const SurfaceModel& m, const Vec2& p) {
  return 2.0 * std::abs(gaussian_curvature(m, p));
}

double curvature_derivative_norm(const SurfaceModel& m, const Vec2& p) {
  Vec2 dK = curvature_gradient(m, p);
  return 2.0 * std::exp(-m.jet(p).psi) * dK.norm();
}

ExpResult exp_map(const SurfaceModel& m, const Vec2& x, const Vec2& v, double t,
                  std::optional<Vec2> w, double step) {
  m.require_valid(x);
  if (!std::isfinite(t)) throw InvalidArgument("exp_map: t must be finite");
  double speed = g_norm(m, x, v);
  if (!(speed > 0)) throw InvalidArgument("exp_map: v must be nonzero");
  double len = std::abs(t) * speed;
  Vec2 dir = (t >= 0 ? 1.0 : -1.0) * v;
  OrbitVec s{x.x(), x.y(), std::atan2(dir.y(), dir.x()), 0.0, 1.0, 1.0, 0.0};
  integrate_orbit(m, s, len, step);
  Vec2 p(s[0], s[1]);
  double e = std::exp(-m.jet(p).psi);
  Vec2 unit(e * std::cos(s[2]), e * std::sin(s[2]));
  ExpResult r{p, (t >= 0 ? 1.0 : -1.0) * speed * unit, std::nullopt};
  if (w) {
    Vec2 u0 = dir / speed;
    Vec2 n0(-u0.y(), u0.x());
    double a = g_inner(m, x, *w, u0);
    double b = g_inner(m, x, *w, n0);
    Vec2 n1(-unit.y(), unit.x());
    // J(0) = 0, J'(0) = 1 in unit-speed time; the variation of exp at tv
    // through w scales it by 1/len.
    double across = len > 0 ? s[3] / len : 1.0;
    r.dexp_w = a * unit + b * across * n1;
  }
  return r;
}

}  // namespace anosov
