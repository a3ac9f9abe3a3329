#include "anosov/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace anosov {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 canonical(Vec2 v) {
  v.normalize();
  if (v.x() < 0 || (v.x() == 0 && v.y() < 0)) v = -v;
  return v;
}

// Pushes two generic (J, J') directions along t units of flow (t may be
// negative), renormalizing once per unit of time.
std::pair<Vec2, Vec2> push_directions(const SurfaceModel& m, const UnitTangentState& start, double t,
                                      const IntegratorOptions& io) {
  Vec2 a(std::cos(0.3), std::sin(0.3)), b(std::cos(1.9), std::sin(1.9));
  Orbit o(m, start, io);
  double remaining = std::abs(t), sgn = t >= 0 ? 1.0 : -1.0;
  while (remaining > 0) {
    double dt = std::min(1.0, remaining);
    o.set_jacobi(Mat2::Identity());
    o.advance(sgn * dt);
    Mat2 M = o.jacobi();
    a = (M * a).normalized();
    b = (M * b).normalized();
    remaining -= dt;
  }
  return {a, b};
}

// log |J(t_k) v| along the orbit for t_k = k dt, k = 0..n (dt may be negative).
std::vector<double> log_growth(const SurfaceModel& m, const UnitTangentState& start, Vec2 v, double dt,
                               int n, const IntegratorOptions& io) {
  std::vector<double> out{std::log(v.norm())};
  double acc = std::log(v.norm());
  v.normalize();
  Orbit o(m, start, io);
  for (int k = 0; k < n; ++k) {
    o.set_jacobi(Mat2::Identity());
    o.advance(dt);
    v = o.jacobi() * v;
    acc += std::log(v.norm());
    v.normalize();
    out.push_back(acc);
  }
  return out;
}

struct LineFit {
  double slope = 0, intercept = 0, envelope = 0, rms = 0;
};

// Least-squares slope of y against t; the envelope intercept lifts the line
// until every point lies on or below it.
LineFit envelope_fit(const std::vector<double>& t, const std::vector<double>& y) {
  double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  LineFit f;
  f.slope = (n * sty - st * sy) / (n * stt - st * st);
  f.intercept = (sy - f.slope * st) / n;
  f.envelope = -1e300;
  double ss = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    f.envelope = std::max(f.envelope, y[i] - f.slope * t[i]);
    double r = y[i] - f.intercept - f.slope * t[i];
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

UnitTangentState nearby_state(const SurfaceModel& m, const UnitTangentState& s, double eps,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  double scale = m.chart() == ChartKind::Plane ? 1.0 : s.base.y();
  for (double r = 0.5 * eps;; r *= 0.5) {
    Vec2 p = s.base + r * scale * Vec2(nd(rng), nd(rng)).normalized() * 0.5;
    UnitTangentState t = make_state(m, p, state_angle(s) + 0.5 * r * nd(rng));
    if (m.valid(p) && sm_distance_bounds(m, s, t).upper < eps) return t;
    if (r < 1e-12) return s;
  }
}

}  // namespace

SplittingEstimate estimate_splitting(const SurfaceModel& m, const UnitTangentState& theta,
                                     const SplittingOptions& opts) {
  if (!(opts.horizon > 0)) throw InvalidArgument("splitting horizon must be positive");
  double T = opts.horizon;
  auto back = flow(m, theta, -T, opts.integ).state;
  auto fwd = flow(m, theta, T, opts.integ).state;
  auto [ua, ub] = push_directions(m, back, T, opts.integ);
  auto [sa, sb] = push_directions(m, fwd, -T, opts.integ);
  SplittingEstimate e;
  e.theta = theta;
  e.horizon = T;
  e.residual = std::max(std::abs(cross(ua, ub)), std::abs(cross(sa, sb)));
  e.u_jac = canonical(ua);
  e.s_jac = canonical(sa);
  if (!(e.residual <= opts.threshold)) {
    std::ostringstream os;
    os << "splitting did not converge within T = " << T << " (residual " << e.residual << ")";
    throw SplittingFailure(os.str(), e.residual);
  }
  double c = m.curvature_scale();
  for (const Vec2& j : {e.s_jac, e.u_jac}) {
    if (std::abs(j.y()) > c * std::abs(j.x()) * (1 + 1e-6) + opts.threshold) {
      std::ostringstream os;
      os << "splitting estimate violates |K(xi)| <= c |d pi(xi)| (" << std::abs(j.y()) << " > "
         << c * std::abs(j.x()) << ")";
      throw NumericalError(os.str());
    }
  }
  e.e_s = from_frame(theta, Vec3(0, e.s_jac.x(), e.s_jac.y()));
  e.e_u = from_frame(theta, Vec3(0, e.u_jac.x(), e.u_jac.y()));
  e.g_dir = from_frame(theta, Vec3(1, 0, 0));
  return e;
}

double projection_norm(const SplittingEstimate& e) {
  Mat3 B;
  B.col(0) = Vec3(0, e.s_jac.x(), e.s_jac.y());
  B.col(1) = Vec3(0, e.u_jac.x(), e.u_jac.y());
  B.col(2) = Vec3(1, 0, 0);
  Mat3 P = B * Vec3(1, 0, 0).asDiagonal() * B.inverse();
  return singular_values(P)[0];
}

AnosovFit fit_anosov_constants(const SurfaceModel& m, const std::vector<UnitTangentState>& thetas,
                               double T, double dt, const SplittingOptions& opts) {
  if (thetas.size() < 2) throw InvalidArgument("constant fit needs at least two sampled orbits");
  if (!(dt > 0) || !(T >= 4 * dt)) throw InvalidArgument("constant fit needs T >= 4 dt > 0");
  int n = static_cast<int>(std::floor(T / dt + 1e-9));
  std::vector<double> ts(n + 1), ms(n + 1, -1e300), mu(n + 1, -1e300), mall(n + 1);
  for (int k = 0; k <= n; ++k) ts[k] = k * dt;
  for (const auto& th : thetas) {
    SplittingEstimate eu = estimate_splitting(m, th, opts);
    auto gu = log_growth(m, th, eu.u_jac, dt, n, opts.integ);
    auto end = flow(m, th, n * dt, opts.integ).state;
    SplittingEstimate es = estimate_splitting(m, end, opts);
    auto gs = log_growth(m, end, es.s_jac, -dt, n, opts.integ);
    for (int k = 0; k <= n; ++k) {
      // |d phi^-t|E^u(phi^t theta)| = 1 / |d phi^t e_u|, and likewise for E^s.
      mu[k] = std::max(mu[k], -gu[k]);
      ms[k] = std::max(ms[k], -gs[k]);
    }
  }
  for (int k = 0; k <= n; ++k) mall[k] = std::max(ms[k], mu[k]);
  LineFit fs = envelope_fit(ts, ms), fu = envelope_fit(ts, mu), fa = envelope_fit(ts, mall);
  if (!(fa.slope < 0)) throw NumericalError("no uniform exponential contraction on the sampled orbits");
  AnosovFit r;
  r.C = std::exp(fa.envelope);
  r.lambda = std::exp(fa.slope);
  r.C_fwd = std::exp(fs.envelope);
  r.lambda_fwd = std::exp(fs.slope);
  r.C_rev = std::exp(fu.envelope);
  r.lambda_rev = std::exp(fu.slope);
  r.rms = fa.rms;
  r.samples = static_cast<int>(thetas.size());
  r.horizon = n * dt;
  r.lambda_floor = std::exp(-m.curvature_scale());
  r.lambda_floor_ok = r.lambda >= r.lambda_floor * (1 - 1e-6);
  return r;
}

int default_iterate(double C, double lambda) {
  if (!(C > 0) || !(lambda > 0 && lambda < 1)) throw InvalidArgument("need C > 0 and lambda in (0, 1)");
  int m = 1;
  while (C * std::pow(lambda, m) >= 0.5) ++m;
  return m;
}

AnosovCertificate build_certificate(double c, double C, double lambda, double Q, double delta_proj,
                                    std::optional<int> m, std::optional<double> C_rev,
                                    std::optional<double> lambda_rev) {
  if (!(Q >= 0)) throw InvalidArgument("Q must be non-negative");
  if (!(Q < 1)) throw InvalidArgument("Q >= 1: stable and unstable bundles are not uniformly transverse");
  if (!(lambda > 0 && lambda < 1)) throw InvalidArgument("lambda must lie in (0, 1)");
  if (!(C > 0) || !(c > 0)) throw InvalidArgument("C and c must be positive");
  if (!(delta_proj > 0)) throw InvalidArgument("delta_proj must be positive");
  AnosovCertificate k;
  k.c = c;
  k.C = C;
  k.lambda = lambda;
  k.C_rev = C_rev.value_or(C);
  k.lambda_rev = lambda_rev.value_or(lambda);
  if (!(k.C_rev > 0) || !(k.lambda_rev > 0 && k.lambda_rev < 1))
    throw InvalidArgument("reversed-flow constants out of range");
  k.Q = Q;
  k.delta_proj = delta_proj;
  k.m = m ? *m : default_iterate(C, lambda);
  if (k.m < 1) throw InvalidArgument("iterate m must be >= 1");
  double s = std::sqrt(1 + c * c), sh = (1 + c) / c * std::sinh(c);
  k.L = 1 / std::sqrt(1 - Q) + 1;
  k.P1 = sh + C * lambda * s;
  k.P2 = sh + k.C_rev * k.lambda_rev * s;
  k.P = std::max(k.P1, k.P2);
  k.norm1_bound = k.L * C * lambda + k.L * s * k.P + 1;
  k.h_c = 2 * k.L * C * lambda + k.L * C * lambda * c * c + k.L * s * sh + 1;
  k.tau1 = 2 * k.L + 1;
  k.tau2 = 1 / (2 * delta_proj);
  k.kappa = k.tau1 / k.tau2 * (1 + c * c) * std::exp(2 * c * k.m);
  k.K1 = std::pow(k.h_c, k.m);
  k.K2 = 1 / C;
  k.beta = k.K2 / k.K1;
  return k;
}

SplittingCensus splitting_census(const std::vector<SplittingEstimate>& est) {
  SplittingCensus c;
  for (const auto& e : est) {
    c.f_max = std::max(c.f_max, std::abs(e.cosine()));
    c.delta_max = std::max(c.delta_max, projection_norm(e));
    ++c.samples;
  }
  return c;
}

AnosovCertificate calibrate_certificate(const SurfaceModel& m, const AnosovFit& fit,
                                        const SplittingCensus& census, double safety,
                                        std::optional<int> iterate) {
  if (census.samples == 0) throw InvalidArgument("certificate needs at least one splitting sample");
  if (!(census.f_max < 1)) throw NumericalError("sampled splitting is degenerate (f = 1)");
  // The splitting threshold is added because the sampled cosines are only
  // resolved to that accuracy.
  double Q = safety * census.f_max + SplittingOptions{}.threshold;
  if (Q >= 1) Q = 0.5 * (1 + census.f_max);
  double delta = std::max(1.0, safety * census.delta_max);
  return build_certificate(m.curvature_scale(), fit.C, fit.lambda, Q, delta, iterate, fit.C_rev,
                           fit.lambda_rev);
}

void InequalityCheck::record(const UnitTangentState& th, double lhs, double rhs, bool strict) {
  ++samples;
  bool bad = strict ? !(lhs < rhs) : !(lhs <= rhs);
  if (bad) ++violations;
  double margin = (rhs - lhs) / std::max(std::abs(rhs), 1e-300);
  if (margin < worst_margin) {
    worst_margin = margin;
    witness = {th, lhs, rhs};
  }
}

const InequalityCheck& BoundReport::get(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw InvalidArgument("no such inequality: " + name);
}

bool BoundReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.violations == 0; });
}

void BoundReport::merge(const BoundReport& o) {
  for (const auto& oc : o.checks) {
    auto it = std::find_if(checks.begin(), checks.end(), [&](const auto& c) { return c.name == oc.name; });
    if (it == checks.end()) {
      checks.push_back(oc);
      continue;
    }
    it->samples += oc.samples;
    it->violations += oc.violations;
    if (oc.worst_margin < it->worst_margin) {
      it->worst_margin = oc.worst_margin;
      it->witness = oc.witness;
    }
  }
  skipped += o.skipped;
}

Vec3 singular_values(const Mat3& D) {
  Eigen::JacobiSVD<Mat3> svd(D);
  return svd.singularValues();
}

BoundReport check_bounds(const SurfaceModel& m, const std::vector<UnitTangentState>& thetas,
                         const AnosovCertificate& cert, const BoundCheckOptions& opts) {
  BoundReport rep;
  const char* names[] = {"jacobi_unit_time", "norm1_certificate", "norm1_h", "splitting_angle",
                         "tau1_growth",   "tau2_growth",  "kappa_equivalence", "iterate_two_sided",
                         "neighbour_beta",     "eberlein"};
  for (const char* n : names) {
    InequalityCheck c;
    c.name = n;
    rep.checks.push_back(c);
  }
  auto chk = [&](int i) -> InequalityCheck& { return rep.checks[i]; };
  const auto& io = opts.split.integ;
  for (size_t idx = 0; idx < thetas.size(); ++idx) {
    const UnitTangentState& th = thetas[idx];
    SplittingEstimate e;
    try {
      e = estimate_splitting(m, th, opts.split);
    } catch (const NumericalError&) {
      ++rep.skipped;
      continue;
    }
    Orbit o(m, th, io);
    o.advance(1.0);
    Mat2 J1 = o.jacobi();
    if (cert.m > 1) o.advance(cert.m - 1.0);
    Mat2 Jm = o.jacobi();
    Mat2 Jb = flow(m, th, -1.0, io).cocycle.block<2, 2>(1, 1);
    Mat3 D1 = Mat3::Identity(), Dm = Mat3::Identity();
    D1.block<2, 2>(1, 1) = J1;
    Dm.block<2, 2>(1, 1) = Jm;
    Vec3 s1 = singular_values(D1), sm = singular_values(Dm);

    chk(0).record(th, std::abs((J1 * e.u_jac).x()), cert.P);
    chk(0).record(th, std::abs((Jb * e.s_jac).x()), cert.P);
    chk(1).record(th, s1[0], cert.norm1_bound);
    chk(2).record(th, s1[0], cert.h_c);
    chk(3).record(th, std::abs(e.cosine()), cert.Q);
    chk(4).record(th, sm[0], cert.tau1 * (Jm * e.u_jac).norm());
    chk(5).record(th, cert.tau2 * (Jm * e.s_jac).norm(), sm[2]);
    chk(6).record(th, sm[0], cert.kappa * sm[2]);
    chk(7).record(th, cert.K2, sm[0], true);
    chk(7).record(th, sm[0], cert.K1, true);

    std::seed_seq seq{static_cast<unsigned long long>(opts.seed), static_cast<unsigned long long>(idx + opts.index_offset)};
    std::mt19937_64 rng(seq);
    UnitTangentState nb = nearby_state(m, th, opts.neighbour_eps, rng);
    Mat3 Dn = flow_derivative(m, nb, cert.m, io);
    chk(8).record(th, cert.beta * singular_values(Dn)[0], sm[0], true);

    for (const Vec2& j : {e.s_jac, e.u_jac}) chk(9).record(th, std::abs(j.y()), cert.c * std::abs(j.x()));
  }
  return rep;
}

InclusionResult ball_inclusion(const SurfaceModel& m, const UnitTangentState& theta, int iterate,
                                    double rho, const AnosovCertificate& cert, int n_boundary,
                                    unsigned long long seed) {
  if (!(rho > 0 && rho < 1)) throw InvalidArgument("rho must lie in (0, 1)");
  if (iterate < 0 || n_boundary < 1) throw InvalidArgument("need iterate >= 0 and n_boundary >= 1");
  // The modular surface is locally the hyperbolic plane; the check is local,
  // so it runs in the universal cover where the chart needs no folding.
  SurfaceModel cover = m.kind() == ModelKind::ModularSurface ? SurfaceModel::hyperbolic(1.0) : m;
  IntegratorOptions io;
  InclusionResult res;
  res.radius = cert.beta / cert.kappa * rho;
  UnitTangentState target = iterate ? flow(cover, theta, iterate, io).state : theta;
  Mat3 D = iterate ? flow_derivative(cover, theta, iterate, io) : Mat3::Identity();
  Mat3 Dinv = D.inverse();
  std::seed_seq seq{seed, 51ULL};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> nd;
  res.worst_margin = 1e300;
  for (int i = 0; i < n_boundary; ++i) {
    Vec3 xi(nd(rng), nd(rng), nd(rng));
    xi *= res.radius / xi.norm();
    ++res.samples;
    std::optional<Vec3> zeta;
    try {
      SmPoint p = sm_exp(cover, theta, xi);
      SmPoint q = p;
      if (iterate) {
        UnitTangentState moved = flow(cover, sm_state(cover, p), iterate, io).state;
        q = sm_point(moved);
      }
      zeta = sm_log(cover, target, q, D * xi);
    } catch (const NumericalError&) {
    }
    if (!zeta) {
      ++res.skipped;
      continue;
    }
    res.worst_margin = std::min(res.worst_margin, 1.0 - (Dinv * *zeta).norm() / rho);
  }
  res.pass = res.samples > res.skipped && res.worst_margin > 0 && res.skipped_fraction() < 0.01;
  return res;
}

double inclusion_sweep(const SurfaceModel& m, const UnitTangentState& theta, int iterate,
                       const std::vector<double>& rhos, const AnosovCertificate& cert, int n_boundary,
                       unsigned long long seed) {
  double best = 0;
  for (double r : rhos)
    if (ball_inclusion(m, theta, iterate, r, cert, n_boundary, seed).pass) best = std::max(best, r);
  return best;
}

bool RatioSample::inside() const {
  const double tol = 1e-8;
  return r >= lower * (1 - tol) && r <= upper * (1 + tol);
}

std::vector<RatioSample> ratio_diagnostic(const SurfaceModel& m, const UnitTangentState& theta,
                                          const std::vector<double>& t_grid, double lambda, double c,
                                          const SplittingOptions& opts) {
  if (t_grid.empty()) return {};
  if (!(lambda > 0 && lambda < 1) || !(c > 0)) throw InvalidArgument("need lambda in (0,1), c > 0");
  for (size_t i = 0; i < t_grid.size(); ++i)
    if (t_grid[i] < 0 || (i && t_grid[i] < t_grid[i - 1]))
      throw InvalidArgument("ratio grid must be non-negative and ascending");
  const auto& io = opts.integ;
  double tmax = t_grid.back();
  SplittingEstimate e0 = estimate_splitting(m, theta, opts);
  UnitTangentState end = flow(m, theta, tmax, io).state;
  SplittingEstimate e1 = estimate_splitting(m, end, opts);

  std::vector<double> ju(t_grid.size()), js(t_grid.size());
  {
    Orbit o(m, theta, io);
    double t = 0;
    for (size_t i = 0; i < t_grid.size(); ++i) {
      o.advance(t_grid[i] - t);
      t = t_grid[i];
      ju[i] = (o.jacobi() * e0.u_jac).x();
    }
  }
  double s0norm;
  {
    Orbit o(m, end, io);
    double t = tmax;
    for (size_t i = t_grid.size(); i-- > 0;) {
      o.advance(t_grid[i] - t);
      t = t_grid[i];
      js[i] = (o.jacobi() * e1.s_jac).x();
    }
    o.advance(-t);
    s0norm = (o.jacobi() * e1.s_jac).norm();
  }
  double r0 = std::abs(e0.s_jac.x()) / std::abs(e0.u_jac.x());
  double ll = std::log(lambda);
  std::vector<RatioSample> out;
  for (size_t i = 0; i < t_grid.size(); ++i) {
    double t = t_grid[i];
    double a = std::abs(js[i]) / s0norm, b = std::abs(ju[i]);
    if (a < 1e-12 || b < 1e-12) throw NumericalError("Jacobi field vanished: conjugate point along the orbit");
    RatioSample s;
    s.t = t;
    s.r = std::exp(-2 * t * ll) * a / b;
    s.lower = r0 * std::exp((-2 * ll - 2 * c) * t);
    s.upper = r0 * std::exp((-2 * ll + 2 * c) * t);
    out.push_back(s);
  }
  return out;
}

}  // namespace anosov
