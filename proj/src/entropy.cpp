#include "anosov/entropy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "anosov/bounds.hpp"
#include "anosov/rng.hpp"

namespace anosov {

namespace {

const double kSqrt3Half = std::sqrt(3.0) / 2.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double density(const SurfaceModel& m, const Vec2& p) { return std::exp(2 * m.jet(p).psi); }

// x-independent density of the half-plane models, sampled over [ylo, yhi].
double half_plane_mass(const SurfaceModel& m, double ylo, double yhi) {
  // Simpson in s = log y: integrand exp(2 psi) y.
  int n = 2000;
  double a = std::log(ylo), b = std::log(yhi), h = (b - a) / n, acc = 0;
  for (int i = 0; i <= n; ++i) {
    double s = a + i * h, y = std::exp(s);
    double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * density(m, Vec2(0, y)) * y;
  }
  return acc * h / 3;
}

}  // namespace

bool CoreSpec::contains(const UnitTangentState& s) const {
  const Vec2& p = s.base;
  if (kind == Kind::ModularDomain) return p.y() <= y_core && in_fundamental_domain(p, 1e-12);
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
}

bool CoreSpec::escaped(const UnitTangentState& s) const {
  if (kind == Kind::ModularDomain) return false;
  const Vec2& p = s.base;
  double span = std::max((hi - lo).maxCoeff(), 1.0);
  if (lo.y() > 0)
    return p.y() > hi.y() * 1e12 || p.y() < lo.y() * 1e-12 || std::abs(p.x()) > 1e12 * span;
  return (p - 0.5 * (lo + hi)).norm() > 1e6 * span;
}

Vec2 CoreSpec::box_lo() const { return kind == Kind::ModularDomain ? Vec2(-0.5, kSqrt3Half) : lo; }
Vec2 CoreSpec::box_hi() const { return kind == Kind::ModularDomain ? Vec2(0.5, y_core) : hi; }

CoreSpec default_core(const SurfaceModel& m) {
  CoreSpec c;
  if (m.kind() == ModelKind::ModularSurface) {
    c.kind = CoreSpec::Kind::ModularDomain;
  } else if (m.chart() == ChartKind::Plane) {
    c.lo = Vec2(-1, -1);
    c.hi = Vec2(1, 1);
  }
  return c;
}

double core_liouville_mass(const SurfaceModel& m, const CoreSpec& core) {
  if (core.kind == CoreSpec::Kind::ModularDomain) {
    if (m.kind() != ModelKind::ModularSurface) throw InvalidArgument("modular core on a non-modular model");
    return 2 * kPi * (kPi / 3 - 1 / core.y_core);
  }
  Vec2 lo = core.lo, hi = core.hi;
  if (m.chart() == ChartKind::Plane) return 2 * kPi * (hi - lo).prod();
  if (!(lo.y() > 0)) throw InvalidArgument("half-plane core needs y > 0");
  return 2 * kPi * (hi.x() - lo.x()) * half_plane_mass(m, lo.y(), hi.y());
}

double excluded_cusp_fraction(const CoreSpec& core) {
  if (core.kind != CoreSpec::Kind::ModularDomain) return 0.0;
  return (1 / core.y_core) / (kPi / 3);
}

UnitTangentState sample_liouville(const SurfaceModel& m, const CoreSpec& core, std::mt19937_64& rng) {
  Vec2 lo = core.box_lo(), hi = core.box_hi();
  if (m.chart() == ChartKind::Plane) {
    Vec2 p(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()));
    return make_state(m, p, uniform(rng, -kPi, kPi));
  }
  // Propose from dy / y^2 by inverse CDF, then correct for the rest of the
  // density by rejection (only the perturbed model needs it).
  double ratio_max = 1.0;
  if (m.kind() == ModelKind::PerturbedHyperbolic)
    for (const auto& md : m.modes()) ratio_max *= std::exp(2 * std::abs(m.eps() * md.amplitude));
  double c2 = m.c() * m.c();
  for (int tries = 0; tries < 1000000; ++tries) {
    double x = uniform(rng, lo.x(), hi.x());
    double u = uniform(rng, 0.0, 1.0);
    double y = 1 / (1 / lo.y() - u * (1 / lo.y() - 1 / hi.y()));
    Vec2 p(x, y);
    if (core.kind == CoreSpec::Kind::ModularDomain && p.squaredNorm() < 1) continue;
    double g = uniform(rng, 0.0, 1.0);
    double ratio = density(m, p) * y * y * c2;
    if (ratio > ratio_max * (1 + 1e-12)) throw NumericalError("Liouville sampler envelope too small");
    if (g * ratio_max > ratio) continue;
    return make_state(m, p, uniform(rng, -kPi, kPi));
  }
  throw NumericalError("Liouville sampler failed to accept a point");
}

void BowenConfig::validate() const {
  auto bad = [](const std::string& w) { throw InvalidArgument("BowenConfig: " + w); };
  if (!(N > 0)) bad("N must be positive");
  if (!(rho_const > 0 && rho_const < 1)) bad("rho_const must lie in (0, 1)");
  if (!(xi_graph > 0 && xi_graph < 1)) bad("xi_graph must lie in (0, 1)");
  if (!(t0 > 0) || rho_const > t0 / 2) bad("need rho_const <= t0 / 2");
  if (n_min < 0 || n_max < n_min) bad("need 0 <= n_min <= n_max");
  if (fit_from < 0 || fit_min_inside < 1) bad("need fit_from >= 0 and fit_min_inside >= 1");
  if (samples_per_depth < 10 || pilot_samples < 10) bad("too few samples");
  if (L_max < 1) bad("L_max must be at least 1");
  if (!(step > 0)) bad("step must be positive");
  if (!(eps_prop > 0)) bad("eps_prop must be positive");
  if (!(max_indeterminate >= 0 && max_indeterminate <= 1)) bad("max_indeterminate must lie in [0, 1]");
}

BowenConfig default_bowen_config(const SurfaceModel& m) {
  BowenConfig c;
  c.core = default_core(m);
  return c;
}

RhoResult return_time_rho(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg) {
  RhoResult r;
  r.rho = cfg.rho_const;
  r.in_core = cfg.core.contains(theta);
  if (!r.in_core) return r;
  UnitTangentState s = theta;
  for (int L = 1; L <= cfg.L_max; ++L) {
    s = flow_fast(m, s, cfg.N, cfg.step);
    if (!m.valid(s.base) || cfg.core.escaped(s)) break;
    if (cfg.core.contains(s)) {
      r.L = L;
      r.rho = std::min(cfg.rho_const, std::pow(cfg.xi_graph, L));
      return r;
    }
  }
  r.truncated = true;
  return r;
}

namespace {

struct BowenContext {
  const SurfaceModel* m;
  const BowenConfig* cfg;
  std::vector<UnitTangentState> refs;
  std::vector<double> rho;
  Vec3 q0;
  Mat3 A;  // columns: chart coordinates of G, e_s, e_u
  double detA = 1.0;
  Vec3 ball_box;
  RhoResult rho0;
};

BowenContext make_context(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                          bool with_frame = true) {
  cfg.validate();
  require_unit(m, theta);
  BowenContext c;
  c.m = &m;
  c.cfg = &cfg;
  c.q0 = Vec3(theta.base.x(), theta.base.y(), state_angle(theta));
  double sine = 1.0;
  if (with_frame) try {
    SplittingEstimate e = estimate_splitting(m, theta);
    c.A.col(0) = assemble(m, theta, e.g_dir);
    c.A.col(1) = assemble(m, theta, e.e_s);
    c.A.col(2) = assemble(m, theta, e.e_u);
    sine = std::sqrt(std::max(0.0, 1 - e.cosine() * e.cosine()));
  } catch (const SplittingFailure&) {
    for (int k = 0; k < 3; ++k) c.A.col(k) = assemble(m, theta, from_frame(theta, Vec3::Unit(k)));
  }
  if (!(sine > 1e-3)) throw NumericalError("stable and unstable directions nearly parallel");
  c.detA = std::abs(c.A.determinant());
  c.rho0 = return_time_rho(m, theta, cfg);
  double R = 1.3 * c.rho0.rho;
  c.ball_box = Vec3(R, R / sine, R / sine);
  c.refs.push_back(theta);
  c.rho.push_back(c.rho0.rho);
  return c;
}

void extend_refs(BowenContext& c, int n) {
  while (static_cast<int>(c.refs.size()) <= n) {
    UnitTangentState s = flow_fast(*c.m, c.refs.back(), c.cfg->N, c.cfg->step);
    c.refs.push_back(s);
    c.rho.push_back(return_time_rho(*c.m, s, *c.cfg).rho);
  }
}

using Member = BowenMembership::Kind;

BowenMembership classify(const BowenContext& c, UnitTangentState w, int n) {
  bool indet = false;
  for (int j = 0; j <= n; ++j) {
    if (j > 0) w = flow_fast(*c.m, w, c.cfg->N, c.cfg->step);
    if (!c.m->valid(w.base)) return {Member::Escaped, j};
    double r = c.rho[j];
    DistanceBounds d = sm_distance_bounds(*c.m, c.refs[j], w);
    if (d.upper <= r) continue;
    if (d.lower > r) return {Member::Escaped, j};
    d = sm_distance_bounds_refined(*c.m, c.refs[j], w);
    if (d.upper <= r) continue;
    if (d.lower > r) return {Member::Escaped, j};
    indet = true;
  }
  return {indet ? Member::Indeterminate : Member::Inside, -1};
}

// Sampling box in the frame coordinates (a, s, u') around theta, where the
// unstable coordinate is u = u' + q(a, s) for a cubic shear q. The shear
// has unit Jacobian, so the box volume is 8 E_a E_s E_u'.
struct SampleBox {
  Vec3 E = Vec3::Zero();
  static constexpr int kTerms = 10;
  using Coef = Eigen::Matrix<double, kTerms, 1>;
  Coef shear = Coef::Zero();

  static Coef basis(double a, double s) {
    Coef b;
    b << 1, a, s, a * a, a * s, s * s, a * a * a, a * a * s, a * s * s, s * s * s;
    return b;
  }
  // Same basis in units of the extents, for a well-conditioned fit.
  static Coef unscale(const Coef& f, double ea, double es) {
    Coef b = basis(1 / ea, 1 / es);
    // Monomial a^i s^j of the scaled fit carries ea^-i es^-j.
    return f.cwiseProduct(b);
  }
  Vec3 frame(const Vec3& z) const { return Vec3(z[0], z[1], z[2] + shear.dot(basis(z[0], z[1]))); }
};

struct Batch {
  BowenDepth d;
  Vec3 reach = Vec3::Zero();  // largest |z_k| / E_k of a non-escaped sample
  std::vector<Vec3> kept;
};

Batch run_batch(const BowenContext& c, int n, const SampleBox& box, long samples, std::mt19937_64 rng,
                bool keep) {
  const SurfaceModel& m = *c.m;
  const Vec3& E = box.E;
  Batch b;
  b.d.n = n;
  b.d.samples = samples;
  b.d.extents = E;
  double W = c.detA * 8 * E.prod();
  double s1 = 0, s2 = 0, sl = 0, sw = 0;
  for (long i = 0; i < samples; ++i) {
    Vec3 z(uniform(rng, -E[0], E[0]), uniform(rng, -E[1], E[1]), uniform(rng, -E[2], E[2]));
    Vec3 q = c.q0 + c.A * box.frame(z);
    Vec2 p(q.x(), q.y());
    if (!m.valid(p)) {
      ++b.d.escaped;
      continue;
    }
    double w = density(m, p);
    sw += w;
    Member k = classify(c, make_state(m, p, q.z()), n).kind;
    if (k == Member::Escaped) {
      ++b.d.escaped;
      continue;
    }
    if (keep) b.kept.push_back(z);
    b.reach = b.reach.cwiseMax(z.cwiseAbs().cwiseQuotient(E));
    if (k == Member::Inside) {
      ++b.d.inside;
      sl += w;
    } else {
      ++b.d.indeterminate;
    }
    s1 += w;
    s2 += w * w;
  }
  double N = static_cast<double>(samples);
  double mean = s1 / N, var = std::max(0.0, s2 / N - mean * mean);
  b.d.nu = W * mean;
  b.d.nu_lower = W * sl / N;
  b.d.box_measure = W * sw / N;
  // With no sample inside, report the weight of a single sample instead.
  b.d.halfwidth = 1.96 * W * std::max(std::sqrt(var / N), mean > 0 ? 0.0 : sw / N / N);
  return b;
}

// Refits the box to the non-escaped pilot samples: shear of u' over (a, s)
// by least squares, then extents 1.3 x the reach.
void refit_box(SampleBox& box, const std::vector<Vec3>& kept) {
  const double grow = 1.3;
  Vec3 reach = Vec3::Zero();
  if (kept.size() >= 40) {
    Eigen::MatrixXd X(kept.size(), SampleBox::kTerms);
    Eigen::VectorXd Y(kept.size());
    for (size_t i = 0; i < kept.size(); ++i) {
      X.row(i) = SampleBox::basis(kept[i][0] / box.E[0], kept[i][1] / box.E[1]).transpose();
      Y[i] = kept[i][2];
    }
    SampleBox::Coef raw = SampleBox::unscale(X.colPivHouseholderQr().solve(Y), box.E[0], box.E[1]);
    for (const Vec3& z : kept) {
      double u = z[2] - raw.dot(SampleBox::basis(z[0], z[1]));
      reach = reach.cwiseMax(Vec3(std::abs(z[0]), std::abs(z[1]), std::abs(u)));
    }
    box.shear += raw;
  } else {
    for (const Vec3& z : kept) reach = reach.cwiseMax(z.cwiseAbs());
  }
  box.E = box.E.cwiseMin(grow * reach);
}

BowenDepth measure_depth(BowenContext& c, int n, std::uint64_t seed, std::uint64_t id, SampleBox& box) {
  extend_refs(c, n);
  Batch b;
  const int kGrowMax = 6;
  for (int attempt = 0;; ++attempt) {
    b = run_batch(c, n, box, c.cfg->samples_per_depth,
                  keyed_rng(seed, {stream::kBowen, id, static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(attempt)}),
                  false);
    bool grow = false;
    for (int k = 0; k < 3; ++k)
      if (b.reach[k] > 0.95) {
        box.E[k] *= 1.5;
        grow = true;
      }
    if (!grow || attempt == kGrowMax) break;
  }
  if (b.d.indeterminate_fraction() > c.cfg->max_indeterminate) {
    std::ostringstream os;
    os << "indeterminate distance band holds " << 100 * b.d.indeterminate_fraction()
       << "% of the samples at depth " << n << "; widen rho_const or tighten the distance bounds";
    throw NumericalError(os.str());
  }
  return b.d;
}

}  // namespace

BowenMembership bowen_membership(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                                 const UnitTangentState& omega, int n) {
  if (n < 0) throw InvalidArgument("Bowen depth must be non-negative");
  BowenContext c = make_context(m, theta, cfg, false);
  extend_refs(c, n);
  return classify(c, omega, n);
}

BowenDepth bowen_set_measure(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                             int n, std::uint64_t seed, std::uint64_t theta_id, std::optional<Vec3> extents) {
  if (n < 0) throw InvalidArgument("Bowen depth must be non-negative");
  BowenContext c = make_context(m, theta, cfg);
  SampleBox box;
  box.E = extents.value_or(c.ball_box);
  if (!(box.E.minCoeff() > 0)) throw InvalidArgument("sampling box extents must be positive");
  return measure_depth(c, n, seed, theta_id, box);
}

BowenProfile bowen_profile(const SurfaceModel& m, const UnitTangentState& theta, const BowenConfig& cfg,
                           std::uint64_t seed, std::uint64_t theta_id) {
  BowenContext c = make_context(m, theta, cfg);
  BowenProfile prof;
  prof.model = m.name();
  prof.theta = theta;
  prof.theta_id = theta_id;
  prof.rho0 = c.rho0;
  SampleBox box;
  box.E = c.ball_box;
  for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
    if (n > 0) {
      // Pilot: fit the box to the part of S_n that the samples reach.
      extend_refs(c, n);
      for (int attempt = 0; attempt < 6; ++attempt) {
        Batch p = run_batch(c, n, box, cfg.pilot_samples,
                            keyed_rng(seed, {stream::kBowenPilot, theta_id, static_cast<std::uint64_t>(n),
                                             static_cast<std::uint64_t>(attempt)}),
                            true);
        if (p.kept.empty()) {
          box.E *= 0.5;
          continue;
        }
        double before = box.E.prod();
        refit_box(box, p.kept);
        // Another round only while the box keeps shrinking markedly.
        if (box.E.prod() > 0.7 * before) break;
      }
    }
    prof.depths.push_back(measure_depth(c, n, seed, theta_id, box));
  }
  if (m.kind() == ModelKind::ModularSurface) {
    extend_refs(c, cfg.n_max);
    for (int j = 0; j <= cfg.n_max; ++j)
      if (c.refs[j].base.y() >= 0.5 / std::sinh(c.rho[j])) prof.cusp_wrap_steps.push_back(j);
  }
  return prof;
}

LocalEntropy local_entropy(const BowenProfile& prof, const BowenConfig& cfg) {
  LocalEntropy le;
  le.model = prof.model;
  le.theta = prof.theta;
  le.theta_id = prof.theta_id;
  le.rho = prof.rho0.rho;
  le.L = prof.rho0.L;
  std::vector<double> ns, ys, ws;
  double indet = 0;
  for (const auto& d : prof.depths) {
    indet = std::max(indet, d.indeterminate_fraction());
    if (d.n < cfg.fit_from || d.inside + d.indeterminate < cfg.fit_min_inside || !(d.nu > 0)) continue;
    double rel = std::max(d.halfwidth / 1.96 / d.nu, 1e-6);
    ns.push_back(d.n);
    ys.push_back(-std::log(d.nu));
    ws.push_back(1 / (rel * rel));
  }
  le.indeterminate_fraction = indet;
  if (ns.size() < 4) return le;
  le.n_lo = static_cast<int>(ns.front());
  le.n_hi = static_cast<int>(ns.back());
  for (int j : prof.cusp_wrap_steps)
    if (j <= le.n_hi) ++le.cusp_wrap_steps;
  int k = static_cast<int>(ns.size());
  Eigen::MatrixXd X(k, 3);
  Eigen::VectorXd Y(k), Wt(k);
  for (int i = 0; i < k; ++i) {
    X(i, 0) = 1;
    X(i, 1) = ns[i];
    X(i, 2) = std::log1p(ns[i]);
    Y[i] = ys[i];
    Wt[i] = ws[i];
  }
  struct Fit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd Minv;
    double chi2 = 0;
  };
  auto wls = [&](const Eigen::MatrixXd& A) {
    Eigen::MatrixXd AtW = A.transpose() * Wt.asDiagonal();
    Eigen::MatrixXd M = AtW * A;
    Fit f;
    f.beta = M.ldlt().solve(AtW * Y);
    Eigen::VectorXd r = Y - A * f.beta;
    f.chi2 = r.dot(Wt.asDiagonal() * r);
    f.Minv = M.inverse();
    return f;
  };
  Fit full = wls(X), lin = wls(X.leftCols(2));
  double scale_full = std::max(1.0, full.chi2 / (k - 3));
  // Nested-model F test at 5%: the log term stays only when the data need it.
  le.prefactor = lin.chi2 - full.chi2 > 3.84 * scale_full;
  const Fit& f = le.prefactor ? full : lin;
  int dof = k - static_cast<int>(f.beta.size());
  double scale = std::max(1.0, f.chi2 / dof);
  Eigen::MatrixXd cov = f.Minv * scale;
  le.a = f.beta[0];
  le.h_fit = f.beta[1];
  le.p = le.prefactor ? f.beta[2] : 0.0;
  le.h = std::max(0.0, le.h_fit);
  le.halfwidth = std::max(1e-6, 1.96 * std::sqrt(std::max(0.0, cov(1, 1))));
  auto slope = [&](int from, int to) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int c = to - from;
    for (int i = from; i < to; ++i) {
      sx += ns[i];
      sy += ys[i];
      sxx += ns[i] * ns[i];
      sxy += ns[i] * ys[i];
    }
    double den = c * sxx - sx * sx;
    return den > 0 ? (c * sxy - sx * sy) / den : 0.0;
  };
  le.slope_early = slope(0, k / 2 + 1);
  le.slope_late = slope(k / 2, k);
  le.conclusive = std::isfinite(le.h_fit);
  return le;
}

double lower_bound_rhs(double chi_plus, double P_logdet, const BowenConfig& cfg) {
  double e = cfg.eps_prop;
  return cfg.N * (chi_plus - e - e / cfg.N - 4 * P_logdet * std::sqrt(e));
}

Suprema estimate_suprema(const SurfaceModel& m, const CoreSpec& core, int n_states, std::uint64_t seed,
                         double safety) {
  if (n_states < 1 || !(safety >= 1)) throw InvalidArgument("need n_states >= 1 and safety >= 1");
  auto rng = keyed_rng(seed, {stream::kSupremum});
  IntegratorOptions io{1e-3, true, 1e3};
  Suprema s;
  for (int i = 0; i < n_states; ++i) {
    UnitTangentState th = sample_liouville(m, core, rng);
    Mat3 F = flow_derivative(m, th, 1.0, io);
    Mat3 B = flow_derivative(m, th, -1.0, io);
    Vec3 sv = Eigen::JacobiSVD<Mat3>(F).singularValues();
    double ld = 0;
    for (int k = 0; k < 3; ++k)
      if (sv[k] > 1) ld += std::log(sv[k]);
    double up = std::max(sv[0], Eigen::JacobiSVD<Mat3>(B).singularValues()[0]);
    s.P_logdet = std::max(s.P_logdet, ld);
    s.Upsilon = std::max(s.Upsilon, up);
  }
  s.P_logdet *= safety;
  s.Upsilon *= safety;
  s.samples = n_states;
  return s;
}

namespace {

struct Grid {
  PartitionSpec spec;
  Vec2 lo, hi;
  bool wrap_x = false;
  int total() const { return spec.nx * spec.ny * spec.nphi; }
  int index(int ix, int iy, int ip) const { return (ix * spec.ny + iy) * spec.nphi + ip; }
  std::array<int, 3> coords(const UnitTangentState& s) const {
    auto bin = [](double v, double a, double b, int n) {
      return std::clamp(static_cast<int>(std::floor((v - a) / (b - a) * n)), 0, n - 1);
    };
    return {bin(s.base.x(), lo.x(), hi.x(), spec.nx), bin(s.base.y(), lo.y(), hi.y(), spec.ny),
            bin(state_angle(s), -kPi, kPi, spec.nphi)};
  }
  // total() stands for the complement of the core.
  int cell(const UnitTangentState& s) const {
    if (!spec.core.contains(s)) return total();
    auto c = coords(s);
    return index(c[0], c[1], c[2]);
  }
};

}  // namespace

PartitionReport partition_entropy_bound(const SurfaceModel& m, const PartitionSpec& spec, double m_time,
                                        long n_pairs, std::uint64_t seed, double step) {
  if (spec.nx < 1 || spec.ny < 1 || spec.nphi < 1) throw InvalidArgument("partition needs >= 1 cell per axis");
  if (!(m_time >= 0) || n_pairs < 1) throw InvalidArgument("need m_time >= 0 and n_pairs >= 1");
  Grid g{spec, spec.core.box_lo(), spec.core.box_hi(), m.kind() == ModelKind::ModularSurface};
  const int K = g.total();
  auto rng = keyed_rng(seed, {stream::kPartition});
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n_pairs);
  std::vector<long> count(K + 1, 0);
  for (long i = 0; i < n_pairs; ++i) {
    UnitTangentState th = sample_liouville(m, spec.core, rng);
    UnitTangentState im = flow_fast(m, th, m_time, step);
    int b = g.cell(th), a = m.valid(im.base) ? g.cell(im) : K;
    pairs.push_back({b, a});
    ++count[b];
  }
  std::vector<int> remap(K + 1);
  PartitionReport rep;
  for (int k = 0; k < K; ++k) {
    remap[k] = count[k] >= spec.min_count ? k : K;
    if (count[k] > 0 && count[k] < spec.min_count) ++rep.merged_cells;
  }
  remap[K] = K;
  std::map<int, std::map<int, long>> joint;
  std::vector<long> nb(K + 1, 0);
  for (auto [b, a] : pairs) {
    ++joint[remap[b]][remap[a]];
    ++nb[remap[b]];
  }
  double Np = static_cast<double>(n_pairs);
  for (const auto& [b, row] : joint)
    for (const auto& [a, n] : row) {
      double p = double(n) / nb[b];
      rep.lhs -= n / Np * std::log(p);
    }

  // Census: lattice points of each kept cell pushed by phi^m, marked cells
  // dilated by one index in every direction.
  const int L = 5;
  Vec3 width((g.hi.x() - g.lo.x()) / spec.nx, (g.hi.y() - g.lo.y()) / spec.ny, 2 * kPi / spec.nphi);
  for (int b = 0; b <= K; ++b) {
    if (nb[b] == 0) continue;
    long card = 0;
    if (b == K) {
      card = K + 1;
    } else {
      int ix = b / (spec.ny * spec.nphi), iy = (b / spec.nphi) % spec.ny, ip = b % spec.nphi;
      std::set<int> marked;
      bool outside = false;
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          for (int k = 0; k < L; ++k) {
            Vec2 p(g.lo.x() + (ix + i / double(L - 1)) * width[0], g.lo.y() + (iy + j / double(L - 1)) * width[1]);
            double ang = -kPi + (ip + k / double(L - 1)) * width[2];
            if (!m.valid(p)) continue;
            UnitTangentState s = make_state(m, p, ang);
            if (!spec.core.contains(s)) continue;
            UnitTangentState im = flow_fast(m, s, m_time, step);
            if (!m.valid(im.base) || !spec.core.contains(im)) {
              outside = true;
              continue;
            }
            auto c = g.coords(im);
            for (int dx = -1; dx <= 1; ++dx)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dp = -1; dp <= 1; ++dp) {
                  int x = c[0] + dx, y = c[1] + dy, q = (c[2] + dp + spec.nphi) % spec.nphi;
                  if (g.wrap_x) x = (x + spec.nx) % spec.nx;
                  if (x < 0 || x >= spec.nx || y < 0 || y >= spec.ny) {
                    outside = true;
                    continue;
                  }
                  marked.insert(g.index(x, y, q));
                }
          }
      std::set<int> cand;
      for (int x : marked) cand.insert(remap[x]);
      if (outside) cand.insert(K);
      card = static_cast<long>(cand.size());
      for (const auto& [a, n] : joint[b])
        if (!cand.count(a)) rep.census_misses += n;
      card = std::max(card, 1L);
    }
    rep.rhs += nb[b] / Np * std::log(static_cast<double>(card));
  }
  double ymin = std::max(g.lo.y(), 1e-12);
  double conf = m.chart() == ChartKind::Plane ? 1.0 : std::exp(m.jet(Vec2(0.5 * (g.lo.x() + g.hi.x()), ymin)).psi);
  rep.cell_diameter = std::hypot(conf * std::hypot(width[0], width[1]), width[2]);
  rep.pairs = n_pairs;
  rep.cells = K + 1;
  return rep;
}

EntropyReport verdict(const SurfaceModel& m, const BowenConfig& cfg, const LyapunovSpectrum& spectrum,
                      const std::vector<LocalEntropy>& h_estimates, const Suprema& sup, double tolerance) {
  const std::string name = m.name();
  if (!spectrum.model.empty() && spectrum.model != name)
    throw InvalidArgument("spectrum belongs to " + spectrum.model + ", not " + name);
  for (const auto& h : h_estimates)
    if (h.model != name) throw InvalidArgument("entropy estimate belongs to " + h.model + ", not " + name);
  if (!(tolerance > 0)) throw InvalidArgument("tolerance must be positive");
  EntropyReport r;
  r.model = name;
  r.tolerance = tolerance;
  r.chi_plus = chi_plus(spectrum);
  r.P_logdet = sup.P_logdet;
  r.Upsilon = sup.Upsilon;
  r.h_local = h_estimates;
  r.pesin_applicable = m.finite_volume();
  r.cusp_fraction = m.kind() == ModelKind::ModularSurface ? excluded_cusp_fraction(cfg.core) : 0.0;
  std::vector<double> hs;
  int prop_ok = 0;
  double rhs = lower_bound_rhs(r.chi_plus, r.P_logdet, cfg);
  for (const auto& h : h_estimates) {
    if (!h.conclusive) continue;
    if (h.cusp_wrap_steps > 0) ++r.cusp_wrapped;
    double rate = h.h / cfg.N;
    hs.push_back(rate);
    if (rate > r.chi_plus + tolerance) ++r.ruelle_violations;
    if (h.h >= rhs) ++prop_ok;
  }
  if (hs.empty()) throw NumericalError("no conclusive local entropy estimate");
  double mean = 0, var = 0;
  for (double h : hs) mean += h;
  mean /= hs.size();
  for (double h : hs) var += (h - mean) * (h - mean);
  var = hs.size() > 1 ? var / (hs.size() - 1) : 0.0;
  r.h_central = mean;
  r.h_central_halfwidth = std::max(1e-6, 1.96 * std::sqrt(var / hs.size()));
  r.ruelle_slack = r.chi_plus - r.h_central;
  r.pesin_deviation = std::abs(r.h_central - r.chi_plus);
  r.ruelle_pass = r.ruelle_violations == 0 && r.ruelle_slack >= -tolerance;
  r.pesin_pass = r.pesin_deviation <= tolerance;
  r.lower_bound_fraction = double(prop_ok) / hs.size();
  r.lower_bound_pass = r.lower_bound_fraction >= 0.9;
  return r;
}

}  // namespace anosov
