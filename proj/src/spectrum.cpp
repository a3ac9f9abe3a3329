#include "anosov/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "anosov/bounds.hpp"

namespace anosov {

namespace {

void qr3_positive(const Mat3& A, Mat3& Q, Vec3& diag) {
  Eigen::HouseholderQR<Mat3> qr(A);
  Q = qr.householderQ();
  Mat3 R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (R(i, i) < 0) {
      R.row(i) *= -1.0;
      Q.col(i) *= -1.0;
    }
    diag[i] = R(i, i);
  }
}

Vec3 sorted_desc(Vec3 v) {
  std::sort(v.data(), v.data() + 3, std::greater<double>());
  return v;
}

}  // namespace

LyapunovSpectrum lyapunov_spectrum(const SurfaceModel& m, const UnitTangentState& theta0, double T,
                                   double renorm_dt, const SpectrumOptions& opts) {
  if (!(renorm_dt > 0)) throw InvalidArgument("renorm_dt must be positive");
  if (!(T >= 100 * renorm_dt * (1 - 1e-12))) throw InvalidArgument("spectrum needs T >= 100 renorm_dt");
  if (!(opts.warmup >= 0) || !(opts.tau > 0)) throw InvalidArgument("bad warmup or tau");
  Orbit o(m, theta0, opts.integ);
  Mat3 Q = Mat3::Identity();
  auto interval = [&](double dt, Vec3& diag) {
    o.set_jacobi(Mat2::Identity());
    o.advance(dt);
    Mat3 D = Mat3::Identity();
    D.block<2, 2>(1, 1) = o.jacobi();
    Mat3 A = D * Q;
    if (!A.allFinite())
      throw NumericalError("cocycle overflowed between renormalizations; use a smaller renorm_dt");
    qr3_positive(A, Q, diag);
    if (!(diag.minCoeff() > 0))
      throw NumericalError("cocycle became singular between renormalizations; use a smaller renorm_dt");
  };
  Vec3 diag;
  for (double w = opts.warmup; w > 1e-12; w -= renorm_dt) interval(std::min(renorm_dt, w), diag);

  LyapunovSpectrum s;
  s.model = m.name();
  s.T = T;
  s.renorm_dt = renorm_dt;
  s.theta0 = theta0;
  long n = static_cast<long>(std::ceil(T / renorm_dt - 1e-9));
  long every = std::max(1L, n / std::max(1, opts.trace_points));
  Vec3 sum = Vec3::Zero();
  double t = 0;
  for (long i = 0; i < n; ++i) {
    double dt = std::min(renorm_dt, T - t);
    interval(dt, diag);
    t += dt;
    for (int k = 0; k < 3; ++k) sum[k] += std::log(diag[k]);
    ++s.renorm_count;
    if ((i + 1) % every == 0 || i + 1 == n)
      s.convergence_trace.push_back({t, sorted_desc(sum / t * opts.tau)});
  }
  s.raw = sorted_desc(sum / t * opts.tau);
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const auto& p : s.convergence_trace) {
    if (p.t < 0.5 * T) continue;
    lo = lo.cwiseMin(p.estimate);
    hi = hi.cwiseMax(p.estimate);
  }
  s.trace_halfwidth = 0.5 * (hi - lo).maxCoeff();
  cluster_spectrum(s);
  return s;
}

void cluster_spectrum(LyapunovSpectrum& s) {
  s.exponents.clear();
  s.multiplicities.clear();
  double res = 10 * s.trace_halfwidth;
  std::vector<double> group;
  auto flush = [&]() {
    if (group.empty()) return;
    double mean = 0;
    for (double g : group) mean += g;
    s.exponents.push_back(mean / group.size());
    s.multiplicities.push_back(static_cast<int>(group.size()));
    group.clear();
  };
  for (int i = 0; i < 3; ++i) {
    if (!group.empty() && group.back() - s.raw[i] > res) flush();
    group.push_back(s.raw[i]);
  }
  flush();
}

double chi_plus(const LyapunovSpectrum& s, double threshold) {
  if (!s.converged(threshold)) throw NumericalError("spectrum has not converged: trace half-width too large");
  double cut = 3 * s.trace_halfwidth, sum = 0;
  for (size_t i = 0; i < s.exponents.size(); ++i)
    if (s.exponents[i] > cut) sum += s.exponents[i] * s.multiplicities[i];
  return sum;
}

double mean_unstable_growth(const SurfaceModel& m, const UnitTangentState& theta, int n) {
  if (n < 1) throw InvalidArgument("need n >= 1");
  SplittingEstimate e = estimate_splitting(m, theta);
  Orbit o(m, theta, IntegratorOptions{1e-3, true, 1e3});
  Vec2 v = e.u_jac;
  double acc = 0;
  for (int k = 0; k < n; ++k) {
    o.set_jacobi(Mat2::Identity());
    o.advance(1.0);
    v = o.jacobi() * v;
    acc += std::log(v.norm());
    v.normalize();
  }
  return acc / n;
}

std::vector<RegularityWitness> regularity_check(const SurfaceModel& m, const UnitTangentState& theta,
                                                int k_max, double epsilon,
                                                const std::vector<RegularityProbe>& probes,
                                                const IntegratorOptions& io) {
  if (k_max < 1 || !(epsilon >= 0)) throw InvalidArgument("need k_max >= 1 and epsilon >= 0");
  const double slack = 1e-8;
  std::vector<RegularityWitness> out;
  Orbit o(m, theta, io);
  std::vector<Vec3> v;
  std::vector<double> logn(probes.size(), 0.0);
  for (const auto& p : probes) {
    if (!(p.xi.norm() > 0)) throw InvalidArgument("regularity probe must be non-zero");
    v.push_back(p.xi.normalized());
  }
  for (int k = 1; k <= k_max; ++k) {
    o.set_jacobi(Mat2::Identity());
    o.advance(1.0);
    Mat3 D = Mat3::Identity();
    D.block<2, 2>(1, 1) = o.jacobi();
    RegularityWitness w;
    w.theta = theta;
    w.k = k;
    w.epsilon = epsilon;
    for (size_t i = 0; i < probes.size(); ++i) {
      v[i] = D * v[i];
      logn[i] += std::log(v[i].norm());
      v[i].normalize();
      double X = probes[i].exponent;
      bool lower = logn[i] >= k * (X - epsilon) + std::log1p(-slack);
      bool upper = logn[i] <= k * (X + epsilon) + std::log1p(slack);
      w.pass.push_back(lower && upper);
    }
    out.push_back(w);
  }
  return out;
}

double pass_fraction(const std::vector<RegularityWitness>& w) {
  long total = 0, ok = 0;
  for (const auto& x : w)
    for (bool b : x.pass) {
      ++total;
      ok += b;
    }
  return total ? double(ok) / total : 1.0;
}

int regularity_crossover(const std::vector<RegularityWitness>& w, size_t i) {
  int k = -1;
  for (auto it = w.rbegin(); it != w.rend(); ++it) {
    if (i >= it->pass.size() || !it->pass[i]) break;
    k = it->k;
  }
  return k;
}

}  // namespace anosov
