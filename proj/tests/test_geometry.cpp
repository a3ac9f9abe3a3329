#include <cmath>
#include <random>

#include "anosov/geometry.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace anosov;

namespace {

// Fourth-order central differences of a scalar function of the chart point.
template <class F>
double d_dx(F f, Vec2 p, int axis, double h = 1e-3) {
  Vec2 e = Vec2::Zero();
  e[axis] = h;
  return (-f(p + 2 * e) + 8 * f(p + e) - 8 * f(p - e) + f(p - 2 * e)) / (12 * h);
}

// Brioschi formula for an orthogonal metric E dx^2 + G dy^2, all derivatives
// taken numerically from metric_at.
double brioschi_oracle(const SurfaceModel& m, const Vec2& p) {
  auto E = [&](Vec2 q) { return metric_at(m, q)(0, 0); };
  auto G = [&](Vec2 q) { return metric_at(m, q)(1, 1); };
  auto Ey_over = [&](Vec2 q) { return d_dx(E, q, 1) / std::sqrt(E(q) * G(q)); };
  auto Gx_over = [&](Vec2 q) { return d_dx(G, q, 0) / std::sqrt(E(q) * G(q)); };
  double s = std::sqrt(E(p) * G(p));
  return -(d_dx(Ey_over, p, 1) + d_dx(Gx_over, p, 0)) / (2 * s);
}

// Christoffel symbols from metric derivatives: Gamma^k_ij = 1/2 g^kl (g_li,j + g_lj,i - g_ij,l).
Christoffel christoffel_oracle(const SurfaceModel& m, const Vec2& p) {
  std::array<Mat2, 2> dg;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        dg[a](i, j) = d_dx([&](Vec2 q) { return metric_at(m, q)(i, j); }, p, a);
  Mat2 ginv = metric_at(m, p).inverse();
  Christoffel G;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0;
        for (int l = 0; l < 2; ++l) s += 0.5 * ginv(k, l) * (dg[j](l, i) + dg[i](l, j) - dg[l](i, j));
        G[k](i, j) = s;
      }
  return G;
}

}  // namespace

TEST_CASE("metric_at: closed-form values") {
  CHECK(metric_at(SurfaceModel::flat(), Vec2(3, -1)).isApprox(Mat2::Identity()));
  auto h = SurfaceModel::hyperbolic(1.0);
  CHECK((metric_at(h, Vec2(0, 1)) - Mat2::Identity()).norm() < 1e-15);
  CHECK((metric_at(h, Vec2(0, 2)) - 0.25 * Mat2::Identity()).norm() < 1e-15);
  CHECK_THROWS_AS(metric_at(h, Vec2(0, -1)), DomainError);
  CHECK_THROWS_AS(metric_at(h, Vec2(0, 0)), DomainError);
}

TEST_CASE("christoffel_at: closed form and finite-difference oracle") {
  auto f = christoffel_at(SurfaceModel::flat(), Vec2(1, 2));
  CHECK(f[0].norm() == 0.0);
  CHECK(f[1].norm() == 0.0);
  auto h = christoffel_at(SurfaceModel::hyperbolic(1.0), Vec2(0, 1));
  CHECK(h[0](0, 1) == doctest::Approx(-1.0));
  CHECK(h[0](1, 0) == doctest::Approx(-1.0));
  CHECK(h[1](0, 0) == doctest::Approx(1.0));
  CHECK(h[1](1, 1) == doctest::Approx(-1.0));
  CHECK(h[0](0, 0) == 0.0);
  CHECK(h[0](1, 1) == 0.0);
  CHECK(h[1](0, 1) == 0.0);

  std::mt19937_64 rng(11);
  for (const auto& m : testsupport::all_models()) {
    double worst = 0, asym = 0;
    for (int i = 0; i < 200; ++i) {
      Vec2 p = testsupport::random_point(m, rng);
      auto G = christoffel_at(m, p), O = christoffel_oracle(m, p);
      for (int k = 0; k < 2; ++k) {
        worst = std::max(worst, (G[k] - O[k]).cwiseAbs().maxCoeff());
        asym = std::max(asym, std::abs(G[k](0, 1) - G[k](1, 0)));
      }
    }
    CHECK_MESSAGE(worst < 1e-6, m.name());
    CHECK(asym == 0.0);
  }
}

TEST_CASE("curvature_at: constant models and Brioschi oracle") {
  std::mt19937_64 rng(12);
  CHECK(curvature_at(SurfaceModel::flat(), Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)) == 0.0);
  for (double c : {0.5, 1.0, 2.0}) {
    auto m = SurfaceModel::hyperbolic(c);
    for (int i = 0; i < 50; ++i) {
      Vec2 p = testsupport::random_point(m, rng);
      Vec2 u = testsupport::random_vec(rng), w = testsupport::random_vec(rng);
      CHECK(curvature_at(m, p, u, w) == doctest::Approx(-c * c).epsilon(1e-12));
    }
  }
  for (const auto& m : testsupport::all_models()) {
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec2 p = testsupport::random_point(m, rng);
      Vec2 u = testsupport::random_vec(rng), w = testsupport::random_vec(rng);
      worst = std::max(worst, std::abs(curvature_at(m, p, u, w) - brioschi_oracle(m, p)));
    }
    CHECK_MESSAGE(worst < 1e-4, m.name() << " worst " << worst);
  }
  CHECK_THROWS_AS(curvature_at(SurfaceModel::flat(), Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)),
                  InvalidArgument);
  CHECK_THROWS_AS(curvature_at(SurfaceModel::flat(), Vec2(0, 0), Vec2(0, 0), Vec2(1, 0)),
                  InvalidArgument);
}

TEST_CASE("pinching of the perturbed model") {
  auto m = SurfaceModel::perturbed(1.0, 0.1);
  auto [lo, hi] = m.curvature_bounds();
  CHECK(lo == doctest::Approx(-1.21));
  CHECK(hi == doctest::Approx(-0.81));
  std::mt19937_64 rng(13);
  double kmin = 1e9, kmax = -1e9;
  std::uniform_real_distribution<double> ly(-6.0, 6.0), ux(-5, 5);
  for (int i = 0; i < 10000; ++i) {
    Vec2 p(ux(rng), std::exp(ly(rng)));
    double K = curvature_at(m, p, Vec2(1, 0), Vec2(0.3, 1));
    kmin = std::min(kmin, K);
    kmax = std::max(kmax, K);
  }
  CHECK(kmin >= lo);
  CHECK(kmax <= hi);
  CHECK(kmax - kmin > 0.1);  // genuinely non-constant
  CHECK_THROWS_AS(SurfaceModel::perturbed(1.0, 0.1, {{1, 2.0, 0.0}}), InvalidArgument);
}

TEST_CASE("curvature_derivative_norm") {
  std::mt19937_64 rng(14);
  CHECK(curvature_derivative_norm(SurfaceModel::flat(), Vec2(1, 1)) == 0.0);
  for (double c : {1.0, 2.0}) {
    auto m = SurfaceModel::hyperbolic(c);
    for (int i = 0; i < 20; ++i)
      CHECK(curvature_derivative_norm(m, testsupport::random_point(m, rng)) < 1e-6);
  }
  auto m = SurfaceModel::perturbed(1.0, 0.1);
  double worst = 0, biggest = 0;
  for (int i = 0; i < 200; ++i) {
    Vec2 p = testsupport::random_point(m, rng);
    auto K = [&](Vec2 q) { return curvature_at(m, q, Vec2(1, 0), Vec2(0, 1)); };
    Vec2 grad(d_dx(K, p, 0, 1e-4 * p.y()), d_dx(K, p, 1, 1e-4 * p.y()));
    double oracle = 2.0 * std::sqrt(grad.dot(metric_at(m, p).inverse() * grad));
    double val = curvature_derivative_norm(m, p);
    worst = std::max(worst, std::abs(val - oracle));
    biggest = std::max(biggest, val);
    CHECK(std::isfinite(curvature_tensor_norm(m, p)));
  }
  CHECK(worst < 1e-4);
  CHECK(biggest > 0.0);
}

TEST_CASE("exp_map: closed forms, Gauss lemma, derivative bound") {
  auto flat = SurfaceModel::flat();
  auto r0 = exp_map(flat, Vec2(1, 2), Vec2(0.5, -1), 3.0, Vec2(0.3, 0.7));
  CHECK((r0.point - Vec2(2.5, -1)).norm() < 1e-12);
  CHECK(r0.dexp_w->norm() == doctest::Approx(Vec2(0.3, 0.7).norm()));

  auto h = SurfaceModel::hyperbolic(1.0);
  auto r = exp_map(h, Vec2(0, 1), Vec2(0, 1), 1.0);
  CHECK(std::abs(r.point.x()) < 1e-12);
  CHECK(r.point.y() == doctest::Approx(std::exp(1.0)).epsilon(1e-10));

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> ut(-0.5, 0.5);
  for (const auto& m : testsupport::all_models()) {
    double gauss = 0, bound = 0, fd = 0;
    for (int i = 0; i < 100; ++i) {
      auto s = testsupport::random_state(m, rng);
      double t = ut(rng);
      if (std::abs(t) < 0.05) t = 0.25;
      // Gauss lemma: d(exp)_{tv} v has the length of v.
      double sc = 0.5 + std::abs(testsupport::random_vec(rng).x());
      Vec2 v = sc * s.dir;
      auto rg = exp_map(m, s.base, v, t, v);
      gauss = std::max(gauss, std::abs(g_norm(m, rg.point, *rg.dexp_w) - g_norm(m, s.base, v)));
      // Unit v, unit w.
      Vec2 w = testsupport::random_vec(rng);
      w /= g_norm(m, s.base, w);
      auto rw = exp_map(m, s.base, s.dir, t, w);
      bound = std::max(bound, g_norm(m, rw.point, *rw.dexp_w));
      // Derivative oracle: finite difference of exp_x(t(v + delta w)).
      double d = 1e-5;
      Vec2 pp = exp_map(m, s.base, s.dir + d * w / t, t).point;
      Vec2 pm = exp_map(m, s.base, s.dir - d * w / t, t).point;
      Vec2 num = (pp - pm) / (2 * d);
      fd = std::max(fd, g_norm(m, rw.point, num - *rw.dexp_w));
    }
    CHECK_MESSAGE(gauss < 1e-6, m.name());
    CHECK(bound <= 2.5);
    CHECK_MESSAGE(fd < 1e-5, m.name() << " fd " << fd);
  }
  CHECK_THROWS_AS(exp_map(h, Vec2(0, 1), Vec2(0, 0), 1.0), InvalidArgument);
}
