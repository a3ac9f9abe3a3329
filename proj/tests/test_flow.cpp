#include <cmath>
#include <random>
#include <sstream>

#include "anosov/flow.hpp"
#include "anosov/modular.hpp"
#include "anosov/sasaki.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace anosov;

namespace {

double state_gap(const SurfaceModel& m, const UnitTangentState& a, const UnitTangentState& b) {
  double s = m.chart() == ChartKind::Plane ? 1.0 : a.base.y();
  return std::max((a.base - b.base).norm() / s, std::abs(wrap_angle(state_angle(a) - state_angle(b))));
}

}  // namespace

TEST_CASE("flow: closed forms") {
  auto flat = SurfaceModel::flat();
  auto f = flow(flat, make_state(flat, Vec2(0, 0), 0.0), 2.0);
  CHECK((f.state.base - Vec2(2, 0)).norm() < 1e-12);
  CHECK((f.state.dir - Vec2(1, 0)).norm() < 1e-12);

  auto h = SurfaceModel::hyperbolic(1.0);
  auto g = flow(h, UnitTangentState{Vec2(0, 1), Vec2(0, 1)}, 1.0);
  double e = std::exp(1.0);
  CHECK(std::abs(g.state.base.x()) < 1e-12);
  CHECK(g.state.base.y() == doctest::Approx(e).epsilon(1e-10));
  CHECK(std::abs(g.state.dir.x()) < 1e-10);
  CHECK(g.state.dir.y() == doctest::Approx(e).epsilon(1e-10));
  CHECK_THROWS_AS(flow(h, UnitTangentState{Vec2(0, -1), Vec2(0, 1)}, 1.0), DomainError);
}

TEST_CASE("flow: reversibility, composition, unit speed") {
  std::mt19937_64 rng(31);
  for (const auto& m : testsupport::all_models()) {
    double rev = 0, comp = 0, speed = 0;
    for (int i = 0; i < 10; ++i) {
      auto s = testsupport::random_state(m, rng);
      if (m.kind() == ModelKind::ModularSurface) s = reduce_state(m, s);
      auto a = flow(m, s, 1.0).state;
      auto back = flow(m, a, -1.0).state;
      if (m.kind() == ModelKind::ModularSurface)
        rev = std::max(rev, sm_distance_bounds(m, s, back).upper);
      else
        rev = std::max(rev, state_gap(m, s, back));
      auto ab = flow(m, s, 1.7).state;
      auto a_b = flow(m, flow(m, s, 0.6).state, 1.1).state;
      if (m.kind() == ModelKind::ModularSurface)
        comp = std::max(comp, sm_distance_bounds(m, ab, a_b).upper);
      else
        comp = std::max(comp, state_gap(m, ab, a_b));
      speed = std::max(speed, std::abs(g_inner(m, ab.base, ab.dir, ab.dir) - 1.0));
    }
    CHECK_MESSAGE(rev < 1e-6, m.name());
    CHECK_MESSAGE(comp < 1e-6 * (1 + 0.6 + 1.1), m.name());
    CHECK(speed < 1e-8);
  }
}

TEST_CASE("flow: geodesic equation residual") {
  std::mt19937_64 rng(32);
  for (const auto& m : testsupport::all_models()) {
    if (m.kind() == ModelKind::ModularSurface) continue;
    auto s = testsupport::random_state(m, rng);
    double h = 1e-3;
    auto traj = sample_trajectory(m, s, 0.5, h);
    double worst = 0;
    for (size_t i = 2; i + 2 < traj.size(); ++i) {
      const Vec2 &pm = traj[i - 1].state.base, &p0 = traj[i].state.base, &pp = traj[i + 1].state.base;
      Vec2 acc = (pp - 2 * p0 + pm) / (h * h);
      Vec2 vel = traj[i].state.dir;
      auto G = christoffel_at(m, p0);
      Vec2 rhs(-vel.dot(G[0] * vel), -vel.dot(G[1] * vel));
      worst = std::max(worst, (acc - rhs).norm() / (1 + rhs.norm()));
    }
    CHECK_MESSAGE(worst < 1e-5, m.name() << " " << worst);
  }
}

TEST_CASE("jacobi_propagate") {
  auto flat = SurfaceModel::flat();
  auto s0 = make_state(flat, Vec2(1, 1), 0.3);
  auto j = jacobi_propagate(flat, s0, {0.0, 1.0, 0.0}, 3.0);
  CHECK(j.J == doctest::Approx(3.0));
  CHECK(j.Jp == doctest::Approx(1.0));
  for (double c : {1.0, 2.0}) {
    auto h = SurfaceModel::hyperbolic(c);
    auto s = make_state(h, Vec2(0.3, 0.8), 1.0);
    double t = 3.0;
    auto u = jacobi_propagate(h, s, {1.0, c, 0.0}, t);
    CHECK(u.J == doctest::Approx(std::exp(c * t)).epsilon(1e-6));
    CHECK(u.Jp == doctest::Approx(c * std::exp(c * t)).epsilon(1e-6));
    auto st = jacobi_propagate(h, s, {1.0, -c, 0.0}, t);
    CHECK(st.J == doctest::Approx(std::exp(-c * t)).epsilon(1e-6));
    CHECK(st.Jp == doctest::Approx(-c * std::exp(-c * t)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(jacobi_propagate(flat, s0, {0.0, 1.0, 1.0}, 1.0), InvalidArgument);
  // Linearity in the initial data.
  auto pm = SurfaceModel::perturbed(1.0, 0.1);
  auto sp = make_state(pm, Vec2(0, 1.5), 0.2);
  auto a = jacobi_propagate(pm, sp, {1.0, 0.0, 0.0}, 2.0);
  auto b = jacobi_propagate(pm, sp, {0.0, 1.0, 0.0}, 2.0);
  auto ab = jacobi_propagate(pm, sp, {2.0, -3.0, 0.0}, 2.0);
  CHECK(ab.J == doctest::Approx(2 * a.J - 3 * b.J).epsilon(1e-10));
  CHECK(ab.Jp == doctest::Approx(2 * a.Jp - 3 * b.Jp).epsilon(1e-10));
}

TEST_CASE("flow_derivative") {
  auto h = SurfaceModel::hyperbolic(1.0);
  auto s = make_state(h, Vec2(0, 1), 0.4);
  CHECK(flow_derivative(h, s, 0.0).isApprox(Mat3::Identity()));
  auto flat = SurfaceModel::flat();
  Mat3 D = flow_derivative(flat, make_state(flat, Vec2(0, 0), 1.0), 2.5);
  Mat2 expect;
  expect << 1, 2.5, 0, 1;
  CHECK((D.block<2, 2>(1, 1) - expect).norm() < 1e-12);
  CHECK(D(0, 0) == 1.0);
  Mat3 H = flow_derivative(h, s, 1.0);
  Eigen::EigenSolver<Mat2> es(H.block<2, 2>(1, 1));
  double l0 = es.eigenvalues()[0].real(), l1 = es.eigenvalues()[1].real();
  if (l0 < l1) std::swap(l0, l1);
  CHECK(l0 == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
  CHECK(l1 == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));

  std::mt19937_64 rng(33);
  for (const auto& m : testsupport::all_models()) {
    auto st = testsupport::random_state(m, rng);
    if (m.kind() == ModelKind::ModularSurface) st = reduce_state(m, st);
    Mat3 a = flow_derivative(m, st, 0.8);
    Mat3 b = flow_derivative(m, flow(m, st, 0.8).state, 1.3);
    Mat3 ab = flow_derivative(m, st, 2.1);
    CHECK_MESSAGE((b * a - ab).norm() < 1e-5 * ab.norm(), m.name());
  }
}

TEST_CASE("Wronskian and determinant over long times") {
  std::mt19937_64 rng(34);
  for (const auto& m : testsupport::all_models()) {
    IntegratorOptions opts;
    opts.recenter = true;
    auto s = testsupport::random_state(m, rng);
    Orbit o(m, s, opts);
    FactoredJacobi f;
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      advance_factored(o, f, 10.0, 1.0);
      worst = std::max(worst, std::abs(std::exp(f.log_abs_det()) * f.det_sign() - 1.0));
    }
    CHECK_MESSAGE(worst < 1e-6, m.name() << " " << worst);
    CHECK(o.time() == doctest::Approx(100.0));
  }
  // Direct Wronskian of a stable/unstable-like pair on a short window.
  auto pm = SurfaceModel::perturbed(1.0, 0.1);
  auto s = make_state(pm, Vec2(0, 2), 0.7);
  Orbit o(pm, s);
  Mat2 J0;
  J0 << 1.0, 0.3, -0.5, 2.0;
  o.set_jacobi(J0);
  double w0 = J0.determinant(), worst = 0;
  for (int k = 0; k < 20; ++k) {
    o.advance(0.5);
    worst = std::max(worst, std::abs(o.jacobi().determinant() - w0));
  }
  CHECK(worst < 1e-6 * std::abs(w0));
}

TEST_CASE("modular_flow") {
  ModularState id;
  auto same = modular_flow(id, 0.0);
  CHECK(same.matrix == id.matrix);
  CHECK(same.reduced == id.reduced);
  auto d = modular_flow(id, 2 * std::log(2.0), false);
  CHECK(d.matrix(0, 0) == doctest::Approx(2.0));
  CHECK(d.matrix(1, 1) == doctest::Approx(0.5));
  CHECK(std::abs(d.matrix(0, 1)) + std::abs(d.matrix(1, 0)) == 0.0);
  Mat2 bad;
  bad << 2, 0, 0, 2;
  CHECK_THROWS_AS(modular_flow(ModularState{bad, false}, 1.0), InvalidArgument);

  auto m = SurfaceModel::modular();
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> ut(-6, 6);
  for (int i = 0; i < 100; ++i) {
    auto st = reduce_state(m, testsupport::random_state(m, rng));
    auto s = modular_from_unit(st);
    double t = ut(rng);
    auto f = modular_flow(s, t);
    CHECK(f.reduced);
    CHECK(std::abs(f.matrix.determinant() - 1.0) < 1e-10);
    CHECK(in_fundamental_domain(modular_base(f), 1e-12));
    auto back = modular_flow(f, -t);
    CHECK(same_projective(back.matrix, s.matrix, 1e-8));
  }
}

TEST_CASE("modular fast path agrees with the chart integrator") {
  auto m = SurfaceModel::modular();
  std::mt19937_64 rng(36);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    std::uniform_real_distribution<double> ux(-0.45, 0.45), uy(1.0, 2.5), ua(-kPi, kPi);
    auto st = make_state(m, Vec2(ux(rng), uy(rng)), ua(rng));
    auto fast = modular_to_unit(modular_flow(modular_from_unit(st), 5.0));
    auto chart = flow(m, st, 5.0).state;
    worst = std::max(worst, sm_distance_bounds(m, fast, chart).lower);
    CHECK(sm_distance_bounds(m, fast, chart).upper < 1e-4);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("modular reduction") {
  auto r = reduce_to_fundamental_domain(Vec2(0.5, 1.0));
  CHECK(r.z.x() == doctest::Approx(-0.5));
  auto c = reduce_to_fundamental_domain(Vec2(std::cos(1.2), std::sin(1.2)));
  CHECK(c.z.x() < 0);
  auto deep = reduce_to_fundamental_domain(Vec2(0.3141, 1e-4));
  CHECK(in_fundamental_domain(deep.z, 1e-9));
  CHECK(mobius_apply(deep.gamma, Vec2(0.3141, 1e-4)).isApprox(deep.z, 1e-9));
  CHECK_THROWS_AS(reduce_to_fundamental_domain(Vec2(0.3141, 1e-9), 3), NumericalError);
  CHECK(modular_neighbor_words().size() > 10);
}

TEST_CASE("trajectory CSV layout") {
  auto h = SurfaceModel::hyperbolic(1.0);
  auto traj = sample_trajectory(h, make_state(h, Vec2(0, 1), 0.0), 1.0, 0.5);
  CHECK(traj.size() == 3);
  std::ostringstream os;
  write_trajectory_header(os);
  for (const auto& s : traj) write_trajectory_row(os, s);
  std::string text = os.str();
  CHECK(text.rfind("t,x,y,vx,vy,d11,d12,d13,d21,d22,d23,d31,d32,d33\n", 0) == 0);
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 13);
}

TEST_CASE("flow_fast agrees with the Jacobi integrator") {
  std::mt19937_64 rng(37);
  for (const auto& m : testsupport::all_models()) {
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
      auto s = testsupport::random_state(m, rng);
      if (m.kind() == ModelKind::ModularSurface) s = reduce_state(m, s);
      auto a = flow_fast(m, s, 3.0);
      auto b = flow(m, s, 3.0).state;
      worst = std::max(worst, sm_distance_bounds(m, a, b).upper);
    }
    CHECK_MESSAGE(worst < 1e-6, m.name() << " " << worst);
  }
}

TEST_CASE("exp_bound_radius") {
  // Closed form on H(c) for w normal to v: |d exp w| = sinh(c t) / (c t).
  auto root = [](double c) {
    double lo = 0.1, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (std::sinh(c * mid) / (c * mid) > 2.5 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  };
  for (double c : {1.0, 2.0}) {
    auto h = SurfaceModel::hyperbolic(c);
    auto s = make_state(h, Vec2(0.3, 1.7), 0.8);
    double r = exp_bound_radius(h, s, rotate90(s.dir), 2.5, 6.0);
    CHECK(r == doctest::Approx(root(c)).epsilon(1e-4));
  }
  CHECK(root(1.0) == doctest::Approx(2.5527).epsilon(1e-4));

  auto f = SurfaceModel::flat();
  auto sf = make_state(f, Vec2(0, 0), 0.3);
  CHECK(exp_bound_radius(f, sf, Vec2(0.2, 1.0), 2.5, 4.0) == 4.0);
  auto ef = estimate_exp_radius(f, {{sf, Vec2(1, 1)}}, 2.5, 4.0);
  CHECK(ef.capped);

  // Agrees with exp_map on either side of the crossing, in both directions.
  std::mt19937_64 rng(77);
  for (const auto& m : {SurfaceModel::hyperbolic(1.0), SurfaceModel::modular(), SurfaceModel::perturbed(1.0, 0.1)}) {
    for (int i = 0; i < 5; ++i) {
      auto st = testsupport::random_state(m, rng);
      Vec2 w = testsupport::random_vec(rng);
      w /= g_norm(m, st.base, w);
      double r = exp_bound_radius(m, st, w, 2.5, 8.0);
      REQUIRE(r < 8.0);
      double sign = i % 2 ? -1.0 : 1.0;
      double below = 0, above = 0;
      for (double t : {0.99 * r, 1.01 * r}) {
        auto e = exp_map(m, st.base, sign * st.dir, t, w);
        (t < r ? below : above) = g_norm(m, e.point, *e.dexp_w);
      }
      CHECK_MESSAGE(below <= 2.5, m.name());
      // The crossing belongs to one of the two directions.
      auto other = exp_map(m, st.base, -sign * st.dir, 1.01 * r, w);
      CHECK_MESSAGE(std::max(above, g_norm(m, other.point, *other.dexp_w)) > 2.5, m.name());
    }
  }
}
