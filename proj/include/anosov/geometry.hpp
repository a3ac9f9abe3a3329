#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anosov/common.hpp"

namespace anosov {

enum class ModelKind { Flat, HyperbolicConstant, ModularSurface, PerturbedHyperbolic };

// One term a*cos(2*pi*n*s/P + phase) of the log-periodic perturbation profile.
struct BumpMode {
  int n = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

// Conformal factor psi and its partial derivatives up to third order,
// for metrics of the form g = exp(2 psi) (dx^2 + dy^2).
struct ConformalJet {
  double psi = 0, px = 0, py = 0;
  double pxx = 0, pxy = 0, pyy = 0;
  double pxxx = 0, pxxy = 0, pxyy = 0, pyyy = 0;
};

enum class ChartKind { Plane, UpperHalfPlane };

// A surface model given in a single chart by a conformal metric.
//
// HyperbolicConstant(c): psi = -log(c y) on the upper half plane, K = -c^2.
// ModularSurface: the c = 1 half-plane metric with the PSL(2,Z) identification.
// PerturbedHyperbolic(c, eps, f): psi = -log(c y) + eps f(log y) with f a finite
// cosine series of period P in s = log y.  The model is invariant under
// x-translations and under z -> exp(P) z, so it is homogeneous enough for
// long orbits while having non-constant curvature.
class SurfaceModel {
 public:
  static SurfaceModel flat();
  static SurfaceModel hyperbolic(double c);
  static SurfaceModel modular();
  static SurfaceModel perturbed(double c, double eps, std::vector<BumpMode> modes = default_modes(),
                                double period = 2.0);
  static std::vector<BumpMode> default_modes();

  ModelKind kind() const { return kind_; }
  ChartKind chart() const { return chart_; }
  double c() const { return c_; }
  double eps() const { return eps_; }
  double period() const { return period_; }
  const std::vector<BumpMode>& modes() const { return modes_; }

  // Declared pinching interval (lower, upper) = (-b^2, -a^2).
  std::pair<double, double> curvature_bounds() const { return bounds_; }
  // Curvature scale b with K >= -b^2, the constant c of the certificates.
  double curvature_scale() const;
  bool hyperbolic_flow() const { return kind_ != ModelKind::Flat; }
  bool finite_volume() const { return kind_ == ModelKind::ModularSurface; }

  std::string name() const;

  bool valid(const Vec2& p) const;
  void require_valid(const Vec2& p) const;

  ConformalJet jet(const Vec2& p) const;
  // Log-periodic profile f and derivatives in s; zero for unperturbed models.
  std::array<double, 4> profile(double s) const;
  // Certified lower bound for min f over one period (zero when unperturbed).
  double profile_min() const { return profile_min_; }

  bool operator==(const SurfaceModel& o) const;

 private:
  ModelKind kind_ = ModelKind::Flat;
  ChartKind chart_ = ChartKind::Plane;
  double c_ = 1.0;
  double eps_ = 0.0;
  double period_ = 2.0;
  std::vector<BumpMode> modes_;
  std::pair<double, double> bounds_{0.0, 0.0};
  double profile_min_ = 0.0;
};

// Gamma[k](i, j) = Gamma^k_ij in chart coordinates.
using Christoffel = std::array<Mat2, 2>;

Mat2 metric_at(const SurfaceModel& m, const Vec2& p);
Christoffel christoffel_at(const SurfaceModel& m, const Vec2& p);

// Gaussian curvature at p.
double gaussian_curvature(const SurfaceModel& m, const Vec2& p);
// Chart gradient (dK/dx, dK/dy).
Vec2 curvature_gradient(const SurfaceModel& m, const Vec2& p);

// Sectional curvature of the plane spanned by u, w. Throws InvalidArgument
// when the plane is degenerate.
double curvature_at(const SurfaceModel& m, const Vec2& p, const Vec2& u, const Vec2& w);

// R(X, Y) Z with the convention <R(X, Y) X, Y> = K |X ^ Y|^2.
Vec2 riemann_apply(const SurfaceModel& m, const Vec2& p, const Vec2& X, const Vec2& Y,
                   const Vec2& Z);
// (nabla_A R)(X, Y) Z.
Vec2 riemann_derivative_apply(const SurfaceModel& m, const Vec2& p, const Vec2& A,
                              const Vec2& X, const Vec2& Y, const Vec2& Z);

// Frobenius norms of R and nabla R in an orthonormal frame: 2|K| and 2|dK|_g.
double curvature_tensor_norm(const SurfaceModel& m, const Vec2& p);
double curvature_derivative_norm(const SurfaceModel& m, const Vec2& p);

double g_inner(const SurfaceModel& m, const Vec2& p, const Vec2& a, const Vec2& b);
double g_norm(const SurfaceModel& m, const Vec2& p, const Vec2& a);

struct ExpResult {
  Vec2 point;
  Vec2 velocity;                 // d/ds exp_x(s v) at s = t
  std::optional<Vec2> dexp_w;    // d(exp_x)_{tv} w
};

// exp_x(t v). With w given, also returns d(exp_x)_{tv} w, split into the
// Gauss-lemma part along v and a Jacobi field with J(0) = 0 across v.
ExpResult exp_map(const SurfaceModel& m, const Vec2& x, const Vec2& v, double t,
                  std::optional<Vec2> w = std::nullopt, double step = 1e-3);

}  // namespace anosov
