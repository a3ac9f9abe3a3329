#include "anosov/modular.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace anosov {

namespace {

Mat2 T_pow(double n) {
  Mat2 t;
  t << 1, n, 0, 1;
  return t;
}

Mat2 S_mat() {
  Mat2 s;
  s << 0, -1, 1, 0;
  return s;
}

}  // namespace

Vec2 mobius_apply(const Mat2& g, const Vec2& z) {
  std::complex<double> w(z.x(), z.y());
  std::complex<double> r = (g(0, 0) * w + g(0, 1)) / (g(1, 0) * w + g(1, 1));
  return Vec2(r.real(), r.imag());
}

double mobius_angle_shift(const Mat2& g, const Vec2& z) {
  std::complex<double> den(g(1, 0) * z.x() + g(1, 1), g(1, 0) * z.y());
  return -2.0 * std::arg(den);
}

bool in_fundamental_domain(const Vec2& z, double tol) {
  return std::abs(z.x()) <= 0.5 + tol && z.squaredNorm() >= 1.0 - tol && z.y() > 0;
}

Reduction reduce_to_fundamental_domain(const Vec2& z0, int cap) {
  if (!(z0.y() > 0) || !std::isfinite(z0.x()) || !std::isfinite(z0.y()))
    throw DomainError("reduction needs a point of the upper half plane");
  Reduction r{z0, Mat2::Identity(), 0};
  for (;;) {
    if (r.iterations >= cap) {
      std::ostringstream os;
      os << "fundamental-domain reduction exceeded " << cap << " iterations at (" << z0.x()
         << ", " << z0.y() << ")";
      throw NumericalError(os.str());
    }
    ++r.iterations;
    bool changed = false;
    double n = std::floor(r.z.x() + 0.5);
    if (n != 0.0) {
      Mat2 t = T_pow(-n);
      r.z = Vec2(r.z.x() - n, r.z.y());
      r.gamma = t * r.gamma;
      changed = true;
    }
    double rr = r.z.squaredNorm();
    if (rr < 1.0 || (rr == 1.0 && r.z.x() > 0.0)) {
      r.z = Vec2(-r.z.x() / rr, r.z.y() / rr);
      r.gamma = S_mat() * r.gamma;
      changed = true;
    }
    if (!changed) break;
  }
  return r;
}

UnitTangentState mobius_apply_state(const SurfaceModel& m, const Mat2& g,
                                    const UnitTangentState& s) {
  Vec2 z = mobius_apply(g, s.base);
  double ang = state_angle(s) + mobius_angle_shift(g, s.base);
  return make_state(m, z, ang);
}

UnitTangentState reduce_state(const SurfaceModel& m, const UnitTangentState& s) {
  Reduction r = reduce_to_fundamental_domain(s.base);
  if (r.iterations == 1) return s;
  UnitTangentState out = mobius_apply_state(m, r.gamma, s);
  out.base = r.z;
  return out;
}

const std::vector<Mat2>& modular_neighbor_words() {
  static const std::vector<Mat2> words = [] {
    std::vector<Mat2> gens{S_mat(), T_pow(1), T_pow(-1)};
    std::vector<Mat2> out{Mat2::Identity()};
    std::vector<Mat2> frontier{Mat2::Identity()};
    for (int len = 1; len <= 4; ++len) {
      std::vector<Mat2> next;
      for (const Mat2& w : frontier) {
        for (const Mat2& g : gens) {
          Mat2 c = g * w;
          bool seen = false;
          for (const Mat2& o : out)
            if (same_projective(o, c, 1e-12)) {
              seen = true;
              break;
            }
          if (!seen) {
            out.push_back(c);
            next.push_back(c);
          }
        }
      }
      frontier = std::move(next);
    }
    return out;
  }();
  return words;
}

ModularState modular_from_unit(const UnitTangentState& s) {
  double x = s.base.x(), y = s.base.y();
  if (!(y > 0)) throw DomainError("modular state needs a half-plane point");
  double sy = std::sqrt(y);
  Mat2 A;
  A << sy, x / sy, 0, 1 / sy;
  double alpha = 0.5 * (state_angle(s) - 0.5 * kPi);
  Mat2 k;
  k << std::cos(alpha), std::sin(alpha), -std::sin(alpha), std::cos(alpha);
  return {A * k, in_fundamental_domain(s.base)};
}

Vec2 modular_base(const ModularState& s) { return mobius_apply(s.matrix, Vec2(0, 1)); }

UnitTangentState modular_to_unit(const ModularState& s) {
  Vec2 z = modular_base(s);
  double ang = 0.5 * kPi + mobius_angle_shift(s.matrix, Vec2(0, 1));
  return {z, Vec2(z.y() * std::cos(ang), z.y() * std::sin(ang))};
}

ModularState modular_flow(const ModularState& s, double t, bool reduce, double rate) {
  if (std::abs(s.matrix.determinant() - 1.0) > 1e-8)
    throw InvalidArgument("modular_flow: matrix determinant differs from 1");
  if (t == 0.0) return s;
  Mat2 a = Mat2::Zero();
  a(0, 0) = std::exp(0.5 * rate * t);
  a(1, 1) = std::exp(-0.5 * rate * t);
  ModularState out{s.matrix * a, false};
  out.matrix /= std::sqrt(out.matrix.determinant());
  if (reduce) {
    Reduction r = reduce_to_fundamental_domain(modular_base(out));
    out.matrix = r.gamma * out.matrix;
    out.reduced = true;
  }
  return out;
}

bool same_projective(const Mat2& a, const Mat2& b, double tol) {
  return (a - b).cwiseAbs().maxCoeff() <= tol || (a + b).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace anosov
