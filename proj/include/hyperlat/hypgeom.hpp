#pragma once

// Hyperbolic plane H2 (upper half-plane) and hyperbolic space H3 (upper
// half-space): Moebius actions, distances, Cartan radii and ball volumes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "hyperlat/error.hpp"
#include "hyperlat/matrix.hpp"

namespace hyperlat {

/// rho = 1/2 for SL2(R) acting on H2, rho = 1 for SL2(C) acting on H3.
class RhoParam {
 public:
  static RhoParam real() { return RhoParam(0.5); }
  static RhoParam complex() { return RhoParam(1.0); }

  static RhoParam from_value(double v) {
    if (v == 0.5) return real();
    if (v == 1.0) return complex();
    throw DomainError("rho must be 1/2 or 1, got " + std::to_string(v));
  }

  double value() const { return value_; }
  /// Dimension 2 rho + 1 of the symmetric space.
  int dim() const { return value_ == 0.5 ? 2 : 3; }
  bool is_real() const { return value_ == 0.5; }

  friend bool operator==(RhoParam, RhoParam) = default;

 private:
  explicit RhoParam(double v) : value_(v) {}
  double value_;
};

enum class Model { H2, H3 };

/// H2: z = x (imaginary part ignored), height = y.  H3: z complex, height = t.
struct HypPoint {
  Model model = Model::H2;
  cplx z{0.0, 0.0};
  double height = 1.0;

  static HypPoint h2(double x, double y) {
    if (!(y > 0)) throw DomainError("H2 point needs positive imaginary part");
    return {Model::H2, cplx(x, 0.0), y};
  }
  static HypPoint h3(cplx z, double t) {
    if (!(t > 0)) throw DomainError("H3 point needs positive height");
    return {Model::H3, z, t};
  }
  /// The fixed point of the maximal compact: i in H2, j in H3.
  static HypPoint base(Model m) { return {m, cplx(0.0, 0.0), 1.0}; }

  double x() const { return z.real(); }
};

inline constexpr double kUnimodularTol = 1e-9;

namespace detail {

/// |det - 1| <= 1e-9 max(1, |M|_F^2): entries of lattice elements at large
/// radius carry rounding errors that scale with the entries themselves.
template <class T>
void require_unimodular(const Mat2<T>& M, const char* who) {
  if (std::abs(M.det() - T(1)) > kUnimodularTol * std::max(1.0, frobenius2(M))) {
    throw DomainError(std::string(who) + ": matrix is not unimodular (|det - 1| > 1e-9)");
  }
}

inline HypPoint checked_point(Model m, cplx z, double h, const char* who) {
  if (!(h > 0) || !std::isfinite(h)) {
    throw DomainError(std::string(who) + ": image point has non-positive height");
  }
  return {m, z, h};
}

}  // namespace detail

/// Moebius action of SL2(C) on H3 via P -> (aP + b)(cP + d)^{-1}.
inline HypPoint act(const CplxMat& M, const HypPoint& p) {
  detail::require_unimodular(M, "act");
  if (p.model == Model::H2) {
    const double im = std::abs(M.a.imag()) + std::abs(M.b.imag()) + std::abs(M.c.imag()) +
                      std::abs(M.d.imag());
    if (im > 0) throw DomainError("act: complex matrix cannot act on H2");
    const RealMat R{M.a.real(), M.b.real(), M.c.real(), M.d.real()};
    const cplx z(p.x(), p.height);
    const cplx w = (R.a * z + R.b) / (R.c * z + R.d);
    return detail::checked_point(Model::H2, cplx(w.real(), 0.0), w.imag(), "act");
  }
  const cplx cz_d = M.c * p.z + M.d;
  const double t2 = p.height * p.height;
  const double den = std::norm(cz_d) + std::norm(M.c) * t2;
  const cplx num = (M.a * p.z + M.b) * std::conj(cz_d) + M.a * std::conj(M.c) * t2;
  return detail::checked_point(Model::H3, num / den, p.height / den, "act");
}

inline HypPoint act(const RealMat& M, const HypPoint& p) {
  if (p.model == Model::H3) return act(to_complex(M), p);
  detail::require_unimodular(M, "act");
  const double x = p.x(), y = p.height;
  const double cx_d = M.c * x + M.d;
  const double den = cx_d * cx_d + M.c * M.c * y * y;
  const double re = ((M.a * x + M.b) * cx_d + M.a * M.c * y * y) / den;
  return detail::checked_point(Model::H2, cplx(re, 0.0), y / den, "act");
}

/// Hyperbolic distance, evaluated as 2 asinh(sqrt((cosh d - 1)/2)) for accuracy
/// at short range.
inline double dist(const HypPoint& p, const HypPoint& q) {
  if (p.model != q.model) throw DomainError("dist: points live in different models");
  double num;
  if (p.model == Model::H2) {
    const double dx = p.x() - q.x(), dy = p.height - q.height;
    num = dx * dx + dy * dy;
  } else {
    const double dt = p.height - q.height;
    num = std::norm(p.z - q.z) + dt * dt;
  }
  const double half_cosh_minus_one = num / (4.0 * p.height * q.height);
  return 2.0 * std::asinh(std::sqrt(half_cosh_minus_one));
}

/// Radial Cartan coordinate: arccosh(|M|_F^2 / 2).
///
/// Uses |M|_F^2 = |a - conj d|^2 + |b + conj c|^2 + 2 Re det(M), which is
/// algebraically identical and keeps precision near t = 0.
template <class T>
double cartan_radius(const Mat2<T>& M) {
  detail::require_unimodular(M, "cartan_radius");
  const double fro2 = frobenius2(M);
  if (fro2 < 2.0 - 1e-6) throw DomainError("cartan_radius: |M|_F^2 < 2 is impossible for det 1");
  double cosh_minus_one;
  if constexpr (std::is_same_v<T, double>) {
    cosh_minus_one = (abs2(M.a - M.d) + abs2(M.b + M.c)) / 2.0 + (M.det() - 1.0);
  } else {
    cosh_minus_one = (std::norm(M.a - std::conj(M.d)) + std::norm(M.b + std::conj(M.c))) / 2.0 +
                     (M.det().real() - 1.0);
  }
  if (cosh_minus_one <= 0) return 0.0;
  return 2.0 * std::asinh(std::sqrt(cosh_minus_one / 2.0));
}

template <class T>
double cartan_radius(const Mat2<T>& M, RhoParam rho) {
  if constexpr (std::is_same_v<T, cplx>) {
    if (rho.is_real()) {
      const double im = std::abs(M.a.imag()) + std::abs(M.b.imag()) + std::abs(M.c.imag()) +
                        std::abs(M.d.imag());
      if (im > 0) throw DomainError("cartan_radius: complex matrix passed with rho = 1/2");
    }
  }
  return cartan_radius(M);
}

/// Haar volume of the Cartan ball of radius R with density (sinh t)^{2 rho}
/// on [0, R] and normalisation constant 1.
inline double ball_volume(RhoParam rho, double R) {
  if (!(R >= 0)) throw DomainError("ball_volume: R must be >= 0");
  if (rho.is_real()) {
    const double s = std::sinh(R / 2);
    return 2.0 * s * s;  // cosh R - 1
  }
  // (sinh R cosh R - R)/2 = (sinh 2R - 2R)/4
  const double x = 2.0 * R;
  if (x < 0.5) {
    double term = x * x * x / 6.0, sum = 0.0;
    for (int k = 1; k < 30 && term > 1e-300; ++k) {
      sum += term;
      term *= x * x / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
    return sum / 4.0;
  }
  return (std::sinh(x) - x) / 4.0;
}

}  // namespace hyperlat
