#pragma once

#include <cmath>
#include <complex>
#include <type_traits>

namespace hyperlat {

using cplx = std::complex<double>;

template <class T>
struct Mat2 {
  T a{}, b{}, c{}, d{};  // [[a, b], [c, d]]

  static Mat2 identity() { return {T(1), T(0), T(0), T(1)}; }

  T det() const { return a * d - b * c; }
  T trace() const { return a + d; }

  /// Inverse of a unimodular matrix (adjugate).
  Mat2 inverse_unimodular() const { return {d, -b, -c, a}; }

  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  Mat2 operator*(T s) const { return {a * s, b * s, c * s, d * s}; }
};

using RealMat = Mat2<double>;
using CplxMat = Mat2<cplx>;

inline double abs2(double x) { return x * x; }
inline double abs2(const cplx& z) { return std::norm(z); }

/// Squared Frobenius norm: sum of squared absolute values of the entries.
template <class T>
double frobenius2(const Mat2<T>& m) {
  return abs2(m.a) + abs2(m.b) + abs2(m.c) + abs2(m.d);
}

/// Frobenius inner product <A, B> = sum conj(A_ij) B_ij (real part).
template <class T>
double frobenius_inner(const Mat2<T>& x, const Mat2<T>& y) {
  if constexpr (std::is_same_v<T, double>) {
    return x.a * y.a + x.b * y.b + x.c * y.c + x.d * y.d;
  } else {
    return std::real(std::conj(x.a) * y.a + std::conj(x.b) * y.b + std::conj(x.c) * y.c +
                     std::conj(x.d) * y.d);
  }
}

inline CplxMat to_complex(const RealMat& m) { return {m.a, m.b, m.c, m.d}; }

/// a_t = diag(e^{t/2}, e^{-t/2}).
inline RealMat diag_flow(double t) { return {std::exp(t / 2), 0.0, 0.0, std::exp(-t / 2)}; }

inline RealMat rotation(double theta) {
  return {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
}

}  // namespace hyperlat
