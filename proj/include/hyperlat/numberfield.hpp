#pragma once

// Exact arithmetic in the ring of integers Z[w] of a real quadratic field
// Q(sqrt D), D = 1 mod 4, w = (1 + sqrt D)/2.

#include <cmath>
#include <cstdint>
#include <string>

#include "hyperlat/error.hpp"

namespace hyperlat {

using Int = __int128;

namespace checked {

inline Int add(Int x, Int y) {
  Int r;
  if (__builtin_add_overflow(x, y, &r)) throw OverflowError("int128 addition overflow");
  return r;
}

inline Int sub(Int x, Int y) {
  Int r;
  if (__builtin_sub_overflow(x, y, &r)) throw OverflowError("int128 subtraction overflow");
  return r;
}

inline Int mul(Int x, Int y) {
  Int r;
  if (__builtin_mul_overflow(x, y, &r)) throw OverflowError("int128 multiplication overflow");
  return r;
}

inline Int neg(Int x) { return sub(0, x); }

}  // namespace checked

inline std::string to_string(Int v) {
  if (v == 0) return "0";
  bool negative = v < 0;
  // Work on the negative range so that INT128_MIN is representable.
  Int n = negative ? v : -v;
  std::string digits;
  while (n != 0) {
    int d = static_cast<int>(-(n % 10));
    digits.push_back(static_cast<char>('0' + d));
    n /= 10;
  }
  if (negative) digits.push_back('-');
  return {digits.rbegin(), digits.rend()};
}

inline bool is_squarefree(std::int64_t n) {
  if (n <= 0) return false;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    if (n % (p * p) == 0) return false;
  }
  return true;
}

struct FieldDesc {
  std::int64_t D = 17;
  double omega_num = 0.0;   // (1 + sqrt D)/2
  double omega_conj = 0.0;  // (1 - sqrt D)/2

  /// (D - 1)/4, the constant term in w^2 = w + (D - 1)/4.
  Int omega_sq_const() const { return static_cast<Int>((D - 1) / 4); }
};

/// Validates D and fills in the two real embeddings of w.
inline FieldDesc make_field(std::int64_t D) {
  if (D < 5) throw ConfigError("field.D must be >= 5, got " + std::to_string(D));
  if (D % 4 != 1) {
    throw ConfigError("field.D = " + std::to_string(D) +
                      " is not 1 mod 4; only rings Z[(1+sqrt D)/2] are supported");
  }
  if (!is_squarefree(D)) throw ConfigError("field.D = " + std::to_string(D) + " is not squarefree");
  FieldDesc f;
  f.D = D;
  const long double s = std::sqrt(static_cast<long double>(D));
  f.omega_num = static_cast<double>((1.0L + s) / 2.0L);
  // Exact in binary floating point: 1 - w has an exponent no larger than w.
  f.omega_conj = 1.0 - f.omega_num;
  return f;
}

/// a + b*w.
struct QuadInt {
  Int a = 0;
  Int b = 0;

  constexpr QuadInt() = default;
  constexpr QuadInt(Int a_, Int b_ = 0) : a(a_), b(b_) {}

  friend constexpr bool operator==(const QuadInt&, const QuadInt&) = default;
  friend constexpr auto operator<=>(const QuadInt&, const QuadInt&) = default;

  bool is_zero() const { return a == 0 && b == 0; }
};

inline QuadInt qi_add(const QuadInt& x, const QuadInt& y) {
  return {checked::add(x.a, y.a), checked::add(x.b, y.b)};
}

inline QuadInt qi_sub(const QuadInt& x, const QuadInt& y) {
  return {checked::sub(x.a, y.a), checked::sub(x.b, y.b)};
}

inline QuadInt qi_neg(const QuadInt& x) { return {checked::neg(x.a), checked::neg(x.b)}; }

inline QuadInt qi_scale(const QuadInt& x, Int k) {
  return {checked::mul(x.a, k), checked::mul(x.b, k)};
}

/// (a + bw)(c + dw) = ac + bd(D-1)/4 + (ad + bc + bd) w.
inline QuadInt qi_mul(const QuadInt& x, const QuadInt& y, const FieldDesc& F) {
  using namespace checked;
  const Int bd = mul(x.b, y.b);
  const Int a = add(mul(x.a, y.a), mul(bd, F.omega_sq_const()));
  const Int b = add(add(mul(x.a, y.b), mul(x.b, y.a)), bd);
  return {a, b};
}

/// Galois conjugation w -> 1 - w.
inline QuadInt qi_conj(const QuadInt& x) {
  return {checked::add(x.a, x.b), checked::neg(x.b)};
}

/// N(a + bw) = a^2 + ab + b^2 (1 - D)/4.
inline Int qi_norm(const QuadInt& x, const FieldDesc& F) {
  using namespace checked;
  const Int bb = mul(x.b, x.b);
  return sub(add(mul(x.a, x.a), mul(x.a, x.b)), mul(bb, F.omega_sq_const()));
}

/// Real embedding at place 1 (w -> (1+sqrt D)/2) or place 2 (w -> (1-sqrt D)/2).
/// Place 2 is evaluated as place 1 of the conjugate, which makes
/// qi_embed(qi_conj(x), 1) == qi_embed(x, 2) bit for bit.
inline double qi_embed(const QuadInt& x, int place, const FieldDesc& F) {
  if (place != 1 && place != 2) throw DomainError("qi_embed: place must be 1 or 2");
  const QuadInt y = place == 1 ? x : qi_conj(x);
  const long double w = static_cast<long double>(F.omega_num);
  return static_cast<double>(static_cast<long double>(y.a) + static_cast<long double>(y.b) * w);
}

inline std::string to_string(const QuadInt& x) {
  return to_string(x.a) + (x.b < 0 ? "-" : "+") + to_string(x.b < 0 ? -x.b : x.b) + "w";
}

}  // namespace hyperlat
