#pragma once

// The quaternion algebra (u, v / K) over K = Q(sqrt D), its order
// O = Z[w] + i Z[w] + j Z[w] + ij Z[w], and the real matrix embeddings
// i -> diag(sqrt u, -sqrt u), j -> [[0, 1], [v, 0]].

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hyperlat/error.hpp"
#include "hyperlat/matrix.hpp"
#include "hyperlat/numberfield.hpp"

namespace hyperlat {

struct AlgebraDesc {
  FieldDesc F;
  Int u = 3;
  Int v = 5;
  /// rho parameter per archimedean place: 1/2 for SL2(R), 1 for SL2(C).
  std::vector<double> places_split{0.5, 0.5};
  /// Non-splitness is taken on authority, not verified; recorded for manifests.
  bool division_asserted = true;
};

/// Validated algebra description. A real quadratic field has two real places
/// and no complex ones, so the only admissible place list is [1/2, 1/2].
inline AlgebraDesc make_algebra(const FieldDesc& F, std::int64_t u, std::int64_t v,
                                std::vector<double> places = {0.5, 0.5}) {
  if (u == 0 || v == 0) throw ConfigError("algebra.u and algebra.v must be nonzero");
  if (places.size() != 2) {
    throw ConfigError("algebra.places must list both archimedean places of a real quadratic field");
  }
  for (double rho : places) {
    if (rho != 0.5) {
      throw ConfigError(
          "algebra.places: a real quadratic field has only real places, so every split place has "
          "rho = 1/2");
    }
  }
  if (u < 0) {
    throw ConfigError("algebra.u must be positive: the matrix model i -> diag(sqrt u, -sqrt u) "
                      "needs a real square root");
  }
  AlgebraDesc A;
  A.F = F;
  A.u = u;
  A.v = v;
  A.places_split = std::move(places);
  return A;
}

/// The shipped preset: K = Q(sqrt 17), (3, 5 / K), both places split.
inline AlgebraDesc preset_q17() { return make_algebra(make_field(17), 3, 5); }

/// x0 + x1 i + x2 j + x3 ij.
struct QuatElt {
  QuadInt x0, x1, x2, x3;

  friend bool operator==(const QuatElt&, const QuatElt&) = default;

  static QuatElt one() { return {QuadInt(1), {}, {}, {}}; }
  static QuatElt basis_i() { return {{}, QuadInt(1), {}, {}}; }
  static QuatElt basis_j() { return {{}, {}, QuadInt(1), {}}; }
  static QuatElt basis_ij() { return {{}, {}, {}, QuadInt(1)}; }
};

/// Integer coordinates in the basis (1, w, i, iw, j, jw, ij, ijw).
using Coords = std::array<Int, 8>;

inline Coords to_coords(const QuatElt& x) {
  return {x.x0.a, x.x0.b, x.x1.a, x.x1.b, x.x2.a, x.x2.b, x.x3.a, x.x3.b};
}

inline QuatElt from_coords(const Coords& c) {
  return {{c[0], c[1]}, {c[2], c[3]}, {c[4], c[5]}, {c[6], c[7]}};
}

/// Basis element e_k of the rank-8 module, k in [0, 8).
inline QuatElt basis_element(int k) {
  Coords c{};
  c[static_cast<std::size_t>(k)] = 1;
  return from_coords(c);
}

inline QuatElt quat_add(const QuatElt& x, const QuatElt& y) {
  return {qi_add(x.x0, y.x0), qi_add(x.x1, y.x1), qi_add(x.x2, y.x2), qi_add(x.x3, y.x3)};
}

inline QuatElt quat_sub(const QuatElt& x, const QuatElt& y) {
  return {qi_sub(x.x0, y.x0), qi_sub(x.x1, y.x1), qi_sub(x.x2, y.x2), qi_sub(x.x3, y.x3)};
}

inline QuatElt quat_neg(const QuatElt& x) {
  return {qi_neg(x.x0), qi_neg(x.x1), qi_neg(x.x2), qi_neg(x.x3)};
}

/// Standard involution x0 - x1 i - x2 j - x3 ij; for units this is the inverse.
inline QuatElt quat_conj(const QuatElt& x) {
  return {x.x0, qi_neg(x.x1), qi_neg(x.x2), qi_neg(x.x3)};
}

inline QuatElt quat_mul(const QuatElt& x, const QuatElt& y, const AlgebraDesc& A) {
  const FieldDesc& F = A.F;
  auto m = [&F](const QuadInt& p, const QuadInt& q) { return qi_mul(p, q, F); };
  const Int uv = checked::mul(A.u, A.v);

  QuatElt r;
  r.x0 = qi_add(qi_add(m(x.x0, y.x0), qi_scale(m(x.x1, y.x1), A.u)),
                qi_sub(qi_scale(m(x.x2, y.x2), A.v), qi_scale(m(x.x3, y.x3), uv)));
  r.x1 = qi_add(qi_add(m(x.x0, y.x1), m(x.x1, y.x0)),
                qi_scale(qi_sub(m(x.x3, y.x2), m(x.x2, y.x3)), A.v));
  r.x2 = qi_add(qi_add(m(x.x0, y.x2), m(x.x2, y.x0)),
                qi_scale(qi_sub(m(x.x1, y.x3), m(x.x3, y.x1)), A.u));
  r.x3 = qi_add(qi_add(m(x.x0, y.x3), m(x.x3, y.x0)), qi_sub(m(x.x1, y.x2), m(x.x2, y.x1)));
  return r;
}

/// n(x) = x0^2 - u x1^2 - v x2^2 + uv x3^2.
inline QuadInt quat_norm(const QuatElt& x, const AlgebraDesc& A) {
  const FieldDesc& F = A.F;
  const QuadInt s0 = qi_mul(x.x0, x.x0, F);
  const QuadInt s1 = qi_scale(qi_mul(x.x1, x.x1, F), A.u);
  const QuadInt s2 = qi_scale(qi_mul(x.x2, x.x2, F), A.v);
  const QuadInt s3 = qi_scale(qi_mul(x.x3, x.x3, F), checked::mul(A.u, A.v));
  return qi_add(qi_sub(qi_sub(s0, s1), s2), s3);
}

/// tr(x) = 2 x0.
inline QuadInt quat_trace(const QuatElt& x) { return qi_scale(x.x0, 2); }

/// sigma_p(x0) I + sigma_p(x1) M_i + sigma_p(x2) M_j + sigma_p(x3) M_i M_j.
inline RealMat embed_matrix(const QuatElt& x, int place, const AlgebraDesc& A) {
  if (place != 1 && place != 2) throw DomainError("embed_matrix: place must be 1 or 2");
  if (A.places_split.at(static_cast<std::size_t>(place - 1)) != 0.5) {
    throw DomainError("embed_matrix: place " + std::to_string(place) + " is not a split real place");
  }
  // Long double keeps the cancellation in a +- b sqrt(u) under control.
  auto emb = [&](const QuadInt& q) {
    const QuadInt y = place == 1 ? q : qi_conj(q);
    return static_cast<long double>(y.a) +
           static_cast<long double>(y.b) * static_cast<long double>(A.F.omega_num);
  };
  const long double su = std::sqrt(static_cast<long double>(A.u));
  const long double v = static_cast<long double>(A.v);
  const long double al = emb(x.x0), be = emb(x.x1), ga = emb(x.x2), de = emb(x.x3);
  return {static_cast<double>(al + be * su), static_cast<double>(ga + de * su),
          static_cast<double>(v * (ga - de * su)), static_cast<double>(al - be * su)};
}

/// True iff every integer coordinate of x - 1 is divisible by q.
inline bool congruence_test(const QuatElt& x, Int q) {
  if (q < 1) throw DomainError("congruence_test: q must be >= 1");
  Coords c = to_coords(x);
  c[0] = checked::sub(c[0], 1);
  for (Int v : c) {
    if (v % q != 0) return false;
  }
  return true;
}

inline std::string to_string(const QuatElt& x) {
  return "(" + to_string(x.x0) + ") + (" + to_string(x.x1) + ")i + (" + to_string(x.x2) +
         ")j + (" + to_string(x.x3) + ")ij";
}

}  // namespace hyperlat
