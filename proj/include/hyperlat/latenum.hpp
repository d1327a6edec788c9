#pragma once

// Enumeration of norm-one units of the order O inside products of Cartan
// balls. Units are integer points of a rank-8 module; their two matrix
// embeddings satisfy |sigma_p(x)|_F^2 = 2 cosh t_p, so every unit with
// t_1 <= R1, t_2 <= R2 lies in an ellipsoid of a positive definite form.
// The form splits into the halves x0 + x1 i and x2 + x3 i; each half is
// walked by a four-dimensional Fincke-Pohst and the halves are joined through
// the norm equation, so the work grows like the number of units rather than
// the volume of the eight-dimensional ellipsoid.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hyperlat/error.hpp"
#include "hyperlat/hypgeom.hpp"
#include "hyperlat/io.hpp"
#include "hyperlat/matrix.hpp"
#include "hyperlat/quaternion.hpp"

namespace hyperlat {

using Mat8 = std::array<std::array<double, 8>, 8>;

/// Gram matrix on the basis (1, w, i, iw, j, jw, ij, ijw).
struct GramForm {
  Mat8 G{};

  double eval(const std::array<double, 8>& c) const {
    double s = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      for (std::size_t l = 0; l < 8; ++l) s += c[k] * G[k][l] * c[l];
    }
    return s;
  }
};

struct IsometryPair {
  RealMat first, second;
};

struct LatticeElement {
  QuatElt q;
  Coords coords{};
  double t1 = 0.0, t2 = 0.0;
  IsometryPair matrices;
};

namespace detail {

/// Cholesky pivots of G; throws if G is not positive definite.
inline std::array<double, 8> cholesky_pivots(const Mat8& G) {
  Mat8 L{};
  std::array<double, 8> piv{};
  for (std::size_t j = 0; j < 8; ++j) {
    double s = G[j][j];
    for (std::size_t k = 0; k < j; ++k) s -= L[j][k] * L[j][k];
    if (!(s > 0)) throw DomainError("Gram matrix is not positive definite (invalid algebra preset)");
    L[j][j] = std::sqrt(s);
    piv[j] = s;
    for (std::size_t i = j + 1; i < 8; ++i) {
      double t = G[i][j];
      for (std::size_t k = 0; k < j; ++k) t -= L[i][k] * L[j][k];
      L[i][j] = t / L[j][j];
    }
  }
  return piv;
}

inline GramForm place_gram(const AlgebraDesc& A, int place) {
  std::array<RealMat, 8> M;
  for (int k = 0; k < 8; ++k) M[static_cast<std::size_t>(k)] = embed_matrix(basis_element(k), place, A);
  GramForm g;
  for (std::size_t k = 0; k < 8; ++k) {
    for (std::size_t l = 0; l < 8; ++l) g.G[k][l] = frobenius_inner(M[k], M[l]);
  }
  return g;
}

}  // namespace detail

/// G[k][l] = sum over both places of <sigma_p(e_k), sigma_p(e_l)>_F.
inline GramForm gram_matrix(const AlgebraDesc& A) {
  const GramForm g1 = detail::place_gram(A, 1), g2 = detail::place_gram(A, 2);
  GramForm g;
  for (std::size_t k = 0; k < 8; ++k) {
    for (std::size_t l = 0; l < 8; ++l) g.G[k][l] = g1.G[k][l] + g2.G[k][l];
  }
  detail::cholesky_pivots(g.G);
  return g;
}

/// Builds the element record (matrices and radii) for a unit.
inline LatticeElement make_element(const QuatElt& q, const AlgebraDesc& A) {
  LatticeElement e;
  e.q = q;
  e.coords = to_coords(q);
  e.matrices.first = embed_matrix(q, 1, A);
  e.matrices.second = embed_matrix(q, 2, A);
  e.t1 = cartan_radius(e.matrices.first);
  e.t2 = cartan_radius(e.matrices.second);
  return e;
}

/// x and -x act identically; the representative has its first nonzero
/// coordinate positive.
inline bool is_canonical(const Coords& c) {
  for (Int v : c) {
    if (v != 0) return v > 0;
  }
  return false;
}

inline QuatElt canonical(const QuatElt& x) {
  return is_canonical(to_coords(x)) ? x : quat_neg(x);
}

/// Ordering used for every emitted element list: (t1 + t2, coordinates).
inline bool element_less(const LatticeElement& x, const LatticeElement& y) {
  const double sx = x.t1 + x.t2, sy = y.t1 + y.t2;
  if (sx != sy) return sx < sy;
  return x.coords < y.coords;
}

struct EnumOptions {
  std::optional<Int> congruence_q;
  std::uint64_t node_budget = 100'000'000;
  int partitions = 1;
  /// Extra acceptance test applied after the radius checks.
  std::function<bool(const LatticeElement&)> filter;
};

struct EnumerationResult {
  std::vector<LatticeElement> elements;
  std::uint64_t nodes = 0;
};

/// Raised when the node budget runs out; carries whatever was found so far.
class EnumerationBudgetExceeded : public BudgetExceeded {
 public:
  EnumerationBudgetExceeded(const std::string& what, std::vector<LatticeElement> partial)
      : BudgetExceeded(what, true), partial_elements(std::move(partial)) {}
  std::vector<LatticeElement> partial_elements;
};

inline constexpr double kRadiusSlack = 1e-9;

namespace detail {

/// Thrown out of an enumeration when the shared node budget runs out.
struct BudgetAbort {};

/// Fincke-Pohst enumeration of all integer points y with y^T W y <= bound.
/// Coordinates are processed in decreasing order of the diagonal of W
/// (largest outermost).
template <std::size_t N>
class FinckePohst {
 public:
  using Point = std::array<std::int64_t, N>;
  using Form = std::array<std::array<double, N>, N>;

  FinckePohst(const Form& W, double bound) : bound_(bound) {
    for (std::size_t i = 0; i < N; ++i) perm_[i] = i;
    std::stable_sort(perm_.begin(), perm_.end(),
                     [&W](std::size_t x, std::size_t y) { return W[x][x] < W[y][y]; });
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) q_[i][j] = W[perm_[i]][perm_[j]];
    }
    // Q(y) = sum_i q_ii (y_i + sum_{j > i} q_ij y_j)^2.
    for (std::size_t i = 0; i < N; ++i) {
      if (!(q_[i][i] > 0)) throw DomainError("Gram matrix is not positive definite (invalid algebra preset)");
      for (std::size_t j = i + 1; j < N; ++j) {
        q_[j][i] = q_[i][j];
        q_[i][j] /= q_[i][i];
      }
      for (std::size_t k = i + 1; k < N; ++k) {
        for (std::size_t l = k; l < N; ++l) q_[k][l] -= q_[k][i] * q_[i][l];
      }
    }
  }

  /// Integer range of the outermost coordinate.
  std::pair<std::int64_t, std::int64_t> outer_range() const {
    const double half = std::sqrt(bound_ / q_[N - 1][N - 1]);
    return {static_cast<std::int64_t>(std::ceil(-half)), static_cast<std::int64_t>(std::floor(half))};
  }

  /// Visits every point whose outermost coordinate lies in [lo, hi].
  template <class Visit>
  void run(std::int64_t lo, std::int64_t hi, std::atomic<std::uint64_t>& nodes,
           std::uint64_t budget, Visit&& visit) {
    y_.fill(0);
    nodes_ = &nodes;
    budget_ = budget;
    const double q = q_[N - 1][N - 1];
    for (std::int64_t v = lo; v <= hi; ++v) {
      const double used = q * static_cast<double>(v) * static_cast<double>(v);
      if (used > bound_) continue;
      tick();
      y_[N - 1] = v;
      if constexpr (N == 1) {
        emit(visit);
      } else {
        descend(N - 2, bound_ - used, visit);
      }
    }
  }

 private:
  void tick() {
    if (nodes_->fetch_add(1, std::memory_order_relaxed) + 1 > budget_) throw BudgetAbort{};
  }

  template <class Visit>
  void emit(Visit& visit) {
    Point p{};
    for (std::size_t i = 0; i < N; ++i) p[perm_[i]] = y_[i];
    visit(p);
  }

  template <class Visit>
  void descend(std::size_t i, double remaining, Visit& visit) {
    double c = 0.0;
    for (std::size_t j = i + 1; j < N; ++j) c -= q_[i][j] * static_cast<double>(y_[j]);
    const double half = std::sqrt(std::max(remaining, 0.0) / q_[i][i]);
    const auto lo = static_cast<std::int64_t>(std::ceil(c - half));
    const auto hi = static_cast<std::int64_t>(std::floor(c + half));
    for (std::int64_t v = lo; v <= hi; ++v) {
      const double diff = static_cast<double>(v) - c;
      const double used = q_[i][i] * diff * diff;
      if (used > remaining) continue;
      tick();
      y_[i] = v;
      if (i == 0) {
        emit(visit);
      } else {
        descend(i - 1, remaining - used, visit);
      }
    }
    y_[i] = 0;
  }

  double bound_;
  std::array<std::size_t, N> perm_{};
  Form q_{};
  Point y_{};
  std::atomic<std::uint64_t>* nodes_ = nullptr;
  std::uint64_t budget_ = 0;
};

using Form4 = std::array<std::array<double, 4>, 4>;

/// Restriction of the place-p Gram form to coordinates [off, off + 4).
inline Form4 half_form(const GramForm& g, std::size_t off) {
  Form4 f{};
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t l = 0; l < 4; ++l) f[k][l] = g.G[off + k][off + l];
  }
  return f;
}

inline double eval4(const Form4& f, const std::array<std::int64_t, 4>& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double row = 0.0;
    for (std::size_t l = 0; l < 4; ++l) row += f[k][l] * static_cast<double>(c[l]);
    s += static_cast<double>(c[k]) * row;
  }
  return s;
}

/// One half of a unit, x2 + x3 ij-side, keyed by 1 + v n(x2 + x3 i).
struct HalfRecord {
  QuadInt key;
  std::array<std::int64_t, 4> c;
  double mass1, mass2;  // |sigma_p(half)|_F^2
};

/// Split enumeration of units. With xi = x0 + x1 i and zeta = x2 + x3 i one has
/// x = xi + zeta j, n(x) = n(xi) - v n(zeta), and |sigma_p(x)|_F^2 is the sum
/// of the two halves' contributions (the Gram form is block diagonal). Every
/// unit in the product of balls therefore has both halves inside the same
/// balls; the zeta halves are tabulated by 1 + v n(zeta) and each xi is matched
/// against the table through n(xi).
class SplitEnumerator {
 public:
  SplitEnumerator(const AlgebraDesc& A, double R1, double R2, const EnumOptions& opt)
      : A_(A), R1_(R1), R2_(R2), opt_(opt) {
    const GramForm g1 = place_gram(A, 1), g2 = place_gram(A, 2);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t l = 4; l < 8; ++l) {
        if (std::abs(g1.G[k][l]) + std::abs(g2.G[k][l]) > 1e-9) {
          throw DomainError("split enumeration needs a block-diagonal Gram form");
        }
      }
    }
    b1_ = 2.0 * std::cosh(R1) * (1.0 + 1e-9) + 1e-9;
    b2_ = 2.0 * std::cosh(R2) * (1.0 + 1e-9) + 1e-9;
    // lambda minimises lambda b1 + b2 / lambda, the bound of the single
    // ellipsoid that contains the product of the two per-place ellipsoids.
    lambda_ = std::sqrt(b2_ / b1_);
    bound_ = lambda_ * b1_ + b2_ / lambda_;
    for (std::size_t h = 0; h < 2; ++h) {
      f1_[h] = half_form(g1, 4 * h);
      f2_[h] = half_form(g2, 4 * h);
      for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t l = 0; l < 4; ++l) w_[h][k][l] = lambda_ * f1_[h][k][l] + f2_[h][k][l] / lambda_;
      }
    }
  }

  std::pair<std::int64_t, std::int64_t> outer_range() const {
    return FinckePohst<4>(w_[0], bound_).outer_range();
  }

  /// Tabulates every zeta half inside both per-place ellipsoids.
  void build_table(std::atomic<std::uint64_t>& nodes) {
    FinckePohst<4> fp(w_[1], bound_);
    const auto [lo, hi] = fp.outer_range();
    const FieldDesc& F = A_.F;
    fp.run(lo, hi, nodes, opt_.node_budget, [&](const std::array<std::int64_t, 4>& c) {
      const double m1 = eval4(f1_[1], c), m2 = eval4(f2_[1], c);
      if (m1 > b1_ || m2 > b2_) return;
      const QuadInt x2(c[0], c[1]), x3(c[2], c[3]);
      const QuadInt n = qi_sub(qi_mul(x2, x2, F), qi_scale(qi_mul(x3, x3, F), A_.u));
      table_.push_back({qi_add(QuadInt(1), qi_scale(n, A_.v)), c, m1, m2});
    });
    std::sort(table_.begin(), table_.end(), [](const HalfRecord& x, const HalfRecord& y) {
      if (x.key != y.key) return x.key < y.key;
      return x.c < y.c;
    });
  }

  /// Matches every xi half whose outermost coordinate lies in [lo, hi].
  void match(std::int64_t lo, std::int64_t hi, std::atomic<std::uint64_t>& nodes,
             std::vector<LatticeElement>& out) const {
    FinckePohst<4> fp(w_[0], bound_);
    const FieldDesc& F = A_.F;
    fp.run(lo, hi, nodes, opt_.node_budget, [&](const std::array<std::int64_t, 4>& c) {
      const double m1 = eval4(f1_[0], c), m2 = eval4(f2_[0], c);
      if (m1 > b1_ || m2 > b2_) return;
      const QuadInt x0(c[0], c[1]), x1(c[2], c[3]);
      const QuadInt key = qi_sub(qi_mul(x0, x0, F), qi_scale(qi_mul(x1, x1, F), A_.u));
      auto it = std::lower_bound(table_.begin(), table_.end(), key,
                                 [](const HalfRecord& r, const QuadInt& k) { return r.key < k; });
      for (; it != table_.end() && it->key == key; ++it) {
        if (m1 + it->mass1 > b1_ || m2 + it->mass2 > b2_) continue;
        const Coords full{c[0], c[1], c[2], c[3], it->c[0], it->c[1], it->c[2], it->c[3]};
        accept(from_coords(full), out);
      }
    });
  }

  std::size_t table_size() const { return table_.size(); }

 private:
  void accept(const QuatElt& q, std::vector<LatticeElement>& out) const {
    if (!is_canonical(to_coords(q))) return;
    if (!(quat_norm(q, A_) == QuadInt(1))) return;
    // The image of x lies in the congruence subgroup if either lift +-x does.
    if (opt_.congruence_q && !congruence_test(q, *opt_.congruence_q) &&
        !congruence_test(quat_neg(q), *opt_.congruence_q)) {
      return;
    }
    LatticeElement e = make_element(q, A_);
    if (e.t1 > R1_ + kRadiusSlack || e.t2 > R2_ + kRadiusSlack) return;
    if (opt_.filter && !opt_.filter(e)) return;
    out.push_back(std::move(e));
  }

  const AlgebraDesc& A_;
  double R1_, R2_;
  const EnumOptions& opt_;
  double b1_ = 0, b2_ = 0, lambda_ = 1, bound_ = 0;
  std::array<Form4, 2> f1_{}, f2_{}, w_{};
  std::vector<HalfRecord> table_;
};

}  // namespace detail

/// One representative per +- pair of every x in O^1 (optionally in O^1(q))
/// with t_1 <= R1 and t_2 <= R2, sorted by (t1 + t2, coordinates).
///
/// The outermost coordinate range of the xi half is split into `partitions`
/// contiguous chunks processed on separate threads; the merged output does
/// not depend on the partition count.
inline EnumerationResult enumerate_units(const AlgebraDesc& A, double R1, double R2,
                                         const EnumOptions& opt = {}) {
  if (!(R1 >= 0) || !(R2 >= 0)) throw DomainError("enumerate_units: radii must be >= 0");
  detail::SplitEnumerator en(A, R1, R2, opt);
  std::atomic<std::uint64_t> nodes{0};
  auto budget_error = [&](std::vector<LatticeElement> partial) {
    return EnumerationBudgetExceeded("enumeration node budget of " + std::to_string(opt.node_budget) +
                                         " exceeded; returned elements are partial",
                                     std::move(partial));
  };
  try {
    en.build_table(nodes);
  } catch (const detail::BudgetAbort&) {
    throw budget_error({});
  }

  const auto [lo, hi] = en.outer_range();
  const int parts = std::max(1, opt.partitions);
  const std::int64_t span = hi - lo + 1;
  std::vector<std::vector<LatticeElement>> chunks(static_cast<std::size_t>(parts));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(parts));
  auto work = [&](int p) {
    const std::int64_t a = lo + span * p / parts;
    const std::int64_t b = lo + span * (p + 1) / parts - 1;
    try {
      en.match(a, b, nodes, chunks[static_cast<std::size_t>(p)]);
    } catch (...) {
      errors[static_cast<std::size_t>(p)] = std::current_exception();
    }
  };
  if (parts == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int p = 0; p < parts; ++p) pool.emplace_back(work, p);
    for (auto& t : pool) t.join();
  }

  EnumerationResult res;
  for (auto& c : chunks) res.elements.insert(res.elements.end(), c.begin(), c.end());
  std::sort(res.elements.begin(), res.elements.end(), element_less);
  res.nodes = nodes.load();

  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const detail::BudgetAbort&) {
      throw budget_error(std::move(res.elements));
    }
  }
  return res;
}

/// Exhaustive scan of the coordinate box [-B, B]^8 with exact arithmetic.
/// Independent of the Gram form and of the square-root step above.
inline std::vector<QuatElt> brute_force_units(const AlgebraDesc& A, int B,
                                              std::uint64_t budget = 10'000'000'000ULL) {
  if (B < 0) throw DomainError("brute_force_units: B must be >= 0");
  const auto side = static_cast<std::uint64_t>(2 * B + 1);
  std::uint64_t total = 1;
  for (int i = 0; i < 8; ++i) {
    total *= side;
    if (total > budget) throw BudgetExceeded("brute_force_units: box exceeds node budget", false);
  }
  const FieldDesc& F = A.F;
  // x0^2 for every x0 in the box.
  std::vector<std::pair<QuadInt, QuadInt>> squares;
  for (int a = -B; a <= B; ++a) {
    for (int b = -B; b <= B; ++b) {
      const QuadInt x0(a, b);
      squares.emplace_back(qi_mul(x0, x0, F), x0);
    }
  }
  std::vector<QuatElt> out;
  Coords c{};
  for (c[2] = -B; c[2] <= B; ++c[2])
    for (c[3] = -B; c[3] <= B; ++c[3])
      for (c[4] = -B; c[4] <= B; ++c[4])
        for (c[5] = -B; c[5] <= B; ++c[5])
          for (c[6] = -B; c[6] <= B; ++c[6])
            for (c[7] = -B; c[7] <= B; ++c[7]) {
              QuatElt x = from_coords(c);
              for (const auto& [sq, x0] : squares) {
                x.x0 = x0;
                if (quat_norm(x, A) == QuadInt(1)) out.push_back(x);
              }
            }
  std::sort(out.begin(), out.end(),
            [](const QuatElt& p, const QuatElt& q) { return to_coords(p) < to_coords(q); });
  return out;
}

enum class RadiusStatistic { Max, Sum };

/// Cumulative counts N(edge_k) = #{elements with statistic <= edge_k}.
struct RadiusHistogram {
  RadiusStatistic stat = RadiusStatistic::Sum;
  std::vector<double> edges;
  std::vector<std::uint64_t> cumulative;
};

/// Every unit with t1 + t2 <= S, collected by slicing the t1 axis so that each
/// slice is a box with a much smaller ellipsoid than the full box [0,S]^2.
inline std::vector<LatticeElement> enumerate_sum_ball(const AlgebraDesc& A, double S, int slices,
                                                      const EnumOptions& opt = {}) {
  if (slices < 1) throw DomainError("enumerate_sum_ball: need at least one slice");
  std::vector<LatticeElement> all;
  for (int i = 0; i < slices; ++i) {
    const double a = S * i / slices, b = S * (i + 1) / slices;
    EnumOptions o = opt;
    const bool first = i == 0;
    o.filter = [a, S, first, &opt](const LatticeElement& e) {
      if (!first && !(e.t1 > a)) return false;
      if (e.t1 + e.t2 > S + kRadiusSlack) return false;
      return !opt.filter || opt.filter(e);
    };
    auto part = enumerate_units(A, b, S - a, o);
    all.insert(all.end(), part.elements.begin(), part.elements.end());
  }
  std::sort(all.begin(), all.end(), element_less);
  return all;
}

inline RadiusHistogram histogram_from(const std::vector<LatticeElement>& els, RadiusStatistic stat,
                                      double Rmax, int bins) {
  RadiusHistogram h;
  h.stat = stat;
  std::vector<double> vals;
  vals.reserve(els.size());
  for (const auto& e : els) vals.push_back(stat == RadiusStatistic::Max ? std::max(e.t1, e.t2) : e.t1 + e.t2);
  std::sort(vals.begin(), vals.end());
  for (int k = 1; k <= bins; ++k) {
    const double edge = Rmax * k / bins;
    h.edges.push_back(edge);
    h.cumulative.push_back(static_cast<std::uint64_t>(
        std::upper_bound(vals.begin(), vals.end(), edge + kRadiusSlack) - vals.begin()));
  }
  return h;
}

/// Cumulative counts of max(t1, t2) or of t1 + t2 on `bins` equal bins of [0, Rmax].
inline RadiusHistogram count_by_radius(const AlgebraDesc& A, double Rmax, int bins,
                                       RadiusStatistic stat, const EnumOptions& opt = {},
                                       int slices = 8) {
  if (bins < 1) throw DomainError("count_by_radius: need at least one bin");
  const std::vector<LatticeElement> els =
      stat == RadiusStatistic::Max ? enumerate_units(A, Rmax, Rmax, opt).elements
                                   : enumerate_sum_ball(A, Rmax, slices, opt);
  return histogram_from(els, stat, Rmax, bins);
}

struct GrowthFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log N(edge) against edge over bins with edge >= from.
inline GrowthFit fit_growth_exponent(const RadiusHistogram& h, double from) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < h.edges.size(); ++k) {
    if (h.edges[k] < from || h.cumulative[k] == 0) continue;
    const double x = h.edges[k], y = std::log(static_cast<double>(h.cumulative[k]));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 2) throw DomainError("fit_growth_exponent: fewer than two populated bins");
  GrowthFit f;
  f.points = n;
  const double dn = static_cast<double>(n);
  f.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / dn;
  return f;
}

// ---------------------------------------------------------------------------
// Export: CSV table and binary cache.

inline std::string elements_csv(const std::vector<LatticeElement>& els, const AlgebraDesc& A) {
  std::ostringstream out;
  out << "c1,cw,ci,ciw,cj,cjw,cij,cijw,t1,t2,norm_check\n";
  for (const auto& e : els) {
    for (Int v : e.coords) out << to_string(v) << ',';
    const bool ok = quat_norm(e.q, A) == QuadInt(1);
    out << io::fmt_double(e.t1) << ',' << io::fmt_double(e.t2) << ',' << (ok ? 1 : 0) << '\n';
  }
  return out.str();
}

/// Content hash of everything that determines an enumeration.
inline std::uint64_t enumeration_key(const AlgebraDesc& A, double R1, double R2,
                                     std::optional<Int> q) {
  std::string s = "hyperlat-enum-v1;D=" + std::to_string(A.F.D) + ";u=" + to_string(A.u) +
                  ";v=" + to_string(A.v) + ";R1=" + io::fmt_double(R1) + ";R2=" + io::fmt_double(R2) +
                  ";q=" + (q ? to_string(*q) : std::string("none"));
  return io::fnv1a(s);
}

inline constexpr std::string_view kCacheMagic = "HLENUM01";

/// Layout: magic, key (u64), count (u64), then per element 8 x int64
/// coordinates and t1, t2 as IEEE doubles; all little-endian.
inline std::string encode_cache(const std::vector<LatticeElement>& els, std::uint64_t key) {
  std::string out(kCacheMagic);
  io::put_u64(out, key);
  io::put_u64(out, els.size());
  for (const auto& e : els) {
    for (Int v : e.coords) {
      if (v > INT64_MAX || v < INT64_MIN) throw OverflowError("coordinate does not fit the 64-bit cache");
      io::put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
    }
    io::put_f64(out, e.t1);
    io::put_f64(out, e.t2);
  }
  return out;
}

inline std::vector<LatticeElement> decode_cache(std::string_view data, std::uint64_t key,
                                                const AlgebraDesc& A) {
  if (data.substr(0, kCacheMagic.size()) != kCacheMagic) throw Error("not an enumeration cache file");
  std::size_t pos = kCacheMagic.size();
  if (io::get_u64(data, pos) != key) throw Error("enumeration cache key mismatch");
  const std::uint64_t n = io::get_u64(data, pos);
  std::vector<LatticeElement> els;
  els.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Coords c{};
    for (auto& v : c) v = static_cast<std::int64_t>(io::get_u64(data, pos));
    LatticeElement e = make_element(from_coords(c), A);
    e.t1 = io::get_f64(data, pos);
    e.t2 = io::get_f64(data, pos);
    els.push_back(std::move(e));
  }
  return els;
}

/// Loads `dir/enum_<key>.bin` if present, otherwise enumerates and stores it.
inline std::vector<LatticeElement> cached_enumeration(const AlgebraDesc& A, double R1, double R2,
                                                      const EnumOptions& opt,
                                                      const std::filesystem::path& dir) {
  const std::uint64_t key = enumeration_key(A, R1, R2, opt.congruence_q);
  const auto path = dir / ("enum_" + io::hex64(key) + ".bin");
  if (std::filesystem::exists(path)) return decode_cache(io::read_file(path), key, A);
  auto els = enumerate_units(A, R1, R2, opt).elements;
  io::write_atomic(path, encode_cache(els, key));
  return els;
}

}  // namespace hyperlat
