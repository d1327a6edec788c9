#pragma once

// Approximation experiment on the first hyperbolic factor: find lattice
// elements gamma with d(gamma_1 x, y) <= eps and small displacement t_2 on the
// second factor, and fit how the minimal displacement grows with log(1/eps).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hyperlat/error.hpp"
#include "hyperlat/hypgeom.hpp"
#include "hyperlat/io.hpp"
#include "hyperlat/latenum.hpp"

namespace hyperlat {

/// Factors 1..k are approximated on, factors k+1..ell carry the displacement.
struct SplitShape {
  int k = 1;
  int ell = 2;
  std::vector<RhoParam> rho_list;
  double d_1k = 0.0;   // sum_{j <= k} dim X_j = sum (2 rho_j + 1)
  double a_k1l = 0.0;  // sum_{j > k} (dim X_j - 1) = sum 2 rho_j
};

inline SplitShape make_split_shape(const std::vector<RhoParam>& rhos, int k) {
  const int ell = static_cast<int>(rhos.size());
  if (k < 1 || k >= ell) throw DomainError("split shape needs 1 <= k < ell");
  SplitShape s;
  s.k = k;
  s.ell = ell;
  s.rho_list = rhos;
  for (int j = 0; j < ell; ++j) {
    const double rho = rhos[static_cast<std::size_t>(j)].value();
    if (j < k) {
      s.d_1k += 2.0 * rho + 1.0;
    } else {
      s.a_k1l += 2.0 * rho;
    }
  }
  return s;
}

/// kappa = d_{[1,k]} / a_{[k+1,ell]}.
inline double pigeonhole_exponent(const SplitShape& s) {
  if (s.a_k1l == 0.0) throw DomainError("pigeonhole_exponent: a_{[k+1,ell]} is zero");
  return s.d_1k / s.a_k1l;
}

/// Matching-volume radius r(R) = exp(-(a / d) R).
inline double schedule_r(double R, const SplitShape& s) {
  if (!(R > 0)) throw DomainError("schedule_r: R must be positive");
  return std::exp(-(s.a_k1l / s.d_1k) * R);
}

/// prod_{j <= k} vol B_{r(R)} * prod_{j > k} vol B_R; bounded above and below
/// when r follows the matching-volume schedule.
inline double volume_balance(double R, const SplitShape& s) {
  const double r = schedule_r(R, s);
  double p = 1.0;
  for (int j = 0; j < s.ell; ++j) {
    const RhoParam rho = s.rho_list[static_cast<std::size_t>(j)];
    p *= ball_volume(rho, j < s.k ? r : R);
  }
  return p;
}

struct ApproxResult {
  double epsilon = 0.0;
  double R_found = 0.0;
  LatticeElement gamma;
  double achieved_d1 = 0.0;
};

/// Read-only view of an enumeration sorted by (t2, coordinates), together
/// with the radii it is known to be complete for.
class ApproxIndex {
 public:
  ApproxIndex(std::vector<LatticeElement> elements, double R1_cover, double R2_cover)
      : els_(std::move(elements)), R1_(R1_cover), R2_(R2_cover) {
    std::sort(els_.begin(), els_.end(), [](const LatticeElement& a, const LatticeElement& b) {
      if (a.t2 != b.t2) return a.t2 < b.t2;
      return a.coords < b.coords;
    });
  }

  const std::vector<LatticeElement>& elements() const { return els_; }
  double R1_cover() const { return R1_; }
  double R2_cover() const { return R2_; }

 private:
  std::vector<LatticeElement> els_;
  double R1_, R2_;
};

inline constexpr double kTieTolerance = 1e-12;

/// First-factor radius an enumeration must cover so that every gamma with
/// d(gamma x, y) <= eps is present: t_1(gamma) = d(gamma i, i) <= d(i, x) + eps + d(y, i).
inline double required_first_radius(const HypPoint& x, const HypPoint& y, double eps) {
  const HypPoint o = HypPoint::base(Model::H2);
  return dist(o, x) + eps + dist(y, o);
}

/// Among indexed gamma with t2 <= Rmax and d(gamma_1 x, y) <= eps, one with
/// minimal t2 (ties within 1e-12 broken by the smallest coordinate vector).
/// Throws CoverageError when the index cannot answer the question.
inline std::optional<ApproxResult> approx_search(const HypPoint& x, const HypPoint& y, double eps,
                                                 double Rmax, const ApproxIndex& index) {
  if (!(eps > 0)) throw DomainError("approx_search: eps must be positive");
  if (x.model != Model::H2 || y.model != Model::H2) {
    throw DomainError("approx_search: points must lie in the upper half-plane");
  }
  const double need = required_first_radius(x, y, eps);
  if (need > index.R1_cover() + kRadiusSlack) {
    throw CoverageError("approx_search: first-factor coverage " + io::fmt_double(index.R1_cover()) +
                        " < required " + io::fmt_double(need));
  }
  if (Rmax > index.R2_cover() + kRadiusSlack) {
    throw CoverageError("approx_search: Rmax " + io::fmt_double(Rmax) +
                        " exceeds second-factor coverage " + io::fmt_double(index.R2_cover()));
  }
  const auto& els = index.elements();
  std::optional<ApproxResult> best;
  for (const auto& e : els) {
    if (e.t2 > Rmax) break;
    if (best && e.t2 > best->R_found + kTieTolerance) break;
    if (e.t1 > need + kRadiusSlack) continue;
    const double d1 = dist(act(e.matrices.first, x), y);
    if (d1 > eps) continue;
    if (!best || e.coords < best->gamma.coords) {
      if (!best) {
        best = ApproxResult{eps, e.t2, e, d1};
      } else {
        best->gamma = e;
        best->achieved_d1 = d1;
      }
    }
  }
  return best;
}

/// Independent re-check of both inequalities from freshly embedded matrices:
/// d(gamma_1 x, y) <= eps and d(gamma_2 i, i) <= Rmax, with t2 agreeing.
inline bool verify_solution(const ApproxResult& r, const HypPoint& x, const HypPoint& y, double Rmax,
                            const AlgebraDesc& A) {
  if (!(quat_norm(r.gamma.q, A) == QuadInt(1))) return false;
  const RealMat g1 = embed_matrix(r.gamma.q, 1, A), g2 = embed_matrix(r.gamma.q, 2, A);
  const HypPoint o = HypPoint::base(Model::H2);
  const double d1 = dist(act(g1, x), y);
  const double d2 = dist(act(g2, o), o);
  return d1 <= r.epsilon && d2 <= Rmax + 1e-9 && std::abs(d2 - r.R_found) <= 1e-9 * std::max(1.0, d2);
}

/// Ordinary least squares y = slope x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw DomainError("fit_line: need at least two points");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0)) throw DomainError("fit_line: abscissae are all equal");
  LineFit f;
  f.points = xs.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.slope * xs[i] + f.intercept);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  return f;
}

struct ExponentPoint {
  double eps = 0.0;
  std::optional<ApproxResult> result;  // empty: no solution within coverage (flagged)
};

struct ExponentEstimate {
  HypPoint x, y;
  std::vector<ExponentPoint> points;
  std::optional<LineFit> fit;  // slope is zeta-hat
  std::vector<std::string> warnings;
};

/// R_found for each eps, and the least-squares slope of R_found against
/// log(1/eps) over the points that have a solution.
inline ExponentEstimate exponent_estimate(const HypPoint& x, const HypPoint& y,
                                          const std::vector<double>& eps_list, double Rmax,
                                          const ApproxIndex& index) {
  if (eps_list.size() < 3) throw DomainError("exponent_estimate: need at least three eps values");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) throw DomainError("exponent_estimate: eps_list must decrease");
  }
  ExponentEstimate est{x, y, {}, std::nullopt, {}};
  std::vector<double> xs, ys;
  for (double eps : eps_list) {
    ExponentPoint p{eps, approx_search(x, y, eps, Rmax, index)};
    if (p.result) {
      xs.push_back(std::log(1.0 / eps));
      ys.push_back(p.result->R_found);
    } else {
      est.warnings.push_back("no solution with t2 <= " + io::fmt_double(Rmax) +
                             " for eps = " + io::fmt_double(eps) + "; point excluded from fit");
    }
    est.points.push_back(std::move(p));
  }
  if (xs.size() >= 2) est.fit = fit_line(xs, ys);
  return est;
}

/// Slope over all (pair, eps) points with a solution.
inline LineFit pooled_exponent(const std::vector<ExponentEstimate>& ests) {
  std::vector<double> xs, ys;
  for (const auto& e : ests) {
    for (const auto& p : e.points) {
      if (!p.result) continue;
      xs.push_back(std::log(1.0 / p.eps));
      ys.push_back(p.result->R_found);
    }
  }
  return fit_line(xs, ys);
}

/// R_found nonincreasing as eps increases (found points only; a missing
/// point at small eps is compatible with any larger-eps value).
inline bool is_monotone(const ExponentEstimate& e) {
  // Points are stored in decreasing eps, so R_found must be nondecreasing along them.
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& p : e.points) {
    if (!p.result) continue;
    if (p.result->R_found < prev - kTieTolerance) return false;
    prev = p.result->R_found;
  }
  return true;
}

/// Fraction of found points with R_found < (kappa - 0.5) log(1/eps).
inline double lower_bound_violation_fraction(const std::vector<ExponentEstimate>& ests, double kappa) {
  std::size_t total = 0, below = 0;
  for (const auto& e : ests) {
    for (const auto& p : e.points) {
      if (!p.result) continue;
      ++total;
      if (p.result->R_found < (kappa - 0.5) * std::log(1.0 / p.eps)) ++below;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(below) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Deterministic sampling.

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <class Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Points drawn uniformly from [x_lo, x_hi] x [y_lo, y_hi].
struct Window {
  double x_lo = -1.0, x_hi = 1.0, y_lo = 0.5, y_hi = 2.0;
};

template <class Engine>
HypPoint sample_window(Engine& rng, const Window& w) {
  const double x = w.x_lo + (w.x_hi - w.x_lo) * uniform01(rng);
  const double y = w.y_lo + (w.y_hi - w.y_lo) * uniform01(rng);
  return HypPoint::h2(x, y);
}

// ---------------------------------------------------------------------------
// Synthetic oracle with a known exponent.

/// Nested dyadic grids over the window (b, h) in [-1, 1] x [log 1/2, log 2]:
/// level m holds the 4^m cell centres of a 2^m x 2^m grid, and every element
/// of level m is the affine map z -> e^h z + b with displacement t2 = log of
/// the number of points up to level m. A target at distance eps is first hit
/// at level m ~ log2(1/eps) + O(1), so t2 ~ 2 log(1/eps): the exponent is 2.
inline ApproxIndex synthetic_index(int levels) {
  if (levels < 0 || levels > 12) throw DomainError("synthetic_index: levels must lie in [0, 12]");
  std::vector<LatticeElement> els;
  const double hlo = std::log(0.5), hhi = std::log(2.0);
  std::uint64_t total = 0;
  for (int m = 0; m <= levels; ++m) {
    const std::int64_t n = std::int64_t{1} << m;
    total += static_cast<std::uint64_t>(n * n);
    const double t2 = std::log(static_cast<double>(total));
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        const double b = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double h = hlo + (hhi - hlo) * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        LatticeElement e;
        e.coords = {m, i, j, 0, 0, 0, 0, 0};
        e.matrices.first = {std::exp(h / 2), b * std::exp(-h / 2), 0.0, std::exp(-h / 2)};
        e.matrices.second = diag_flow(t2);
        e.t1 = cartan_radius(e.matrices.first);
        e.t2 = t2;
        els.push_back(std::move(e));
      }
    }
  }
  return ApproxIndex(std::move(els), std::numeric_limits<double>::infinity(),
                     std::log(static_cast<double>(total)));
}

// ---------------------------------------------------------------------------
// Output.

inline std::string exponent_csv(const std::vector<ExponentEstimate>& ests) {
  std::ostringstream out;
  out << "x_re,x_im,y_re,y_im,eps,R_found,zeta_hat\n";
  for (const auto& e : ests) {
    const std::string zeta = e.fit ? io::fmt_double(e.fit->slope) : "nan";
    for (const auto& p : e.points) {
      out << io::fmt_double(e.x.x()) << ',' << io::fmt_double(e.x.height) << ','
          << io::fmt_double(e.y.x()) << ',' << io::fmt_double(e.y.height) << ','
          << io::fmt_double(p.eps) << ',' << (p.result ? io::fmt_double(p.result->R_found) : "nan")
          << ',' << zeta << '\n';
    }
  }
  return out.str();
}

}  // namespace hyperlat
