#pragma once

// Desk-scale model of the trace estimate: the spectral estimator H_{r,R},
// synthetic spectra obeying the density bound, the trace sum, atomic
// Riemann-Stieltjes integration with Zaremba's integration by parts, and the
// geometric kernel diagonal over an enumerated lattice.
//
// Factors are indexed from 0; factors 0..k-1 carry the small radius r,
// factors k..ell-1 the large radius R.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hyperlat/diophantine.hpp"
#include "hyperlat/error.hpp"
#include "hyperlat/io.hpp"
#include "hyperlat/latenum.hpp"
#include "hyperlat/quadrature.hpp"
#include "hyperlat/spectral.hpp"

namespace hyperlat {

// ---------------------------------------------------------------------------
// Spectrum atoms and the estimator.

struct FactorParam {
  bool principal = true;
  double value = 0.0;  // t >= 0 if principal, s in (0, 1/2) otherwise
};

struct SpectrumAtom {
  std::vector<FactorParam> params;
  std::uint64_t mult = 1;
};

/// I_pr, I_comp within {0..k-1}; J_pr, J_comp within {k..ell-1}.
struct PartitionShape {
  std::vector<int> I_pr, I_comp, J_pr, J_comp;

  friend bool operator==(const PartitionShape&, const PartitionShape&) = default;
  friend auto operator<=>(const PartitionShape&, const PartitionShape&) = default;
};

inline PartitionShape shape_of(const SpectrumAtom& a, int k) {
  PartitionShape P;
  for (int j = 0; j < static_cast<int>(a.params.size()); ++j) {
    const bool pr = a.params[static_cast<std::size_t>(j)].principal;
    auto& dst = j < k ? (pr ? P.I_pr : P.I_comp) : (pr ? P.J_pr : P.J_comp);
    dst.push_back(j);
  }
  return P;
}

inline std::string to_string(const PartitionShape& P) {
  auto list = [](const std::vector<int>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
    return s + "}";
  };
  return "I_pr=" + list(P.I_pr) + " I_comp=" + list(P.I_comp) + " J_pr=" + list(P.J_pr) +
         " J_comp=" + list(P.J_comp);
}

/// Checks that the four index sets partition {0..k-1} and {k..ell-1}.
inline void validate_shape(const PartitionShape& P, int k, int ell) {
  std::vector<int> seen(static_cast<std::size_t>(ell), 0);
  auto mark = [&](const std::vector<int>& v, int lo, int hi) {
    for (int j : v) {
      if (j < lo || j >= hi) throw DomainError("partition index " + std::to_string(j) + " out of range");
      ++seen[static_cast<std::size_t>(j)];
    }
  };
  mark(P.I_pr, 0, k);
  mark(P.I_comp, 0, k);
  mark(P.J_pr, k, ell);
  mark(P.J_comp, k, ell);
  for (int c : seen) {
    if (c != 1) throw DomainError("partition sets must cover every factor exactly once");
  }
}

/// prod_{j<k} r^{d_j} prod_{I_pr} (1+r t_j)^{-N} prod_{J_pr} (1+R t_j)^{-N}
/// prod_{J_comp} e^{2 s_j (d_j - 1) R}.  s and t are indexed by factor.
inline double estimator_H(double r, double R, const PartitionShape& P, const std::map<int, double>& s,
                          const std::map<int, double>& t, int N, const std::vector<int>& dims, int k) {
  if (N < 4) throw DomainError("estimator_H: N must be at least 4");
  const int ell = static_cast<int>(dims.size());
  validate_shape(P, k, ell);
  auto get = [](const std::map<int, double>& m, int j, const char* what) {
    auto it = m.find(j);
    if (it == m.end()) {
      throw DomainError(std::string("estimator_H: missing ") + what + " for factor " + std::to_string(j + 1));
    }
    return it->second;
  };
  double h = 1.0;
  for (int j = 0; j < k; ++j) h *= std::pow(r, dims[static_cast<std::size_t>(j)]);
  for (int j : P.I_pr) h *= std::pow(1.0 + r * get(t, j, "t"), -N);
  for (int j : P.J_pr) h *= std::pow(1.0 + R * get(t, j, "t"), -N);
  for (int j : P.J_comp) h *= std::exp(2.0 * get(s, j, "s") * (dims[static_cast<std::size_t>(j)] - 1) * R);
  for (int j : P.I_comp) (void)get(s, j, "s");
  return h;
}

inline double estimator_H(double r, double R, const SpectrumAtom& a, int N, const std::vector<int>& dims,
                          int k) {
  std::map<int, double> s, t;
  for (int j = 0; j < static_cast<int>(a.params.size()); ++j) {
    const auto& p = a.params[static_cast<std::size_t>(j)];
    (p.principal ? t : s)[j] = p.value;
  }
  return estimator_H(r, R, shape_of(a, k), s, t, N, dims, k);
}

// ---------------------------------------------------------------------------
// Density bound.

/// Q: principal factors; sigma: thresholds for the others (key = factor).
/// Counts atoms with t_j <= T on Q and s_j > sigma_j off Q, and compares with
/// C prod_{j in Q} (1+T)^{d_j (1 - 2 m(sigma)) + delta}.
inline std::uint64_t density_count(const std::vector<SpectrumAtom>& spec, const std::vector<bool>& Q,
                                   const std::map<int, double>& sigma, double T) {
  std::uint64_t n = 0;
  for (const auto& a : spec) {
    bool in = true;
    for (std::size_t j = 0; j < a.params.size() && in; ++j) {
      const auto& p = a.params[j];
      if (Q[j]) {
        in = p.principal && p.value <= T;
      } else {
        in = !p.principal && p.value > sigma.at(static_cast<int>(j));
      }
    }
    if (in) n += a.mult;
  }
  return n;
}

inline double density_bound(const std::vector<bool>& Q, const std::map<int, double>& sigma, double T,
                            const std::vector<int>& dims, double C, double delta) {
  double m = 0.0;
  for (const auto& [j, v] : sigma) {
    if (!Q[static_cast<std::size_t>(j)]) m = std::max(m, v);
  }
  double b = C;
  for (std::size_t j = 0; j < Q.size(); ++j) {
    if (Q[j]) b *= std::pow(1.0 + T, dims[j] * (1.0 - 2.0 * m) + delta);
  }
  return b;
}

inline bool density_count_check(const std::vector<SpectrumAtom>& spec, const std::vector<bool>& Q,
                                const std::map<int, double>& sigma, double T, const std::vector<int>& dims,
                                double C, double delta) {
  return static_cast<double>(density_count(spec, Q, sigma, T)) <= density_bound(Q, sigma, T, dims, C, delta);
}

inline const std::vector<double>& density_sigma_grid() {
  static const std::vector<double> g = {0.02, 0.1, 0.2, 0.3, 0.45};
  return g;
}

/// Checks every Q subset, every sigma vector from the grid on Q^c and
/// T in {1, 4, 16, 64, T_max}.  Returns the first failing description, or empty.
inline std::string density_grid_violation(const std::vector<SpectrumAtom>& spec, const std::vector<int>& dims,
                                          double T_max, double C, double delta) {
  const int ell = static_cast<int>(dims.size());
  const auto& sg = density_sigma_grid();
  std::vector<double> Ts = {1.0, 4.0, 16.0, 64.0, std::max(T_max, 1.0)};
  for (unsigned mask = 0; mask < (1u << ell); ++mask) {
    std::vector<bool> Q(static_cast<std::size_t>(ell));
    std::vector<int> comp;
    for (int j = 0; j < ell; ++j) {
      Q[static_cast<std::size_t>(j)] = (mask >> j) & 1u;
      if (!Q[static_cast<std::size_t>(j)]) comp.push_back(j);
    }
    std::size_t combos = 1;
    for (std::size_t i = 0; i < comp.size(); ++i) combos *= sg.size();
    for (std::size_t c = 0; c < combos; ++c) {
      std::map<int, double> sigma;
      std::size_t rest = c;
      for (int j : comp) {
        sigma[j] = sg[rest % sg.size()];
        rest /= sg.size();
      }
      for (double T : Ts) {
        if (!density_count_check(spec, Q, sigma, T, dims, C, delta)) {
          std::ostringstream msg;
          msg << "Q mask " << mask << ", T " << T << ", count " << density_count(spec, Q, sigma, T)
              << " > bound " << density_bound(Q, sigma, T, dims, C, delta);
          return msg.str();
        }
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Synthetic spectra.

struct SynthOptions {
  double T_max = 1000.0;          // principal range for mixed atoms
  double tempered_T = 20.0;       // range of the all-principal Poisson part
  double tempered_intensity = 1.0;
  double gap = 0.1;               // w': complementary s <= 1/2 - w'
  int levels = 4;                 // complementary grid (1/2 - w') 2^{-i}; 0 disables it
  double C = 2.0;
  double delta = 0.1;
  std::uint64_t max_atoms = 5'000'000;  // per family: tempered, or one (subset, level)
};

struct SynthSpectrum {
  std::vector<SpectrumAtom> atoms;
  double thinning = 1.0;  // final global rescale factor
  int rescale_rounds = 0;
};

namespace detail {

inline std::uint64_t poisson_draw(std::mt19937_64& rng, double mean) {
  std::poisson_distribution<std::uint64_t> d(mean);
  return d(rng);
}

}  // namespace detail

/// Tempered part: Poisson with intensity c prod t_j^{d_j - 1} on [0, tempered_T]^ell.
/// Mixed parts: for every nonempty proper subset of complementary factors and
/// every level s on the geometric grid, principal coordinates at
/// (1+t)^{e} = n+1, n = 1, 2, ..., e = sum_{principal} d_j (1 - 2s), thinned to
/// floor(lambda (1+T)^e) below T.  lambda starts at 1 and shrinks by 4/5 until
/// the density grid check passes.  One atom with all factors complementary.
inline SynthSpectrum synth_spectrum(std::uint64_t seed, const std::vector<int>& dims,
                                    const SynthOptions& opt = {}) {
  if (!(opt.gap > 0 && opt.gap < 0.5)) throw DomainError("synth_spectrum: gap must lie in (0, 1/2)");
  const int ell = static_cast<int>(dims.size());
  if (ell < 1 || ell > 3) throw DomainError("synth_spectrum: 1 to 3 factors supported");
  const double s_top = 0.5 - opt.gap;
  std::vector<double> s_levels;
  for (int i = 0; i < opt.levels; ++i) s_levels.push_back(s_top * std::ldexp(1.0, -i));

  std::mt19937_64 rng(seed);
  std::vector<SpectrumAtom> tempered;
  if (opt.tempered_T > 0 && opt.tempered_intensity > 0) {
    double mean = opt.tempered_intensity;
    for (int d : dims) mean *= std::pow(opt.tempered_T, d) / d;
    if (mean > static_cast<double>(opt.max_atoms)) {
      throw DomainError("synth_spectrum: tempered mean " + io::fmt_double(mean) + " exceeds max_atoms; lower tempered_T");
    }
    const std::uint64_t n = detail::poisson_draw(rng, mean);
    tempered.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      SpectrumAtom a;
      for (int d : dims) {
        // Inverse CDF of t^{d-1} on [0, T]; u in (0, 1] keeps t > 0.
        const double u = 1.0 - uniform01(rng);
        a.params.push_back({true, opt.tempered_T * std::pow(u, 1.0 / d)});
      }
      tempered.push_back(std::move(a));
    }
  }

  // Complementary-only atom: the smallest grid level in every factor.
  SpectrumAtom all_comp;
  if (!s_levels.empty()) {
    for (int j = 0; j < ell; ++j) all_comp.params.push_back({false, s_levels.back()});
  }

  auto build = [&](double lambda) {
    std::vector<SpectrumAtom> out = tempered;
    for (unsigned mask = 1; mask + 1 < (1u << ell); ++mask) {  // mask = principal factors
      double dsum = 0;
      for (int j = 0; j < ell; ++j) {
        if ((mask >> j) & 1u) dsum += dims[static_cast<std::size_t>(j)];
      }
      for (double s : s_levels) {
        const double e = dsum * (1.0 - 2.0 * s);
        const double want = std::floor(lambda * std::pow(1.0 + opt.T_max, e));
        if (want > static_cast<double>(opt.max_atoms)) {
          throw DomainError("synth_spectrum: " + io::fmt_double(want) + " mixed atoms exceed max_atoms; lower T_max");
        }
        const auto count = static_cast<std::uint64_t>(want);
        for (std::uint64_t n = 1; n <= count; ++n) {
          // n-th atom sits where floor(lambda (1+t)^e) first reaches n.
          const double t = std::pow(static_cast<double>(n) / lambda, 1.0 / e) - 1.0;
          if (!(t > 0)) continue;
          SpectrumAtom a;
          for (int j = 0; j < ell; ++j) {
            if ((mask >> j) & 1u) {
              a.params.push_back({true, t});
            } else {
              a.params.push_back({false, s});
            }
          }
          out.push_back(std::move(a));
        }
      }
    }
    if (!s_levels.empty()) out.push_back(all_comp);
    return out;
  };

  SynthSpectrum res;
  double lambda = 1.0;
  for (int round = 0; round < 200; ++round) {
    auto atoms = build(lambda);
    if (density_grid_violation(atoms, dims, opt.T_max, opt.C, opt.delta).empty()) {
      res.atoms = std::move(atoms);
      res.thinning = lambda;
      res.rescale_rounds = round;
      return res;
    }
    lambda *= 0.8;
  }
  throw DomainError("synth_spectrum: density check still failing after rescaling");
}

inline std::string spectrum_jsonl(const std::vector<SpectrumAtom>& atoms) {
  std::ostringstream out;
  for (const auto& a : atoms) {
    out << "{\"params\":[";
    for (std::size_t j = 0; j < a.params.size(); ++j) {
      const auto& p = a.params[j];
      out << (j ? "," : "") << "{\"type\":\"" << (p.principal ? "principal" : "complementary") << "\",\""
          << (p.principal ? "t" : "s") << "\":" << io::fmt_double(p.value) << '}';
    }
    out << "],\"mult\":" << a.mult << "}\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Trace sum.

struct TraceSum {
  double total = 0.0;
  std::map<PartitionShape, double> by_partition;
};

inline TraceSum trace_sum(const std::vector<SpectrumAtom>& spec, double r, double R, int N,
                          const std::vector<int>& dims, int k) {
  TraceSum out;
  for (const auto& a : spec) {
    const double h = static_cast<double>(a.mult) * estimator_H(r, R, a, N, dims, k);
    out.total += h;
    out.by_partition[shape_of(a, k)] += h;
  }
  return out;
}

/// I_pr = {0..k-1}, J_comp = {k..ell-1}.
inline PartitionShape worst_case_partition(int k, int ell) {
  PartitionShape P;
  for (int j = 0; j < k; ++j) P.I_pr.push_back(j);
  for (int j = k; j < ell; ++j) P.J_comp.push_back(j);
  return P;
}

struct TraceScalingRow {
  double R = 0.0, r = 0.0;
  TraceSum sum;
};

struct TraceScaling {
  std::vector<TraceScalingRow> rows;
  double growth_exponent = 0.0;  // slope of log trace_sum against R
  bool worst_case_dominates = false;
};

/// r follows the matching-volume schedule for the split (k, ell) with the given dims.
inline TraceScaling trace_scaling(const std::vector<SpectrumAtom>& spec, const std::vector<double>& R_list,
                                  int N, const std::vector<int>& dims, int k) {
  std::vector<RhoParam> rhos;
  for (int d : dims) rhos.push_back(d == 2 ? RhoParam::real() : RhoParam::complex());
  const SplitShape shape = make_split_shape(rhos, k);
  TraceScaling out;
  std::vector<double> xs, ys;
  for (double R : R_list) {
    TraceScalingRow row{R, schedule_r(R, shape), {}};
    row.sum = trace_sum(spec, row.r, R, N, dims, k);
    xs.push_back(R);
    ys.push_back(std::log(row.sum.total));
    out.rows.push_back(std::move(row));
  }
  out.growth_exponent = fit_line(xs, ys).slope;
  const auto worst = worst_case_partition(k, static_cast<int>(dims.size()));
  const auto& last = out.rows.back().sum.by_partition;
  double best = -1;
  PartitionShape arg;
  for (const auto& [P, v] : last) {
    if (v > best) best = v, arg = P;
  }
  out.worst_case_dominates = arg == worst;
  return out;
}

inline std::string trace_scaling_csv(const TraceScaling& ts) {
  std::ostringstream out;
  out << "R,r,trace_sum,fitted_exponent\n";
  for (const auto& row : ts.rows) {
    out << io::fmt_double(row.R) << ',' << io::fmt_double(row.r) << ',' << io::fmt_double(row.sum.total) << ','
        << io::fmt_double(ts.growth_exponent) << '\n';
  }
  return out.str();
}

/// The one-dimensional bound used for principal factors on the small side:
/// int_0^inf (1+tau)^{d(1-2m)+delta} (1+r tau)^{-N-1} dtau divided by
/// r^{d(2m-1)-1-delta}.  Bounded in r when N >= 4.
inline double small_side_integral_ratio(int d, double m, double r, int N, double delta = 0.1) {
  const double e = d * (1.0 - 2.0 * m) + delta;
  auto f = [&](double tau) { return std::pow(1.0 + tau, e) * std::pow(1.0 + r * tau, -N - 1); };
  // Substitute tau = u / r so the peak sits at u ~ 1 independently of r.
  auto g = [&](double u) { return f(u / r) / r; };
  const double I = quad::integrate_to_infinity(g, 0.0, {1e-13, 1e-11, 2'000'000}).value;
  return I / std::pow(r, d * (2.0 * m - 1.0) - 1.0 - delta);
}

// ---------------------------------------------------------------------------
// Riemann-Stieltjes integration against step data and Zaremba's formula.

struct Box {
  std::vector<double> lo, hi;
  std::size_t dim() const { return lo.size(); }
};

/// phi(x) = sum of masses of atoms with location <= x coordinatewise.
struct AtomicPhi {
  std::vector<std::vector<double>> loc;
  std::vector<double> mass;

  double operator()(const std::vector<double>& x) const {
    double s = 0;
    for (std::size_t i = 0; i < loc.size(); ++i) {
      bool le = true;
      for (std::size_t j = 0; j < x.size() && le; ++j) le = loc[i][j] <= x[j];
      if (le) s += mass[i];
    }
    return s;
  }
};

/// Smooth test function with mixed partial derivatives d_S f (S a bit mask).
struct SmoothFn {
  std::size_t dim = 1;
  std::function<double(unsigned, const std::vector<double>&)> partial;
  double operator()(const std::vector<double>& x) const { return partial(0u, x); }
};

/// f(x) = sum_terms coef prod_j p_{term,j}(x_j) with polynomial factors
/// (coefficient vectors in increasing degree).
struct PolyTerm {
  double coef = 1.0;
  std::vector<std::vector<double>> factors;
};

inline SmoothFn polynomial_fn(std::vector<PolyTerm> terms, std::size_t dim) {
  auto value = [](const std::vector<double>& c, double x, bool deriv) {
    double v = 0, xp = 1;
    for (std::size_t p = 0; p < c.size(); ++p) {
      if (deriv) {
        if (p > 0) v += c[p] * static_cast<double>(p) * xp, xp *= x;
      } else {
        v += c[p] * xp, xp *= x;
      }
    }
    return v;
  };
  SmoothFn f;
  f.dim = dim;
  f.partial = [terms = std::move(terms), value](unsigned S, const std::vector<double>& x) {
    double s = 0;
    for (const auto& t : terms) {
      double p = t.coef;
      for (std::size_t j = 0; j < x.size(); ++j) p *= value(t.factors[j], x[j], (S >> j) & 1u);
      s += p;
    }
    return s;
  };
  return f;
}

/// Limit of Riemann-Stieltjes sums for atomic phi: atoms strictly above lo and
/// at most hi contribute f(location) times their mass.
inline double stieltjes_integrate(const SmoothFn& f, const AtomicPhi& phi, const Box& box) {
  if (box.dim() > 3) throw DomainError("stieltjes_integrate: dimension above 3 is not supported");
  double s = 0;
  for (std::size_t i = 0; i < phi.loc.size(); ++i) {
    bool in = true;
    for (std::size_t j = 0; j < box.dim() && in; ++j) in = phi.loc[i][j] > box.lo[j] && phi.loc[i][j] <= box.hi[j];
    if (in) s += f(phi.loc[i]) * phi.mass[i];
  }
  return s;
}

namespace detail {

/// Tensor Gauss-Legendre integral of d_S f over prod_{j in S} [a_j, b_j] with
/// the remaining coordinates fixed at x.
inline double integrate_partial(const SmoothFn& f, unsigned S, std::vector<double> x,
                                const std::vector<double>& a, const std::vector<double>& b) {
  static const quad::GaussLegendre gl(12);
  std::vector<std::size_t> axes;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if ((S >> j) & 1u) axes.push_back(j);
  }
  std::function<double(std::size_t)> rec = [&](std::size_t level) -> double {
    if (level == axes.size()) return f.partial(S, x);
    const std::size_t j = axes[level];
    if (!(b[j] > a[j])) return 0.0;
    return gl.integrate(
        [&](double y) {
          x[j] = y;
          return rec(level + 1);
        },
        a[j], b[j]);
  };
  return rec(0);
}

}  // namespace detail

/// sum_S (-1)^{|S|} Delta_{S^c} [ int_{B_S} phi d_S f ], where Delta_{S^c}
/// takes alternating differences at the upper and lower faces of the S^c
/// coordinates and acts on the whole integrand.  For step phi the inner
/// integral splits per atom into integrals of d_S f over
/// prod_{j in S} [max(a_j, loc_j), b_j].
inline double zaremba_rhs(const SmoothFn& f, const AtomicPhi& phi, const Box& box) {
  const std::size_t l = box.dim();
  if (l > 3) throw DomainError("zaremba_rhs: dimension above 3 is not supported");
  double total = 0;
  for (unsigned S = 0; S < (1u << l); ++S) {
    const int sizeS = std::popcount(S);
    double term = 0;
    const unsigned Sc = ((1u << l) - 1u) & ~S;
    // Corners of the S^c face: choose hi (sign +) or lo (sign -) per coordinate.
    for (unsigned corner = 0; corner < (1u << l); ++corner) {
      if ((corner & S) != 0) continue;
      double sign = 1;
      std::vector<double> x(l);
      for (std::size_t j = 0; j < l; ++j) {
        if (!((Sc >> j) & 1u)) continue;
        const bool hi = (corner >> j) & 1u;
        x[j] = hi ? box.hi[j] : box.lo[j];
        if (!hi) sign = -sign;
      }
      double inner = 0;
      for (std::size_t i = 0; i < phi.loc.size(); ++i) {
        bool active = true;
        std::vector<double> a(l), b(l);
        for (std::size_t j = 0; j < l && active; ++j) {
          if ((S >> j) & 1u) {
            a[j] = std::max(box.lo[j], phi.loc[i][j]);
            b[j] = box.hi[j];
            active = phi.loc[i][j] <= box.hi[j];
          } else {
            active = phi.loc[i][j] <= x[j];
          }
        }
        if (!active) continue;
        inner += phi.mass[i] * detail::integrate_partial(f, S, x, a, b);
      }
      term += sign * inner;
    }
    total += (sizeS % 2 ? -1.0 : 1.0) * term;
  }
  return total;
}

/// Smooth phi: Riemann-Stieltjes sums on uniform grids of m 2^i cells per
/// axis (i < levels) with midpoint tags.  The error expands in even powers of
/// the cell width, so a Romberg table removes h^2, h^4, ... in turn.
inline double stieltjes_smooth(const SmoothFn& f, const std::function<double(const std::vector<double>&)>& phi,
                               const Box& box, int m, int levels = 3) {
  const std::size_t l = box.dim();
  if (l > 3) throw DomainError("stieltjes_smooth: dimension above 3 is not supported");
  auto sums = [&](int cells) {
    std::vector<double> h(l);
    for (std::size_t j = 0; j < l; ++j) h[j] = (box.hi[j] - box.lo[j]) / cells;
    std::size_t total = 1;
    for (std::size_t j = 0; j < l; ++j) total *= static_cast<std::size_t>(cells);
    double s = 0;
    std::vector<double> mid(l), corner(l);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      std::vector<std::size_t> cell(l);
      for (std::size_t j = 0; j < l; ++j) {
        cell[j] = rest % static_cast<std::size_t>(cells);
        rest /= static_cast<std::size_t>(cells);
        mid[j] = box.lo[j] + (static_cast<double>(cell[j]) + 0.5) * h[j];
      }
      double delta = 0;
      for (unsigned c = 0; c < (1u << l); ++c) {
        double sign = 1;
        for (std::size_t j = 0; j < l; ++j) {
          const bool hi = (c >> j) & 1u;
          corner[j] = box.lo[j] + static_cast<double>(cell[j] + (hi ? 1 : 0)) * h[j];
          if (!hi) sign = -sign;
        }
        delta += sign * phi(corner);
      }
      s += f(mid) * delta;
    }
    return s;
  };
  if (levels < 1) throw DomainError("stieltjes_smooth: need at least one level");
  std::vector<double> row;
  for (int i = 0; i < levels; ++i) {
    std::vector<double> next{sums(m << i)};
    double factor = 4.0;
    for (std::size_t j = 0; j < row.size(); ++j, factor *= 4.0) {
      next.push_back(next[j] + (next[j] - row[j]) / (factor - 1.0));
    }
    row = std::move(next);
  }
  return row.back();
}

// ---------------------------------------------------------------------------
// Kernel diagonal over the enumerated lattice.

struct GroupPoint {
  RealMat first = RealMat::identity();
  RealMat second = RealMat::identity();
};

/// sum over enumerated +- classes gamma of F1(t(x1^{-1} gamma_1 x1)) F2(t(x2^{-1} gamma_2 x2)).
/// Requires the enumeration radii to cover support_p + 2 t(x_p).
inline double kernel_diag(const RadialProfile& F1, const RadialProfile& F2, const GroupPoint& x,
                          const std::vector<LatticeElement>& elements, double R1_cover, double R2_cover) {
  const double c1 = cartan_radius(x.first), c2 = cartan_radius(x.second);
  const double need1 = F1.support + 2.0 * c1, need2 = F2.support + 2.0 * c2;
  if (need1 > R1_cover + kRadiusSlack || need2 > R2_cover + kRadiusSlack) {
    throw CoverageError("kernel_diag: supports need radii (" + io::fmt_double(need1) + ", " +
                        io::fmt_double(need2) + "), enumeration covers (" + io::fmt_double(R1_cover) + ", " +
                        io::fmt_double(R2_cover) + ")");
  }
  const RealMat x1i = x.first.inverse_unimodular(), x2i = x.second.inverse_unimodular();
  double s = 0;
  for (const auto& e : elements) {
    if (e.t1 > need1 + kRadiusSlack || e.t2 > need2 + kRadiusSlack) continue;
    const double t1 = cartan_radius(x1i * e.matrices.first * x.first);
    if (t1 > F1.support) continue;
    const double t2 = cartan_radius(x2i * e.matrices.second * x.second);
    if (t2 > F2.support) continue;
    s += F1(t1) * F2(t2);
  }
  return s;
}

}  // namespace hyperlat
