#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for real or complex
// integrands, plus fixed Gauss-Legendre rules for tensor-product integration.
// Interval selection is a deterministic max-error policy, so repeated runs
// visit identical node sequences.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hyperlat/error.hpp"

namespace hyperlat::quad {

struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  std::size_t max_evals = 1'000'000;
};

template <class V>
struct Result {
  V value{};
  double error = 0.0;
  std::size_t evals = 0;
};

namespace detail {

// Abscissae of the 15-point Kronrod rule on [-1, 1] (non-negative half);
// odd indices are the 7-point Gauss nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class V>
double magnitude(const V& v) {
  return std::abs(v);
}

template <class V>
struct Segment {
  double a, b;
  V value;
  double error;
};

template <class V, class F>
Segment<V> gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const V fc = f(c);
  V kron = fc * kWgk[7];
  V gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[static_cast<std::size_t>(j)];
    const V s = f(c - dx) + f(c + dx);
    kron += s * kWgk[static_cast<std::size_t>(j)];
    if (j % 2 == 1) gauss += s * kWg[static_cast<std::size_t>(j / 2)];
  }
  kron *= h;
  gauss *= h;
  return {a, b, kron, magnitude(V(kron - gauss))};
}

}  // namespace detail

/// Integrates f over [a, b]. Throws QuadratureError if the evaluation cap is
/// reached before the error estimate meets max(abs_tol, rel_tol * |I|).
template <class F>
auto integrate(F&& f, double a, double b, const Options& opt = {}) {
  using V = std::decay_t<decltype(f(a))>;
  using Seg = detail::Segment<V>;
  Result<V> out;
  if (a == b) return out;
  const double sign = b > a ? 1.0 : -1.0;
  if (b < a) std::swap(a, b);

  std::vector<Seg> heap;
  auto by_error = [](const Seg& x, const Seg& y) { return x.error < y.error; };
  heap.push_back(detail::gk15<V>(f, a, b));
  out.evals = 15;
  V total = heap.front().value;
  double err = heap.front().error;
  const double min_width = 64.0 * std::numeric_limits<double>::epsilon() * (b - a);

  while (err > std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(total))) {
    if (out.evals + 30 > opt.max_evals) {
      throw QuadratureError("adaptive quadrature did not converge within " +
                            std::to_string(opt.max_evals) + " evaluations (error estimate " +
                            std::to_string(err) + ")");
    }
    std::pop_heap(heap.begin(), heap.end(), by_error);
    const Seg worst = heap.back();
    heap.pop_back();
    if (worst.b - worst.a < min_width) {
      // Cannot refine further; keep the segment with its estimate.
      heap.push_back({worst.a, worst.b, worst.value, 0.0});
      std::push_heap(heap.begin(), heap.end(), by_error);
      err -= worst.error;
      continue;
    }
    const double mid = 0.5 * (worst.a + worst.b);
    Seg left = detail::gk15<V>(f, worst.a, mid);
    Seg right = detail::gk15<V>(f, mid, worst.b);
    out.evals += 30;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), by_error);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), by_error);
  }
  // Re-sum to shed the drift of the running total.
  V sum{};
  double esum = 0.0;
  std::sort(heap.begin(), heap.end(), [](const Seg& x, const Seg& y) { return x.a < y.a; });
  for (const Seg& s : heap) {
    sum += s.value;
    esum += s.error;
  }
  out.value = sum * sign;
  out.error = esum;
  return out;
}

/// Integral over [a, inf) through the substitution t = a + s/(1 - s).
template <class F>
auto integrate_to_infinity(F&& f, double a, const Options& opt = {}) {
  using V = std::decay_t<decltype(f(a))>;
  auto g = [&](double s) -> V {
    if (s >= 1.0) return V{};
    const double one_minus = 1.0 - s;
    return f(a + s / one_minus) * (1.0 / (one_minus * one_minus));
  };
  return integrate(g, 0.0, 1.0, opt);
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
struct GaussLegendre {
  std::vector<double> nodes, weights;

  explicit GaussLegendre(int n) {
    if (n < 1) throw DomainError("GaussLegendre: need at least one node");
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    const double pi = std::acos(-1.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
      nodes[lo] = -x;
      nodes[hi] = x;
      weights[lo] = weights[hi] = w;
    }
  }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(c + h * nodes[i]);
    return s * h;
  }
};

}  // namespace hyperlat::quad
