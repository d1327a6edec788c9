#pragma once

// Spherical functions of SL2(R) (rho = 1/2) and SL2(C) (rho = 1), spherical
// transforms of radial profiles in Cartan and Iwasawa coordinates, the bump
// eta and the two test-function families built from it.
//
// Conventions: z parametrises the character a_t -> e^{2 rho z t}; z = 1/2 is
// the trivial representation. Haar measure is (sinh t)^{2 rho} dt dk dk' with
// probability measure on K and t >= 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "hyperlat/error.hpp"
#include "hyperlat/hypgeom.hpp"
#include "hyperlat/matrix.hpp"
#include "hyperlat/quadrature.hpp"

namespace hyperlat {

/// z = sigma + i tau together with the group it refers to.
struct SphericalParam {
  double sigma = 0.0;
  double tau = 0.0;
  RhoParam rho = RhoParam::real();

  cplx z() const { return {sigma, tau}; }

  static SphericalParam tempered(double tau, RhoParam rho) { return {0.0, tau, rho}; }
  static SphericalParam complementary(double s, RhoParam rho) { return {s, 0.0, rho}; }

  /// (0, 1/2] on the real axis or i[0, inf).
  bool in_unitary_dual() const {
    if (sigma == 0.0) return tau >= 0.0;
    return tau == 0.0 && sigma > 0.0 && sigma <= 0.5;
  }
};

/// Radial part t -> f(a_t) of a K-bi-invariant function, zero beyond `support`.
struct RadialProfile {
  std::function<double(double)> eval;
  double support = 0.0;
  std::string tag;
  /// Radii where the profile changes character; used as quadrature breakpoints.
  std::vector<double> breaks;

  double operator()(double t) const { return t > support ? 0.0 : eval(t); }
};

// ---------------------------------------------------------------------------
// Bump eta.

namespace detail {

inline double mollifier_shape(double x) {
  if (!(std::abs(x) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - x * x));
}

/// CDF of the normalised mollifier on [-1, 1], tabulated once and interpolated
/// with cubic Hermite splines (values and exact derivatives).
class MollifierCdf {
 public:
  static const MollifierCdf& instance() {
    static const MollifierCdf table;
    return table;
  }

  double operator()(double x) const {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > 0.0) return 1.0 - (*this)(-x);
    const double s = (x + 1.0) / h_;
    const auto k = std::min(static_cast<std::size_t>(s), kIntervals - 1);
    const double u = s - static_cast<double>(k);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * cdf_[k] + h10 * h_ * pdf_[k] + h01 * cdf_[k + 1] + h11 * h_ * pdf_[k + 1];
  }

  double density(double x) const { return mollifier_shape(x) / mass_; }
  double mass() const { return mass_; }

 private:
  static constexpr std::size_t kIntervals = 8192;

  MollifierCdf() : h_(2.0 / kIntervals) {
    const quad::GaussLegendre gl(16);
    cdf_.assign(kIntervals + 1, 0.0);
    pdf_.assign(kIntervals + 1, 0.0);
    std::vector<double> piece(kIntervals);
    for (std::size_t k = 0; k < kIntervals; ++k) {
      const double a = -1.0 + h_ * static_cast<double>(k);
      piece[k] = gl.integrate(mollifier_shape, a, a + h_);
    }
    // Sum from both ends toward the middle so the table is symmetric.
    double acc = 0.0;
    for (std::size_t k = 0; k < kIntervals / 2; ++k) {
      acc += piece[k];
      cdf_[k + 1] = acc;
    }
    mass_ = 2.0 * acc;
    for (std::size_t k = 0; k <= kIntervals; ++k) {
      if (k > kIntervals / 2) cdf_[k] = mass_ - cdf_[kIntervals - k];
      cdf_[k] /= mass_;
      pdf_[k] = mollifier_shape(-1.0 + h_ * static_cast<double>(k)) / mass_;
    }
    cdf_[kIntervals / 2] = 0.5;
  }

  double h_;
  double mass_ = 0.0;
  std::vector<double> cdf_, pdf_;
};

}  // namespace detail

/// eta = 1_{[-1 + d/2, 1 - d/2]} * m_{d/2}: smooth, even, 0 <= eta <= 1,
/// supported in [-1, 1] and equal to 1 on [-1 + d, 1 - d].
inline double bump_eta(double delta_prime, double t) {
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw DomainError("bump_eta: delta_prime must lie in (0, 1)");
  }
  const double w = delta_prime / 2.0, L = 1.0 - w;
  const auto& M = detail::MollifierCdf::instance();
  const double a = std::abs(t);
  return std::clamp(M((a + L) / w) - M((a - L) / w), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Iwasawa projection and spherical functions.

/// t with e^t = a^2 + c^2 for M = [[a, b], [c, d]] = k a_t n.
inline double iwasawa_a(const RealMat& M) {
  detail::require_unimodular(M, "iwasawa_a");
  const double n2 = M.a * M.a + M.c * M.c;
  if (!(n2 > 0)) throw DomainError("iwasawa_a: zero first column");
  return std::log(n2);
}

struct KANDecomposition {
  double theta = 0.0;  // k = rotation(theta)
  double t = 0.0;      // a = diag_flow(t)
  double y = 0.0;      // n = [[1, y], [0, 1]]
};

inline KANDecomposition iwasawa_decompose(const RealMat& M) {
  KANDecomposition out;
  out.t = iwasawa_a(M);
  out.theta = std::atan2(M.c, M.a);
  // k^{-1} M = a n has first row (e^{t/2}, e^{t/2} y).
  const RealMat an = rotation(-out.theta) * M;
  out.y = an.b / an.a;
  return out;
}

inline quad::Options phi_default_options() { return {1e-13, 1e-13, 1'000'000}; }

/// Elementary spherical function phi_z(a_t), by quadrature over K.
///
/// rho = 1/2: (1/2 pi) int_0^{2 pi} (e^t cos^2 th + e^{-t} sin^2 th)^{z - 1/2} d th.
/// rho = 1:   int_0^pi (e^t cos^2(th/2) + e^{-t} sin^2(th/2))^{2z - 1} sin(th)/2 d th,
/// the SU(2) integral reduced to the polar angle of k e_1.
inline cplx spherical_phi(const SphericalParam& p, double t,
                          const quad::Options& opt = phi_default_options()) {
  if (!(t >= 0)) throw DomainError("spherical_phi: t must be >= 0");
  if (t == 0.0) return {1.0, 0.0};
  const cplx z = p.z();
  const double et = std::exp(t), emt = std::exp(-t);
  if (p.rho.is_real()) {
    const cplx e = z - 0.5;
    // Even and pi-periodic in th: integrate over a quarter period.
    auto f = [&](double th) -> cplx {
      const double c = std::cos(th), s = std::sin(th);
      return std::exp(e * std::log(et * c * c + emt * s * s));
    };
    return quad::integrate(f, 0.0, std::numbers::pi / 2, opt).value * (2.0 / std::numbers::pi);
  }
  const cplx e = 2.0 * z - 1.0;
  auto f = [&](double th) -> cplx {
    const double c = std::cos(th / 2), s = std::sin(th / 2);
    return std::exp(e * std::log(et * c * c + emt * s * s)) * (std::sin(th) / 2.0);
  };
  return quad::integrate(f, 0.0, std::numbers::pi, opt).value;
}

/// sinh(2 z t) / (2 z sinh t): closed form of the rho = 1 spherical function.
inline cplx spherical_phi_rho1_closed(cplx z, double t) {
  if (t == 0.0) return {1.0, 0.0};
  if (std::abs(z) < 1e-300) return {t / std::sinh(t), 0.0};
  return std::sinh(2.0 * z * t) / (2.0 * z * std::sinh(t));
}

// ---------------------------------------------------------------------------
// Spherical transforms.

inline quad::Options transform_default_options() { return {1e-12, 1e-11, 2'000'000}; }

namespace detail {

inline std::vector<double> split_points(const RadialProfile& f) {
  std::vector<double> pts{0.0};
  for (double b : f.breaks) {
    if (b > 0.0 && b < f.support) pts.push_back(b);
  }
  pts.push_back(f.support);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

template <class F>
cplx integrate_pieces(F&& g, const std::vector<double>& pts, const quad::Options& opt) {
  cplx sum{};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += quad::integrate(g, pts[i], pts[i + 1], opt).value;
  return sum;
}

inline double radial_density(RhoParam rho, double t) {
  const double s = std::sinh(t);
  return rho.is_real() ? s : s * s;
}

}  // namespace detail

/// int_0^inf f(a_t) phi_{-z}(a_t) (sinh t)^{2 rho} dt.
inline cplx transform_cartan(const RadialProfile& f, const SphericalParam& z,
                             const quad::Options& opt = transform_default_options()) {
  if (!(f.support > 0) || !std::isfinite(f.support)) {
    throw DomainError("transform_cartan: profile needs a finite positive support radius");
  }
  const SphericalParam mz{-z.sigma, -z.tau, z.rho};
  const quad::Options inner = phi_default_options();
  auto g = [&](double t) -> cplx {
    const double ft = f(t);
    if (ft == 0.0) return {};
    const cplx phi = z.rho.is_real() ? spherical_phi(mz, t, inner)
                                     : spherical_phi_rho1_closed(mz.z(), t);
    return ft * phi * detail::radial_density(z.rho, t);
  };
  return detail::integrate_pieces(g, detail::split_points(f), opt);
}

/// Same transform but with the rho = 1 spherical function also taken from
/// the K-integral (slow; used to cross-check the closed form).
inline cplx transform_cartan_quadrature(const RadialProfile& f, const SphericalParam& z,
                                        const quad::Options& opt = transform_default_options()) {
  const SphericalParam mz{-z.sigma, -z.tau, z.rho};
  auto g = [&](double t) -> cplx {
    const double ft = f(t);
    if (ft == 0.0) return {};
    return ft * spherical_phi(mz, t) * detail::radial_density(z.rho, t);
  };
  return detail::integrate_pieces(g, detail::split_points(f), opt);
}

/// Total Haar mass of a radial profile.
inline double profile_mass(const RadialProfile& f, RhoParam rho,
                           const quad::Options& opt = transform_default_options()) {
  double sum = 0.0;
  const auto pts = detail::split_points(f);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    sum += quad::integrate([&](double t) { return f(t) * detail::radial_density(rho, t); }, pts[i],
                           pts[i + 1], opt)
               .value;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Test functions.

/// f_{1,r}(a_t) = r^{-(2 rho + 1)/2} eta(t / r).
inline RadialProfile f1_profile(RhoParam rho, double r, double delta_prime) {
  if (!(r > 0 && r < 1)) throw DomainError("f1_profile: r must lie in (0, 1)");
  const double scale = std::pow(r, -(2.0 * rho.value() + 1.0) / 2.0);
  RadialProfile p;
  p.eval = [=](double t) { return scale * bump_eta(delta_prime, t / r); };
  p.support = r;
  p.tag = "f1";
  p.breaks = {(1.0 - delta_prime) * r, (1.0 - delta_prime / 2.0) * r};
  return p;
}

/// omega_r(a_t) = r^{-d} eta(t / r) with d = 2 rho + 1.
inline RadialProfile omega_profile(RhoParam rho, double r, double delta_prime) {
  if (!(r > 0 && r <= 1)) throw DomainError("omega_profile: r must lie in (0, 1]");
  const double scale = std::pow(r, -(2.0 * rho.value() + 1.0));
  RadialProfile p;
  p.eval = [=](double t) { return scale * bump_eta(delta_prime, t / r); };
  p.support = r;
  p.tag = "omega";
  p.breaks = {(1.0 - delta_prime) * r, (1.0 - delta_prime / 2.0) * r};
  return p;
}

/// Spherical transform of omega_r through the kernel formula on n x a:
///   int int omega_r(n_y a_h) e^{-(z + 1/2) h} dy dh,
/// with n_y = [[1, y], [0, 1]] and a_h = diag(e^{h/2}, e^{-h/2}). The
/// Lebesgue measure dy dh is 2 pi times the Cartan-normalised Haar measure
/// (sinh t dt with probability measure on K), so the result is divided by 2 pi.
inline cplx transform_iwasawa(double delta_prime, double r, const SphericalParam& z,
                              const quad::Options& opt = transform_default_options()) {
  if (!z.rho.is_real()) throw DomainError("transform_iwasawa: only rho = 1/2 is supported");
  if (!(r > 0 && r <= 1)) throw DomainError("transform_iwasawa: r must lie in (0, 1]");
  const double scale = 1.0 / (r * r);
  const double sr = std::sinh(r / 2.0), sr2 = sr * sr;
  const cplx expo = -(z.z() + 0.5);

  // cosh t - 1 = 2 sinh^2(h/2) + y^2 e^{-h} / 2.
  auto inner = [&](double h) -> cplx {
    const double sh = std::sinh(h / 2.0);
    const double room = sr2 - sh * sh;
    if (!(room > 0)) return {};
    const double ymax = std::sqrt(4.0 * std::exp(h) * room);
    const double emh = std::exp(-h);
    auto fy = [&](double y) {
      const double cm1 = 2.0 * sh * sh + 0.5 * y * y * emh;
      const double t = 2.0 * std::asinh(std::sqrt(cm1 / 2.0));
      return scale * bump_eta(delta_prime, t / r);
    };
    quad::Options o = opt;
    o.abs_tol = opt.abs_tol * 1e-2;
    const double val = 2.0 * quad::integrate(fy, 0.0, ymax, o).value;
    return val * std::exp(expo * h);
  };
  const double pi2 = 2.0 * std::numbers::pi;
  cplx sum{};
  const double hs[] = {-r, -(1.0 - delta_prime) * r, 0.0, (1.0 - delta_prime) * r, r};
  for (int i = 0; i < 4; ++i) sum += quad::integrate(inner, hs[i], hs[i + 1], opt).value;
  return sum / pi2;
}

/// eta_R-hat(2 rho z) = int eta(t) e^{2 rho R z t} dt: the spherical transform of f_{2,R}.
inline cplx f2_transform(double R, const SphericalParam& z, double delta_prime,
                         const quad::Options& opt = {1e-14, 1e-12, 2'000'000}) {
  if (!(R >= 1)) throw DomainError("f2_transform: R must be >= 1");
  const cplx w = 2.0 * z.rho.value() * R * z.z();
  // eta is even: int_{-1}^1 eta e^{wt} = 2 int_0^1 eta cosh(wt).
  auto g = [&](double t) -> cplx { return 2.0 * bump_eta(delta_prime, t) * std::cosh(w * t); };
  const double pts[] = {0.0, 1.0 - delta_prime, 1.0 - delta_prime / 2.0, 1.0};
  cplx sum{};
  for (int i = 0; i < 3; ++i) sum += quad::integrate(g, pts[i], pts[i + 1], opt).value;
  return sum;
}

/// int eta(t) e^{rho R t} dt: the total mass of f_{2,R}.
inline double f2_integral(double R, RhoParam rho, double delta_prime) {
  return f2_transform(R, SphericalParam::complementary(0.5, rho), delta_prime).real();
}

// ---------------------------------------------------------------------------
// Decay constants and integrability.

struct DecaySample {
  double tau = 0.0;
  double value = 0.0;  // |f-hat|
};

/// sup over the grid of |f-hat(tau)| (1 + scale |tau|)^N / normalizer.
inline double decay_constant(const std::vector<DecaySample>& values, double scale, int N,
                             double normalizer) {
  if (values.empty()) throw DomainError("decay_constant: empty grid");
  if (!(normalizer > 0)) throw DomainError("decay_constant: normalizer must be positive");
  double c = 0.0;
  for (const auto& v : values) {
    c = std::max(c, v.value * std::pow(1.0 + scale * std::abs(v.tau), N) / normalizer);
  }
  return c;
}

/// {0} together with 63 points of scale * tau log-spaced on [0.5, 64].
inline std::vector<double> decay_tau_grid(double scale, int points = 64) {
  if (!(scale > 0) || points < 2) throw DomainError("decay_tau_grid: bad arguments");
  std::vector<double> g{0.0};
  const double lo = std::log(0.5), hi = std::log(64.0);
  for (int k = 0; k < points - 1; ++k) {
    const double u = std::exp(lo + (hi - lo) * k / (points - 2));
    g.push_back(u / scale);
  }
  return g;
}

/// p+(pi_z) = 2 / (1 - 2 sigma); infinite for the trivial representation.
inline double p_plus(const SphericalParam& z) {
  if (!z.in_unitary_dual()) throw DomainError("p_plus: parameter outside the unitary spherical dual");
  if (z.tau != 0.0) return 2.0;
  if (z.sigma == 0.5) return std::numeric_limits<double>::infinity();
  return 2.0 / (1.0 - 2.0 * z.sigma);
}

// ---------------------------------------------------------------------------
// Convolution of radial profiles.

/// (f * g)(a_s) = int_0^inf f(a_t) (sinh t)^{2 rho} [mean over K of g at
/// distance d(s, t, th)] dt, with cosh d = cosh s cosh t - sinh s sinh t cos th.
inline double convolve_radial(const RadialProfile& f, const RadialProfile& g, RhoParam rho, double s,
                              const quad::Options& opt = {1e-12, 1e-10, 4'000'000}) {
  auto outer = [&](double t) -> double {
    const double ft = f(t);
    if (ft == 0.0) return 0.0;
    const double ss = std::sinh(s), st = std::sinh(t);
    // Distance is an increasing function of th on [0, pi]; integrate only
    // where it lies inside the support of g.
    auto dist_at = [&](double th) {
      // cosh d - 1 = cosh(s - t) - 1 + sinh s sinh t (1 - cos th)
      const double half = std::sinh((s - t) / 2.0);
      const double cm1 = 2.0 * half * half + ss * st * 2.0 * std::sin(th / 2) * std::sin(th / 2);
      return 2.0 * std::asinh(std::sqrt(cm1 / 2.0));
    };
    if (std::abs(s - t) > g.support) return 0.0;
    double th_max = std::numbers::pi;
    if (dist_at(std::numbers::pi) > g.support) {
      double lo = 0.0, hi = std::numbers::pi;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dist_at(mid) > g.support ? hi : lo) = mid;
      }
      th_max = hi;
    }
    double mean;
    if (rho.is_real()) {
      mean = quad::integrate([&](double th) { return g(dist_at(th)); }, 0.0, th_max, opt).value /
             std::numbers::pi;
    } else {
      mean = quad::integrate([&](double th) { return g(dist_at(th)) * std::sin(th) / 2.0; }, 0.0,
                             th_max, opt)
                 .value;
    }
    return ft * mean * detail::radial_density(rho, t);
  };
  const auto pts = detail::split_points(f);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += quad::integrate(outer, pts[i], pts[i + 1], opt).value;
  return sum;
}

}  // namespace hyperlat
