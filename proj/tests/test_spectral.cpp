#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hyperlat/spectral.hpp"

using namespace hyperlat;

namespace {

constexpr double kDelta = 0.1;
const RhoParam kReal = RhoParam::real();
const RhoParam kCplx = RhoParam::complex();

// Periodic trapezoid rule over the full circle: spectrally accurate for the
// smooth periodic integrand, and independent of the adaptive integrator.
cplx phi_trapezoid(cplx z, double t, int n = 4096) {
  cplx s{};
  for (int k = 0; k < n; ++k) {
    const double th = 2 * std::numbers::pi * k / n;
    const double c = std::cos(th), si = std::sin(th);
    s += std::exp((z - 0.5) * std::log(std::exp(t) * c * c + std::exp(-t) * si * si));
  }
  return s / static_cast<double>(n);
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(BumpEta, Examples) {
  EXPECT_DOUBLE_EQ(bump_eta(kDelta, 0.0), 1.0);
  EXPECT_EQ(bump_eta(kDelta, 1.0), 0.0);
  EXPECT_EQ(bump_eta(kDelta, -1.0), 0.0);
  EXPECT_NEAR(bump_eta(kDelta, 1 - kDelta / 2), 0.5, 1e-9);
  EXPECT_THROW(bump_eta(0.0, 0.0), DomainError);
}

TEST(BumpEta, ShapeProperties) {
  for (double t = -1.2; t <= 1.2; t += 0.001) {
    const double v = bump_eta(kDelta, t);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v, bump_eta(kDelta, -t));
    if (std::abs(t) <= 1 - kDelta) {
      EXPECT_NEAR(v, 1.0, 1e-12);
    }
    if (std::abs(t) >= 1) {
      EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(BumpEta, MatchesDirectConvolution) {
  // eta(t) = int_{-L}^{L} m_w(t - s) ds with the normalised mollifier.
  const double w = kDelta / 2, L = 1 - w;
  auto m = [w](double x) {
    const double u = x / w;
    return std::abs(u) < 1 ? std::exp(-1 / (1 - u * u)) : 0.0;
  };
  const double norm = quad::integrate(m, -w, w, {1e-15, 1e-14, 100000}).value;
  for (double t : {0.9, 0.93, 0.95, 0.97, 0.99}) {
    const double ref =
        quad::integrate([&](double s) { return m(t - s); }, std::max(-L, t - w), std::min(L, t + w),
                        {1e-15, 1e-14, 100000})
            .value /
        norm;
    EXPECT_NEAR(bump_eta(kDelta, t), ref, 1e-9);
  }
}

TEST(IwasawaA, Examples) {
  EXPECT_NEAR(iwasawa_a(diag_flow(1.7)), 1.7, 1e-14);
  EXPECT_NEAR(iwasawa_a(RealMat{1, 3.5, 0, 1}), 0.0, 1e-15);
  EXPECT_THROW(iwasawa_a(RealMat{2, 0, 0, 2}), DomainError);
}

TEST(IwasawaA, DecompositionReconstructs) {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> g(0, 1);
  for (int n = 0; n < 1000; ++n) {
    const double a = g(rng) + 0.1, b = g(rng), c = g(rng);
    const RealMat M{a, b, c, (1 + b * c) / a};
    const KANDecomposition k = iwasawa_decompose(M);
    const RealMat R = rotation(k.theta) * diag_flow(k.t) * RealMat{1, k.y, 0, 1};
    EXPECT_LE(std::sqrt(frobenius2(R - M)), 1e-9 * std::max(1.0, std::sqrt(frobenius2(M))));
  }
}

TEST(SphericalPhi, TrivialParameterIsOne) {
  for (double t = 0; t <= 10; t += 0.25) {
    EXPECT_NEAR(std::abs(spherical_phi({0.5, 0, kReal}, t) - 1.0), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(spherical_phi({0.5, 0, kCplx}, t) - 1.0), 0.0, 1e-8);
  }
  EXPECT_EQ(spherical_phi({0.1, 3.0, kReal}, 0.0), cplx(1.0, 0.0));
}

TEST(SphericalPhi, RealRankOneMatchesTrapezoid) {
  for (cplx z : {cplx(0, 0), cplx(0, 1.5), cplx(0.3, 0), cplx(0.2, 4.0)}) {
    for (double t : {0.1, 1.0, 4.0}) {
      EXPECT_LT(rel(spherical_phi({z.real(), z.imag(), kReal}, t), phi_trapezoid(z, t)), 1e-10);
    }
  }
}

TEST(SphericalPhi, ComplexRankOneClosedForm) {
  for (double tau : {0.0, 0.5, 2.0, 8.0}) {
    for (double t : {0.05, 0.5, 2.0, 6.0}) {
      const cplx q = spherical_phi({0, tau, kCplx}, t);
      const cplx c = spherical_phi_rho1_closed({0, tau}, t);
      EXPECT_LT(std::abs(q - c), 1e-8) << tau << " " << t;
      if (tau > 0) {
        EXPECT_NEAR(c.real(), std::sin(2 * tau * t) / (2 * tau * std::sinh(t)), 1e-13);
      }
    }
  }
  EXPECT_LT(std::abs(spherical_phi({0.3, 0, kCplx}, 1.3) - spherical_phi_rho1_closed({0.3, 0}, 1.3)), 1e-8);
}

TEST(SphericalPhi, TemperedBoundedByOne) {
  for (RhoParam rho : {kReal, kCplx}) {
    for (double tau : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      for (double t = 0; t <= 10; t += 0.5) EXPECT_LE(std::abs(spherical_phi({0, tau, rho}, t)), 1 + 1e-10);
    }
  }
}

TEST(Transform, TrivialParameterGivesMass) {
  for (RhoParam rho : {kReal, kCplx}) {
    const RadialProfile f = f1_profile(rho, 0.5, kDelta);
    EXPECT_NEAR(transform_cartan(f, {0.5, 0, rho}).real(), profile_mass(f, rho), 1e-10);
  }
}

TEST(Transform, PaleyWienerSymmetry) {
  for (RhoParam rho : {kReal, kCplx}) {
    const RadialProfile f = omega_profile(rho, 0.3, kDelta);
    for (cplx z : {cplx(0, 2), cplx(0.25, 0), cplx(0.1, 5)}) {
      const cplx a = transform_cartan(f, {z.real(), z.imag(), rho});
      const cplx b = transform_cartan(f, {-z.real(), -z.imag(), rho});
      EXPECT_LT(std::abs(a - b), 1e-8 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(Transform, SmallTestFunctionMassScaling) {
  for (RhoParam rho : {kReal, kCplx}) {
    const double d = 2 * rho.value() + 1;
    std::vector<double> ratios;
    for (double r : {0.5, 0.1, 0.02}) ratios.push_back(profile_mass(f1_profile(rho, r, kDelta), rho) / std::pow(r, d / 2));
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    EXPECT_LT(*hi / *lo, 1.5);
  }
}

TEST(Transform, ComplexClosedFormAgreesWithQuadrature) {
  const RadialProfile f = f1_profile(kCplx, 0.5, kDelta);
  for (double tau : {0.0, 3.0}) {
    const SphericalParam z{0, tau, kCplx};
    EXPECT_LT(std::abs(transform_cartan(f, z) - transform_cartan_quadrature(f, z)), 1e-8);
  }
}

TEST(Transform, IwasawaMatchesCartan) {
  for (double r : {1.0, 0.3, 0.1}) {
    const RadialProfile w = omega_profile(kReal, r, kDelta);
    for (int k = 0; k < 20; k += 4) {
      const SphericalParam z{0, 15.0 / r * k / 19.0, kReal};
      const cplx a = transform_iwasawa(kDelta, r, z), b = transform_cartan(w, z);
      EXPECT_LT(std::abs(a - b), 1e-6 * std::abs(b)) << r << " " << z.tau;
    }
  }
}

TEST(Transform, IwasawaPositiveAtZero) {
  const cplx v = transform_iwasawa(kDelta, 1.0, {0, 0, kReal});
  EXPECT_GT(v.real(), 0.0);
  EXPECT_NEAR(v.imag(), 0.0, 1e-14);
  EXPECT_THROW(transform_iwasawa(kDelta, 1.0, {0, 0, kCplx}), DomainError);
}

TEST(Transform, ConvolutionSquareIsNonNegative) {
  const RadialProfile f = f1_profile(kReal, 0.5, kDelta);
  RadialProfile ff;
  ff.eval = [&](double s) { return convolve_radial(f, f, kReal, s, {1e-11, 1e-9, 400000}); };
  ff.support = 1.0;
  ff.breaks = {0.5};
  const quad::Options opt{1e-10, 1e-8, 400000};
  for (cplx z : {cplx(0, 0), cplx(0, 3)}) {
    const SphericalParam p{z.real(), z.imag(), kReal};
    const cplx lhs = transform_cartan(ff, p, opt);
    const cplx fh = transform_cartan(f, p);
    EXPECT_LT(std::abs(lhs - std::norm(fh)), 1e-6 * std::norm(fh));
  }
}

TEST(F2, IntegralAndTransformAgree) {
  for (RhoParam rho : {kReal, kCplx}) {
    for (double R : {2.0, 4.0, 8.0}) {
      EXPECT_NEAR(f2_transform(R, {0.5, 0, rho}, kDelta).real(), f2_integral(R, rho, kDelta),
                  1e-12 * f2_integral(R, rho, kDelta));
    }
  }
  EXPECT_THROW(f2_transform(0.5, {0, 0, kReal}, kDelta), DomainError);
}

TEST(F2, MassBounds) {
  for (RhoParam rho : {kReal, kCplx}) {
    for (double R : {2.0, 4.0, 8.0}) {
      const double I = f2_integral(R, rho, kDelta), rr = rho.value() * R;
      EXPECT_GT(I / std::exp((1 - kDelta) * rr), 0.1);
      EXPECT_LT(I / std::exp(rr), 2.0);
    }
  }
}

TEST(F2, TemperedDecayConstantsStable) {
  for (int N : {2, 4}) {
    std::vector<double> cs;
    for (double R : {2.0, 4.0, 8.0}) {
      std::vector<DecaySample> v;
      for (double tau : decay_tau_grid(R)) v.push_back({tau, std::abs(f2_transform(R, {0, tau, kReal}, kDelta))});
      cs.push_back(decay_constant(v, R, N, 1.0));
    }
    const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
    EXPECT_LT(*hi / *lo, 3.0) << N;
  }
}

TEST(DecayConstant, Examples) {
  EXPECT_DOUBLE_EQ(decay_constant({{0, 2.5}, {3, 2.5}, {10, 2.5}}, 1.0, 0, 1.0), 2.5);
  EXPECT_DOUBLE_EQ(decay_constant({{1, 1.0}}, 1.0, 2, 2.0), 2.0);
  EXPECT_THROW(decay_constant({}, 1.0, 2, 1.0), DomainError);
  const auto g = decay_tau_grid(0.5);
  EXPECT_EQ(g.size(), 64u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_NEAR(g.back(), 128.0, 1e-9);
}

TEST(PPlus, Examples) {
  EXPECT_EQ(p_plus({0, 1.0, kReal}), 2.0);
  EXPECT_EQ(p_plus({0, 0, kReal}), 2.0);
  EXPECT_TRUE(std::isinf(p_plus({0.5, 0, kReal})));
  EXPECT_DOUBLE_EQ(p_plus({0.25, 0, kReal}), 4.0);
  EXPECT_THROW(p_plus({0.7, 0, kReal}), DomainError);
}
