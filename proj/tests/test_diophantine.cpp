#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hyperlat/diophantine.hpp"

using namespace hyperlat;

namespace {

const AlgebraDesc A = preset_q17();
const RhoParam kR = RhoParam::real();
const RhoParam kC = RhoParam::complex();

const std::vector<double> kEps{0.5, 0.25, 0.125, 0.0625, 0.03125};

}  // namespace

TEST(SplitShape, PigeonholeExponent) {
  EXPECT_DOUBLE_EQ(pigeonhole_exponent(make_split_shape({kR, kR}, 1)), 2.0);
  EXPECT_DOUBLE_EQ(pigeonhole_exponent(make_split_shape({kC, kR}, 1)), 3.0);
  EXPECT_DOUBLE_EQ(pigeonhole_exponent(make_split_shape({kR, kC}, 1)), 1.0);
  EXPECT_THROW(make_split_shape({kR}, 1), DomainError);
}

TEST(SplitShape, ScheduleExamples) {
  const SplitShape s = make_split_shape({kR, kR}, 1);
  EXPECT_NEAR(schedule_r(1e-12, s), 1.0, 1e-11);
  EXPECT_NEAR(schedule_r(2 * std::log(2.0), s), 0.5, 1e-15);
  EXPECT_THROW(schedule_r(0.0, s), DomainError);
}

TEST(SplitShape, VolumeBalanceBounded) {
  for (const auto& s : {make_split_shape({kR, kR}, 1), make_split_shape({kC, kR}, 1),
                        make_split_shape({kR, kC}, 1)}) {
    double lo = 1e300, hi = 0;
    for (double R = 2; R <= 8; R += 0.25) {
      const double b = volume_balance(R, s);
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    EXPECT_LT(hi / lo, 10.0);
  }
}

TEST(ApproxSearch, IdentitySolvesCoincidentPoints) {
  const HypPoint x = HypPoint::h2(0.3, 1.4);
  const double R1 = required_first_radius(x, x, 0.01);
  const ApproxIndex idx(enumerate_units(A, R1, 4).elements, R1, 4);
  const auto r = approx_search(x, x, 0.01, 4, idx);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->R_found, 0.0);
  EXPECT_EQ(r->gamma.q, QuatElt::one());
  EXPECT_NEAR(r->achieved_d1, 0.0, 1e-12);
}

TEST(ApproxSearch, CoverageErrorIsDistinctFromNoSolution) {
  const HypPoint x = HypPoint::base(Model::H2), y = HypPoint::h2(0.5, 1);
  const ApproxIndex idx(enumerate_units(A, 0.3, 8).elements, 0.3, 8);
  EXPECT_THROW(approx_search(x, y, 0.05, 8, idx), CoverageError);
  const double R1 = required_first_radius(x, y, 0.05);
  const ApproxIndex idx2(enumerate_units(A, R1, 8).elements, R1, 8);
  EXPECT_THROW(approx_search(x, y, 0.05, 9, idx2), CoverageError);
  EXPECT_FALSE(approx_search(x, y, 0.05, 8, idx2).has_value());
  EXPECT_THROW(approx_search(x, y, 0.0, 8, idx2), DomainError);
}

TEST(ApproxSearch, RegressionAgainstExhaustiveScan) {
  const HypPoint x = HypPoint::base(Model::H2), y = HypPoint::h2(0.5, 1);
  const double eps = 0.05, Rmax = 14;
  const double R1 = required_first_radius(x, y, eps);
  const auto els = enumerate_units(A, R1, Rmax).elements;
  const ApproxIndex idx(els, R1, Rmax);
  const auto r = approx_search(x, y, eps, Rmax, idx);
  ASSERT_TRUE(r);

  // Exhaustive scan with freshly embedded matrices.
  double best = 1e300;
  for (const auto& e : els) {
    const RealMat g1 = embed_matrix(e.q, 1, A);
    if (dist(act(g1, x), y) <= eps) best = std::min(best, cartan_radius(embed_matrix(e.q, 2, A)));
  }
  EXPECT_NEAR(r->R_found, best, 1e-12);
  EXPECT_NEAR(r->R_found, 12.443236061806628, 1e-9);
  EXPECT_TRUE(verify_solution(*r, x, y, Rmax, A));
}

TEST(ApproxSearch, TieBreakPrefersSmallestCoordinates) {
  // Two synthetic elements with equal t2 and both within eps.
  LatticeElement a, b;
  a.coords = {2, 0, 0, 0, 0, 0, 0, 0};
  b.coords = {1, 5, 0, 0, 0, 0, 0, 0};
  a.matrices.first = b.matrices.first = RealMat::identity();
  a.t2 = b.t2 = 1.0;
  const ApproxIndex idx({a, b}, 10, 10);
  const HypPoint x = HypPoint::base(Model::H2);
  const auto r = approx_search(x, x, 0.1, 5, idx);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->gamma.coords, b.coords);
}

TEST(Fit, LineFitRecoversLine) {
  const LineFit f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-14);
  EXPECT_THROW(fit_line({1, 1}, {0, 1}), DomainError);
}

TEST(ExponentEstimate, CoincidentPointsGiveZeroSlope) {
  const HypPoint x = HypPoint::h2(-0.2, 0.8);
  const double R1 = required_first_radius(x, x, kEps.front());
  const ApproxIndex idx(enumerate_units(A, R1, 4).elements, R1, 4);
  const auto est = exponent_estimate(x, x, kEps, 4, idx);
  ASSERT_TRUE(est.fit);
  EXPECT_EQ(est.fit->slope, 0.0);
  EXPECT_TRUE(is_monotone(est));
  EXPECT_THROW(exponent_estimate(x, x, {0.5, 0.25}, 4, idx), DomainError);
  EXPECT_THROW(exponent_estimate(x, x, {0.25, 0.5, 0.1}, 4, idx), DomainError);
}

TEST(ExponentEstimate, SyntheticLatticeHasExponentTwo) {
  // Each point is quantised to a whole grid level (+- log 4), so the slope is
  // averaged over many targets; eps = 1/2 sits on the coarsest levels and is left out.
  const ApproxIndex idx = synthetic_index(9);
  const std::vector<double> eps{0.25, 0.125, 0.0625, 0.03125, 0.015625};
  std::mt19937_64 rng(20240601);
  std::vector<ExponentEstimate> ests;
  const HypPoint x = HypPoint::base(Model::H2);
  for (int p = 0; p < 200; ++p) {
    const HypPoint y = sample_window(rng, Window{});
    ests.push_back(exponent_estimate(x, y, eps, idx.R2_cover(), idx));
    EXPECT_TRUE(is_monotone(ests.back()));
    EXPECT_TRUE(ests.back().warnings.empty());
  }
  EXPECT_NEAR(pooled_exponent(ests).slope, 2.0, 0.1);
}

TEST(ExponentEstimate, MissingPointsAreFlagged) {
  const HypPoint x = HypPoint::base(Model::H2), y = HypPoint::h2(0.5, 1);
  const double R1 = required_first_radius(x, y, kEps.front());
  const ApproxIndex idx(enumerate_units(A, R1, 6).elements, R1, 6);
  const auto est = exponent_estimate(x, y, kEps, 6, idx);
  std::size_t missing = 0;
  for (const auto& p : est.points) missing += !p.result;
  EXPECT_EQ(est.warnings.size(), missing);
  EXPECT_GT(missing, 0u);
}

TEST(ExponentEstimate, MonotonicityAndLowerBoundStatistic) {
  ExponentEstimate e;
  auto point = [](double eps, double R) {
    ApproxResult r;
    r.epsilon = eps;
    r.R_found = R;
    return ExponentPoint{eps, r};
  };
  e.points = {point(0.5, 1.0), point(0.25, 3.0), ExponentPoint{0.125, std::nullopt}, point(0.0625, 2.0)};
  EXPECT_FALSE(is_monotone(e));
  e.points[3] = point(0.0625, 6.0);
  EXPECT_TRUE(is_monotone(e));
  // (kappa - 0.5) log(1/eps) with kappa = 2: 1.04, 2.08, 4.16.
  EXPECT_NEAR(lower_bound_violation_fraction({e}, 2.0), 1.0 / 3.0, 1e-15);
}

TEST(Sampling, WindowAndDeterminism) {
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const HypPoint p = sample_window(a, Window{});
    EXPECT_GE(p.x(), -1.0);
    EXPECT_LE(p.x(), 1.0);
    EXPECT_GE(p.height, 0.5);
    EXPECT_LE(p.height, 2.0);
    const HypPoint q = sample_window(b, Window{});
    EXPECT_EQ(p.x(), q.x());
    EXPECT_EQ(p.height, q.height);
  }
}

TEST(Synthetic, GridLevels) {
  const ApproxIndex idx = synthetic_index(2);
  ASSERT_EQ(idx.elements().size(), 21u);
  EXPECT_EQ(idx.elements().front().t2, 0.0);
  EXPECT_NEAR(idx.elements().back().t2, std::log(21.0), 1e-15);
  EXPECT_THROW(synthetic_index(13), DomainError);
}

TEST(Output, CsvHeader) {
  const std::string csv = exponent_csv({});
  EXPECT_EQ(csv, "x_re,x_im,y_re,y_im,eps,R_found,zeta_hat\n");
}
