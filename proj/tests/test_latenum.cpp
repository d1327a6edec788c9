#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hyperlat/latenum.hpp"
#include "test_util.hpp"

using namespace hyperlat;

namespace {

const AlgebraDesc A = preset_q17();

std::set<Coords> canonical_set(const std::vector<QuatElt>& xs) {
  std::set<Coords> s;
  for (const auto& x : xs) s.insert(to_coords(canonical(x)));
  return s;
}

bool in_box(const Coords& c, int B) {
  return std::all_of(c.begin(), c.end(), [B](Int v) { return v >= -B && v <= B; });
}

std::vector<std::vector<double>> read_csv_table(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(GramMatrix, DiagonalExamples) {
  const GramForm g = gram_matrix(A);
  EXPECT_NEAR(g.G[0][0], 4.0, 1e-12);
  EXPECT_NEAR(g.G[2][2], 12.0, 1e-12);
}

TEST(GramMatrix, MatchesGoldenTable) {
  const auto rows = read_csv_table(std::string(HYPERLAT_DATA_DIR) + "/gram_q17.csv");
  ASSERT_EQ(rows.size(), 8u);
  const GramForm g = gram_matrix(A);
  for (std::size_t k = 0; k < 8; ++k) {
    ASSERT_EQ(rows[k].size(), 8u);
    for (std::size_t l = 0; l < 8; ++l) {
      EXPECT_NEAR(g.G[k][l], rows[k][l], 1e-12 * std::max(1.0, std::abs(rows[k][l]))) << k << "," << l;
      EXPECT_EQ(g.G[k][l], g.G[l][k]);
    }
  }
}

TEST(GramMatrix, FormEqualsFrobeniusSum) {
  const GramForm g = gram_matrix(A);
  std::mt19937_64 rng(30);
  for (int n = 0; n < 500; ++n) {
    const QuatElt x = testutil::random_quat(rng, 20);
    std::array<double, 8> c{};
    const Coords ic = to_coords(x);
    for (std::size_t k = 0; k < 8; ++k) c[k] = static_cast<double>(ic[k]);
    const double ref = frobenius2(embed_matrix(x, 1, A)) + frobenius2(embed_matrix(x, 2, A));
    EXPECT_NEAR(g.eval(c), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(Canonical, PicksPositiveLeadingCoordinate) {
  const QuatElt x{QuadInt(0), QuadInt(-2, 1), {}, {}};
  EXPECT_EQ(canonical(x), quat_neg(x));
  EXPECT_EQ(canonical(quat_neg(x)), quat_neg(x));
  EXPECT_FALSE(is_canonical(Coords{}));
}

TEST(EnumerateUnits, ZeroRadiusGivesIdentity) {
  const auto res = enumerate_units(A, 0, 0);
  ASSERT_EQ(res.elements.size(), 1u);
  EXPECT_EQ(res.elements[0].q, QuatElt::one());
}

TEST(EnumerateUnits, SmallRadiusMatchesBruteForce) {
  // Every unit with both radii <= 2 lies in the box [-2, 2]^8 (max coordinate
  // at radius 3 is 2), so the filtered brute-force scan is an oracle.
  const auto res = enumerate_units(A, 2, 2);
  std::set<Coords> ref;
  for (const auto& q : brute_force_units(A, 2)) {
    const LatticeElement e = make_element(q, A);
    if (e.t1 <= 2 + kRadiusSlack && e.t2 <= 2 + kRadiusSlack) ref.insert(to_coords(canonical(q)));
  }
  std::set<Coords> got;
  for (const auto& e : res.elements) got.insert(e.coords);
  EXPECT_EQ(got, ref);
  EXPECT_EQ(got.size(), 1u);
}

TEST(EnumerateUnits, ElementInvariants) {
  const auto res = enumerate_units(A, 4, 4);
  ASSERT_GT(res.elements.size(), 1u);
  for (const auto& e : res.elements) {
    EXPECT_EQ(quat_norm(e.q, A), QuadInt(1));
    EXPECT_TRUE(is_canonical(e.coords));
    EXPECT_NEAR(e.t1, cartan_radius(embed_matrix(e.q, 1, A)), 1e-9);
    EXPECT_NEAR(e.t2, cartan_radius(embed_matrix(e.q, 2, A)), 1e-9);
    EXPECT_LE(e.t1, 4 + kRadiusSlack);
    EXPECT_LE(e.t2, 4 + kRadiusSlack);
  }
  EXPECT_TRUE(std::is_sorted(res.elements.begin(), res.elements.end(), element_less));
}

class BruteForceOracle : public ::testing::TestWithParam<int> {};

TEST_P(BruteForceOracle, BoxesAgree) {
  const int B = GetParam();
  const auto brute = brute_force_units(A, B);
  for (const auto& q : brute) EXPECT_EQ(quat_norm(q, A), QuadInt(1));
  double R1 = 0, R2 = 0;
  for (const auto& q : brute) {
    const LatticeElement e = make_element(q, A);
    R1 = std::max(R1, e.t1);
    R2 = std::max(R2, e.t2);
  }
  std::set<Coords> got;
  for (const auto& e : enumerate_units(A, R1, R2).elements) {
    if (in_box(e.coords, B)) got.insert(e.coords);
  }
  EXPECT_EQ(got, canonical_set(brute));
}

INSTANTIATE_TEST_SUITE_P(Boxes, BruteForceOracle, ::testing::Values(1, 2));

TEST(BruteForce, ContainsPlusMinusOne) {
  const auto b = brute_force_units(A, 1);
  EXPECT_NE(std::find(b.begin(), b.end(), QuatElt::one()), b.end());
  EXPECT_NE(std::find(b.begin(), b.end(), quat_neg(QuatElt::one())), b.end());
  EXPECT_THROW(brute_force_units(A, 3, 1000), BudgetExceeded);
}

TEST(EnumerateUnits, GroupClosure) {
  const auto small = enumerate_units(A, 4, 4).elements;
  const auto big = enumerate_units(A, 8, 8).elements;
  std::set<Coords> bigset;
  for (const auto& e : big) bigset.insert(e.coords);
  for (const auto& x : small) {
    for (const auto& y : small) {
      const QuatElt p = quat_mul(x.q, y.q, A);
      const LatticeElement e = make_element(p, A);
      EXPECT_LE(e.t1, x.t1 + y.t1 + 1e-9);
      EXPECT_LE(e.t2, x.t2 + y.t2 + 1e-9);
      EXPECT_TRUE(bigset.count(to_coords(canonical(p))));
    }
  }
}

TEST(EnumerateUnits, PartitionIndependent) {
  EnumOptions one, many;
  many.partitions = 5;
  const auto a = enumerate_units(A, 6, 6, one).elements;
  const auto b = enumerate_units(A, 6, 6, many).elements;
  EXPECT_EQ(elements_csv(a, A), elements_csv(b, A));
}

TEST(EnumerateUnits, CongruenceFilter) {
  EnumOptions opt;
  opt.congruence_q = 3;
  const auto all = enumerate_units(A, 7, 7).elements;
  const auto sub = enumerate_units(A, 7, 7, opt).elements;
  std::size_t expect = 0;
  for (const auto& e : all) {
    if (congruence_test(e.q, 3) || congruence_test(quat_neg(e.q), 3)) ++expect;
  }
  EXPECT_EQ(sub.size(), expect);
  for (const auto& e : sub) EXPECT_TRUE(congruence_test(e.q, 3) || congruence_test(quat_neg(e.q), 3));
}

TEST(EnumerateUnits, BudgetExceededIsReported) {
  EnumOptions opt;
  opt.node_budget = 50;
  try {
    enumerate_units(A, 8, 8, opt);
    FAIL() << "expected budget error";
  } catch (const EnumerationBudgetExceeded& e) {
    EXPECT_TRUE(e.partial());
  }
  EXPECT_THROW(enumerate_units(A, -1, 0), DomainError);
}

TEST(CountByRadius, HistogramProperties) {
  const auto h = count_by_radius(A, 8, 80, RadiusStatistic::Max);
  EXPECT_EQ(h.cumulative.front(), 1u);  // edge 0.1
  EXPECT_TRUE(std::is_sorted(h.cumulative.begin(), h.cumulative.end()));
  EXPECT_EQ(h.cumulative.back(), enumerate_units(A, 8, 8).elements.size());
}

TEST(CountByRadius, SumBallMatchesFilteredBox) {
  const auto sum = enumerate_sum_ball(A, 8, 4);
  std::size_t expect = 0;
  for (const auto& e : enumerate_units(A, 8, 8).elements) expect += e.t1 + e.t2 <= 8 + kRadiusSlack;
  EXPECT_EQ(sum.size(), expect);
}

TEST(CountByRadius, GrowthSlopeNearOne) {
  const auto h = count_by_radius(A, 12, 24, RadiusStatistic::Sum);
  const GrowthFit f = fit_growth_exponent(h, 6);
  EXPECT_GT(f.slope, 0.6);
  EXPECT_LT(f.slope, 1.4);
}

TEST(Export, CsvAndCacheRoundTrip) {
  const auto els = enumerate_units(A, 5, 5).elements;
  const std::string csv = elements_csv(els, A);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "c1,cw,ci,ciw,cj,cjw,cij,cijw,t1,t2,norm_check");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), els.size() + 1);

  const auto dir = std::filesystem::temp_directory_path() / "hyperlat_test_cache";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto first = cached_enumeration(A, 5, 5, {}, dir);
  const auto second = cached_enumeration(A, 5, 5, {}, dir);
  EXPECT_EQ(elements_csv(first, A), csv);
  EXPECT_EQ(elements_csv(second, A), csv);
  const std::uint64_t key = enumeration_key(A, 5, 5, std::nullopt);
  EXPECT_THROW(decode_cache(encode_cache(els, key), key + 1, A), Error);
  std::filesystem::remove_all(dir);
}
