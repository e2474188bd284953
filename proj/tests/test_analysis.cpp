#include <gtest/gtest.h>

#include <sstream>

#include "normpuf/analysis.hpp"

using namespace normpuf;

namespace {

/// ln(x) for x > 0 via 2·atanh((x−1)/(x+1)), summed in long double.
long double series_ln(long double x) {
  const long double y = (x - 1) / (x + 1), y2 = y * y;
  long double term = y, sum = 0;
  for (int k = 0; k < 2000; ++k) {
    sum += term / (2 * k + 1);
    term *= y2;
    if (std::abs(term) < 1e-30L) break;
  }
  return 2 * sum;
}

}  // namespace

TEST(Collision, TrivialValues) {
  EXPECT_EQ(collision_log10_probability({1, 1.0, 1.0}), 0.0);
  EXPECT_NEAR(collision_log10_probability({2, 0.5, 1.0}), std::log10(0.25), 1e-15);
}

TEST(Collision, HeadlineValueAgainstSeriesOracle) {
  const long double ref = 40000.0L * (series_ln(0.3L) / series_ln(10.0L));
  const double lp = collision_log10_probability({40000, 0.3, 1.0});
  EXPECT_NEAR(lp, static_cast<double>(ref), 1e-9);
  EXPECT_NEAR(lp, -20915.15, 0.01);
  const auto sci = to_scientific(lp);
  EXPECT_EQ(sci.exponent, -20916);
  const long double frac = ref - std::floor(ref);
  EXPECT_NEAR(sci.mantissa, static_cast<double>(std::pow(10.0L, frac)), 1e-8);
  EXPECT_NEAR(sci.mantissa, 7.08, 0.005);
}

TEST(Collision, InvalidQueries) {
  for (CollisionQuery q : {CollisionQuery{0, 0.3, 1}, CollisionQuery{2, 0, 1}, CollisionQuery{2, 1.5, 1},
                           CollisionQuery{2, -0.1, 1}}) {
    try {
      (void)collision_log10_probability(q);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_query);
    }
  }
}

TEST(MonteCarlo, MatchesFormulaWithinThreeSigma) {
  struct Case {
    std::uint64_t d;
    double eps;
  };
  for (auto c : {Case{1, 0.5}, Case{2, 0.5}, Case{6, 0.6}, Case{3, 0.7}}) {
    const auto est = collision_monte_carlo(c.d, c.eps, 1.0, 200000, 11);
    EXPECT_NEAR(est.p, std::pow(c.eps, c.d), 3 * est.sigma) << c.d;
    EXPECT_EQ(est.samples, 200000u);
  }
}

TEST(MonteCarlo, ThreadIndependentAndDeterministic) {
  const auto a = collision_monte_carlo(4, 0.6, 1.0, 50000, 3, 1);
  const auto b = collision_monte_carlo(4, 0.6, 1.0, 50000, 3, 4);
  EXPECT_EQ(a.hits, b.hits);
}

TEST(MonteCarlo, Infeasible) {
  try {
    (void)collision_monte_carlo(12, 0.1, 1.0, 1000, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::infeasible_estimate);
  }
  EXPECT_THROW((void)collision_monte_carlo(13, 0.9, 1.0, 1000000, 0), Error);
}

TEST(Histogram, Separated) {
  const std::vector<double> m(20, 1.0), u(30, 0.0);
  const auto r = histogram_report(m, u, 10);
  EXPECT_DOUBLE_EQ(r.gap, 1.0);
  EXPECT_EQ(r.overlap, 0u);
  EXPECT_EQ(r.edges.size(), 11u);
  EXPECT_EQ(r.matched.back(), 20u);
  EXPECT_EQ(r.unmatched[5], 30u);
}

TEST(Histogram, CountsSumAndOverlap) {
  const std::vector<double> m{0.9, 0.2, 0.5, -0.99, 1.0}, u{0.3, -0.1, 0.0};
  const auto r = histogram_report(m, u, 7);
  std::size_t sm = 0, su = 0;
  for (auto v : r.matched) sm += v;
  for (auto v : r.unmatched) su += v;
  EXPECT_EQ(sm, m.size());
  EXPECT_EQ(su, u.size());
  EXPECT_LT(r.gap, 0.0);
  // Matched 0.2 and -0.99 sit at or below max(u) = 0.3; every unmatched value is above min(m) = -0.99.
  EXPECT_EQ(r.overlap, 5u);
}

TEST(Histogram, Errors) {
  const std::vector<double> a{0.1}, none;
  EXPECT_THROW((void)histogram_report(a, none, 5), Error);
  EXPECT_THROW((void)histogram_report(a, a, 0), Error);
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::num(0.5), "0.5");
  EXPECT_EQ(csv::num(std::nan("")), "nan");
  EXPECT_EQ(csv::num(1.0 / 3.0), "0.3333333333");
}

TEST(Csv, SweepHeaderAndRows) {
  SweepRow r;
  r.kind = AttackKind::scribble;
  r.strength = 0.25;
  r.trials = 10;
  r.mean_x = 0.1;
  std::vector<SweepRow> rows{r};
  r.kind = AttackKind::crumple_fold;
  rows.push_back(r);
  std::ostringstream os;
  csv::sweep(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "attack,strength_pct,x_corr_mean,x_corr_std,y_corr_mean,y_corr_std,trials,alignment_failures,coverage");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 16), "scribble,25,0.1,");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 16), "crumple_fold,NA,");
}

TEST(Csv, TraceColumns) {
  AttackTrace t;
  t.rho_trajectory = {0.01, 0.02};
  std::ostringstream os;
  csv::trace(os, t);
  EXPECT_EQ(os.str(), "eval_index,rho_best\n1,0.01\n2,0.02\n");
}
