#include <gtest/gtest.h>

#include "normpuf/optim.hpp"

using namespace normpuf;
using namespace normpuf::optim;

namespace {

struct Quadratic {
  Vector target;
  Objective fn() const {
    return [t = target](const Vector& z) { return -(1.0 - (z - t).squaredNorm()); };
  }
};

Quadratic make_quadratic(int m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  Vector t(m);
  for (auto& v : t) v = nd(rng);
  return {t};
}

enum class Algo { nm, powell, cg };

Result run(Algo a, const Objective& fn, const Vector& x0, const Vector& steps, const Options& o) {
  switch (a) {
    case Algo::nm: return nelder_mead(fn, x0, steps, o, 1);
    case Algo::powell: return powell(fn, x0, steps, o);
    case Algo::cg: return conjugate_gradient(fn, x0, steps, o);
  }
  return {};
}

void expect_quadratic_solved(Algo a, int m, std::uint64_t seed) {
  const auto q = make_quadratic(m, seed);
  Options o;
  o.max_evals = 50 * static_cast<std::size_t>(m);
  o.stop_below = -(1.0 - 1e-8);  // ‖z − z*‖ ≤ 1e-4
  const auto r = run(a, q.fn(), Vector::Zero(m), Vector::Ones(m), o);
  EXPECT_EQ(r.reason, StopReason::target_reached) << "m=" << m << " seed=" << seed;
  EXPECT_LE((r.x - q.target).norm(), 1e-4) << "m=" << m;
  EXPECT_LE(r.evals, o.max_evals);
}

}  // namespace

TEST(Quadratic, NelderMeadLowDimensions) {
  for (int m = 1; m <= 5; ++m)
    for (std::uint64_t s = 0; s < 3; ++s) expect_quadratic_solved(Algo::nm, m, 10 * m + s);
}

TEST(Quadratic, PowellUpToLatentSize) {
  for (int m : {1, 2, 5, 8, 16, 31})
    for (std::uint64_t s = 0; s < 3; ++s) expect_quadratic_solved(Algo::powell, m, 10 * m + s);
}

TEST(Quadratic, ConjugateGradientUpToLatentSize) {
  for (int m : {1, 2, 5, 8, 16, 31, 36})
    for (std::uint64_t s = 0; s < 3; ++s) expect_quadratic_solved(Algo::cg, m, 10 * m + s);
}

TEST(Quadratic, ConvergesWithoutTarget) {
  const auto q = make_quadratic(3, 5);
  Options o;
  o.max_evals = 5000;
  for (Algo a : {Algo::nm, Algo::powell, Algo::cg}) {
    const auto r = run(a, q.fn(), Vector::Zero(3), Vector::Ones(3), o);
    EXPECT_EQ(r.reason, StopReason::converged);
    EXPECT_LT((r.x - q.target).norm(), 1e-5);
  }
}

TEST(Optim, BudgetAndTrajectory) {
  const auto q = make_quadratic(4, 6);
  Options o;
  o.max_evals = 17;
  for (Algo a : {Algo::nm, Algo::powell, Algo::cg}) {
    const auto r = run(a, q.fn(), Vector::Zero(4), Vector::Ones(4), o);
    EXPECT_EQ(r.evals, 17u);
    EXPECT_EQ(r.reason, StopReason::budget_exhausted);
    ASSERT_EQ(r.best_trajectory.size(), r.evals);
    for (std::size_t i = 1; i < r.best_trajectory.size(); ++i)
      ASSERT_LE(r.best_trajectory[i], r.best_trajectory[i - 1]);
    EXPECT_DOUBLE_EQ(r.f, r.best_trajectory.back());
  }
}

TEST(Optim, ExactEvaluationCounting) {
  std::size_t calls = 0;
  Objective fn = [&](const Vector& z) {
    ++calls;
    return z.squaredNorm() + std::sin(3 * z[0]);
  };
  Options o;
  o.max_evals = 300;
  for (Algo a : {Algo::nm, Algo::powell, Algo::cg}) {
    calls = 0;
    const auto r = run(a, fn, Vector::Constant(3, 0.7), Vector::Constant(3, 0.2), o);
    EXPECT_EQ(r.evals, calls);
  }
}

TEST(NelderMead, Rosenbrock) {
  Objective rb = [](const Vector& z) { return 100 * std::pow(z[1] - z[0] * z[0], 2) + std::pow(1 - z[0], 2); };
  Options o;
  o.max_evals = 5000;
  const auto r = nelder_mead(rb, Vector::Constant(2, -1.0), Vector::Constant(2, 0.5), o);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, DegenerateSimplexReported) {
  const auto q = make_quadratic(3, 1);
  Vector steps = Vector::Ones(3);
  steps[1] = 0.0;
  try {
    (void)nelder_mead(q.fn(), Vector::Zero(3), steps, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_simplex);
  }
}

TEST(NelderMead, SeedOnlyMattersAfterRestart) {
  const auto q = make_quadratic(4, 2);
  Options o;
  o.max_evals = 200;
  const auto a = nelder_mead(q.fn(), Vector::Zero(4), Vector::Ones(4), o, 1);
  const auto b = nelder_mead(q.fn(), Vector::Zero(4), Vector::Ones(4), o, 2);
  EXPECT_EQ(a.restarts, 0);
  EXPECT_EQ(a.best_trajectory, b.best_trajectory);
}

TEST(LineSearch, GoldenFindsParabolaMinimum) {
  for (double c : {-3.0, -0.3, 0.0, 0.4, 7.5}) {
    auto g = [c](double t) { return (t - c) * (t - c); };
    const auto lm = detail::golden_line_search(g, g(0.0), 1.0, 1e-7);
    EXPECT_NEAR(lm.t, c, 1e-6);
  }
}

TEST(Optim, BadDimensions) {
  const auto q = make_quadratic(2, 1);
  EXPECT_THROW((void)nelder_mead(q.fn(), Vector::Zero(2), Vector::Ones(3)), Error);
  EXPECT_THROW((void)powell(q.fn(), Vector::Zero(0), Vector::Ones(0)), Error);
  EXPECT_THROW((void)conjugate_gradient(q.fn(), Vector::Zero(2), Vector::Ones(1)), Error);
}
