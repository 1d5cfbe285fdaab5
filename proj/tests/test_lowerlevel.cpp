#include <gtest/gtest.h>

#include "mixbil/lowerlevel.hpp"
#include "mixbil/verify.hpp"
#include "oracles.hpp"

using namespace mixbil;

namespace {

Vector ridge(const TaskData& task, double eta) {
  const TaskFactor f = precompute(task, eta);
  return spd_solve(f.chol, f.xty);
}

double gbar_dot_w(const TaskFactor& f, const GroupAssignment& theta, double lambda, std::size_t q,
                  const Vector& gbar) {
  return dot(gbar, lower_solve(f, theta, lambda, q).w());
}

}  // namespace

TEST(Precompute, IdentityDesign) {
  TaskData t{Matrix::identity(2), Vector{3.0, 5.0}};
  const TaskFactor f = precompute(t, 1.0);
  const Vector z = spd_solve(f.chol, Vector{2.0, 4.0});
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_DOUBLE_EQ(z[1], 2.0);
  EXPECT_EQ(f.xty, (Vector{3.0, 5.0}));
}

TEST(Precompute, SmallEtaResidualAndZeroResponse) {
  CounterRng rng(1);
  TaskData t = oracle::random_task(rng, 50, 100);
  const TaskFactor f = precompute(t, 1e-3);
  Matrix a = gram(t.X);
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1e-3;
  Vector b(100);
  for (double& x : b) x = rng.uniform() - 0.5;
  const Vector z = spd_solve(f.chol, b);
  const Vector az = matvec(a, z);
  double r = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) r += (az[i] - b[i]) * (az[i] - b[i]);
  EXPECT_LE(std::sqrt(r), 1e-8 * norm2(b));

  std::fill(t.y.begin(), t.y.end(), 0.0);
  for (double x : precompute(t, 1e-3).xty) EXPECT_EQ(x, 0.0);
}

TEST(LowerSolve, VanishingLambdaGivesRidge) {
  CounterRng rng(2);
  const TaskData t = oracle::random_task(rng, 8, 5);
  const TaskFactor f = precompute(t, 0.1);
  const GroupAssignment theta = oracle::random_feasible(rng, 5, 3);
  const Vector w = lower_solve(f, theta, 1e-12, 50).w();
  const Vector r = ridge(t, 0.1);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], r[i], 1e-6);
}

TEST(LowerSolve, SingleGroupMatchesPrimalFista) {
  CounterRng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const TaskData t = oracle::random_task(rng, 3, 2);
    const double lambda = 0.05 + 0.5 * rng.uniform();
    const TaskFactor f = precompute(t, 0.1);
    const Vector w = lower_solve(f, GroupAssignment(2, 1, 1.0), lambda, 5000).w();
    const Vector ref = primal_group_lasso(t, {0, 0}, 1, lambda, 0.1);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(w[i], ref[i], 1e-6);
  }
}

TEST(LowerSolve, LargeLambdaZeroesSolution) {
  CounterRng rng(4);
  const TaskData t = oracle::random_task(rng, 6, 3);
  const TaskFactor f = precompute(t, 0.1);
  const double lambda = 1.01 * norm2(f.xty);
  // 0 is optimal iff ‖Xᵀy‖ ≤ λ for a single group.
  for (double x : lower_solve(f, GroupAssignment(3, 1, 1.0), lambda, 5000).w())
    EXPECT_NEAR(x, 0.0, 1e-6);
}

TEST(LowerSolve, ForwardWithoutTapeIsIdentical) {
  CounterRng rng(5);
  const TaskData t = oracle::random_task(rng, 10, 6);
  const TaskFactor f = precompute(t, 0.05);
  const GroupAssignment theta = oracle::random_feasible(rng, 6, 3);
  const LowerTape tape = lower_solve(f, theta, 0.2, 40);
  const LowerResult r = lower_forward(f, theta, 0.2, 40);
  EXPECT_EQ(tape.w(), r.w);
  EXPECT_EQ(tape.final_duals(), r.duals);
}

TEST(LowerSolve, DualFeasibilityAndMonotoneAscent) {
  CounterRng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(10), groups = 1 + rng.uniform_index(4);
    const TaskData t = oracle::random_task(rng, 5 + rng.uniform_index(10), d);
    const double eta = 0.01 + 0.2 * rng.uniform(), lambda = 0.01 + rng.uniform();
    const TaskFactor f = precompute(t, eta);
    const GroupAssignment theta = oracle::random_feasible(rng, d, groups);
    const LowerTape tape = lower_solve(f, theta, lambda, 200);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= tape.q; ++j) {
      const auto u = tape.dual(j);
      Duals dj(d, groups, std::vector<double>(u.begin(), u.end()));
      for (std::size_t l = 0; l < groups && j > 0; ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += dj(i, l) * dj(i, l);
        EXPECT_LE(std::sqrt(s), lambda * (1.0 + 1e-12));
      }
      const double value = dual_objective(t, f, theta, dj);
      EXPECT_GE(value, prev - 1e-12 * std::abs(value));
      prev = value;
    }
  }
}

TEST(LowerSolve, PrimalConvergesAndIsUniqueAcrossInitializations) {
  CounterRng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(19), groups = 1 + rng.uniform_index(4);
    const TaskData t = oracle::random_task(rng, d + 10, d);
    const TaskFactor f = precompute(t, 0.1);
    const GroupAssignment theta = oracle::random_feasible(rng, d, groups);
    const double lambda = 0.05 + 0.5 * rng.uniform();
    const Vector w1 = lower_forward(f, theta, lambda, 2000).w;
    const Vector w4 = lower_forward(f, theta, lambda, 8000).w;
    EXPECT_NEAR(primal_objective(t, theta, lambda, 0.1, w1),
                primal_objective(t, theta, lambda, 0.1, w4), 1e-5);

    Duals warm(d, groups);
    for (double& x : warm.data()) x = rng.uniform() - 0.5;
    for (std::size_t l = 0; l < groups; ++l) {  // scale into the λ-ball
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += warm(i, l) * warm(i, l);
      for (std::size_t i = 0; i < d; ++i) warm(i, l) *= 0.9 * lambda / std::sqrt(s);
    }
    const Vector wr = lower_forward(f, theta, lambda, 8000, &warm).w;
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(w4[i], wr[i], 1e-5);
  }
}

TEST(LowerSolve, DivergenceIsReported) {
  CounterRng rng(8);
  TaskFactor f = precompute(oracle::random_task(rng, 4, 2), 0.1);
  f.xty[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    lower_solve(f, GroupAssignment(2, 1, 1.0), 0.1, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite_iterate);
  }
}

TEST(LowerVjp, ZeroCotangent) {
  CounterRng rng(9);
  const TaskFactor f = precompute(oracle::random_task(rng, 3, 2), 0.1);
  const LowerTape tape = lower_solve(f, oracle::random_feasible(rng, 2, 2), 0.1, 20);
  for (double x : lower_vjp(tape, f, Vector(2, 0.0)).data()) EXPECT_EQ(x, 0.0);
}

TEST(LowerVjp, MatchesFiniteDifferences) {
  CounterRng rng(10);
  int checked = 0;
  while (checked < 10) {
    const TaskData t = oracle::random_task(rng, 3, 2);
    const TaskFactor f = precompute(t, 0.05 + 0.5 * rng.uniform());
    const GroupAssignment theta = oracle::random_feasible(rng, 2, 2);
    const double lambda = 0.01 + 0.3 * rng.uniform();
    const LowerTape tape = lower_solve(f, theta, lambda, 20);
    if (oracle::near_projection_boundary(tape)) continue;
    const Vector gbar{rng.uniform() - 0.5, rng.uniform() - 0.5};
    const Matrix rev = lower_vjp(tape, f, gbar);
    const Matrix fd = finite_diff(
        [&](const GroupAssignment& th) { return gbar_dot_w(f, th, lambda, 20, gbar); }, theta, 1e-5);
    EXPECT_LE(oracle::max_abs_diff(rev, fd), 1e-4 * oracle::max_abs(fd) + 1e-10);
    ++checked;
  }
}

TEST(LowerVjp, RidgeLimitHasNoThetaDependence) {
  CounterRng rng(11);
  const TaskFactor f = precompute(oracle::random_task(rng, 5, 3), 0.1);
  const GroupAssignment theta = oracle::random_binary(rng, 3, 2);
  const LowerTape tape = lower_solve(f, theta, 1e-12, 30);
  for (double x : lower_vjp(tape, f, Vector{1.0, -2.0, 0.5}).data()) EXPECT_NEAR(x, 0.0, 1e-6);
}

TEST(LowerVjp, TapeMismatch) {
  CounterRng rng(12);
  const TaskFactor f = precompute(oracle::random_task(rng, 4, 3), 0.1);
  const TaskFactor other = precompute(oracle::random_task(rng, 4, 2), 0.1);
  const LowerTape tape = lower_solve(f, oracle::random_feasible(rng, 3, 2), 0.1, 5);
  try {
    lower_vjp(tape, other, Vector(2, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::tape_mismatch);
  }
}

TEST(PrimalObjective, Examples) {
  CounterRng rng(13);
  const TaskData t = oracle::random_task(rng, 6, 4);
  const GroupAssignment theta = oracle::random_feasible(rng, 4, 2);
  EXPECT_DOUBLE_EQ(primal_objective(t, theta, 0.7, 0.1, Vector(4, 0.0)), 0.5 * dot(t.y, t.y));

  const Vector r = ridge(t, 0.1);
  const double at_ridge = primal_objective(t, theta, 0.0, 0.1, r);
  for (int k = 0; k < 10; ++k) {
    Vector p = r;
    for (double& x : p) x += 0.01 * (rng.uniform() - 0.5);
    EXPECT_LT(at_ridge, primal_objective(t, theta, 0.0, 0.1, p));
  }

  GroupAssignment zero_groups(4, 2, 0.0);
  const Vector w{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(primal_objective(t, zero_groups, 5.0, 0.1, w),
                   primal_objective(t, zero_groups, 0.0, 0.1, w));
}
