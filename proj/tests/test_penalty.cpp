#include <gtest/gtest.h>

#include "mixbil/penalty.hpp"
#include "mixbil/verify.hpp"
#include "oracles.hpp"
#include "mixbil/lemmas.hpp"

using namespace mixbil;

namespace {

GroupAssignment rows(std::initializer_list<std::initializer_list<double>> rs) {
  GroupAssignment t(rs.size(), rs.begin()->size());
  std::size_t j = 0;
  for (auto r : rs) {
    std::size_t l = 0;
    for (double x : r) t(j, l++) = x;
    ++j;
  }
  return t;
}

}  // namespace

TEST(Phi, Examples) {
  CounterRng rng(1);
  EXPECT_EQ(phi(oracle::random_binary(rng, 5, 3)), 0.0);
  EXPECT_DOUBLE_EQ(phi(GroupAssignment(2, 2, 0.5)), 1.0);
  EXPECT_DOUBLE_EQ(phi(rows({{0.25, 0.75}})), 0.375);
}

TEST(GradPhi, Examples) {
  for (double x : grad_phi(GroupAssignment(3, 2, 0.5)).data()) EXPECT_EQ(x, 0.0);
  const Matrix g = grad_phi(rows({{0.0, 1.0}}));
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(0, 1), -1.0);
}

TEST(GradPhi, MatchesFiniteDifferences) {
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const GroupAssignment theta = oracle::random_feasible(rng, 3, 2);
    const Matrix fd = finite_diff([](const GroupAssignment& t) { return phi(t); }, theta, 1e-6);
    EXPECT_LE(oracle::max_abs_diff(fd, grad_phi(theta)), 1e-6);
  }
}

TEST(DistInf, Examples) {
  CounterRng rng(3);
  EXPECT_EQ(dist_inf_to_bin(oracle::random_binary(rng, 4, 3)), 0.0);
  EXPECT_DOUBLE_EQ(dist_inf_to_bin(rows({{0.6, 0.4}})), 0.4);
  EXPECT_DOUBLE_EQ(dist_inf_to_bin(rows({{0.6, 0.4}, {0.9, 0.1}})), 0.4);
}

TEST(DistInf, MatchesEnumerationOfBinaryAssignments) {
  CounterRng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(4), groups = 1 + rng.uniform_index(4);
    const GroupAssignment theta = oracle::random_feasible(rng, d, groups);
    EXPECT_NEAR(dist_inf_to_bin(theta), oracle::dist_inf_enum(theta), 1e-15);
  }
}

TEST(Snap, Examples) {
  EXPECT_EQ(snap_to_bin(rows({{0.6, 0.4}})), rows({{1.0, 0.0}}));
  EXPECT_EQ(snap_to_bin(rows({{0.5, 0.5}})), rows({{1.0, 0.0}}));
  CounterRng rng(5);
  const GroupAssignment b = oracle::random_binary(rng, 6, 4);
  EXPECT_EQ(snap_to_bin(b), b);
}

TEST(Snap, ZeroPenaltyAndNearestVertexInsideHalfRadius) {
  CounterRng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(6), groups = 2 + rng.uniform_index(5);
    const GroupAssignment theta = oracle::random_feasible(rng, d, groups);
    const GroupAssignment s = snap_to_bin(theta);
    EXPECT_EQ(phi(s), 0.0);
    EXPECT_TRUE(is_feasible(s));
    if (dist_inf_to_bin(theta) < 0.5) {
      double m = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        m = std::max(m, std::abs(s.data()[i] - theta.data()[i]));
      EXPECT_DOUBLE_EQ(m, dist_inf_to_bin(theta));
    }
  }
}

TEST(Phi, IsConcave) {
  CounterRng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(8), groups = 1 + rng.uniform_index(5);
    const GroupAssignment a = oracle::random_feasible(rng, d, groups);
    const GroupAssignment b = oracle::random_feasible(rng, d, groups);
    const double t = rng.uniform();
    GroupAssignment mix(d, groups);
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix.data()[i] = t * a.data()[i] + (1 - t) * b.data()[i];
    EXPECT_GE(phi(mix), t * phi(a) + (1 - t) * phi(b) - 1e-12);
  }
}

TEST(PenaltyLemmas, AllInequalitiesHold) {
  for (const auto& r : lemmas::run_all(1000, 99)) {
    EXPECT_EQ(r.samples, 1000u) << r.name;
    EXPECT_EQ(r.violations, 0u) << r.name << " worst slack " << r.worst;
  }
}
