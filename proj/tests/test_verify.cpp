#include <gtest/gtest.h>

#include <sstream>

#include "mixbil/verify_suite.hpp"
#include "oracles.hpp"

using namespace mixbil;

namespace {

/// d = 3, L = 2: features 0 and 1 share identical columns in every split and
/// carry equal true weights.
TaskBundle twin_feature_bundle() {
  TaskBundle b = generate(suite::detail::tiny_cfg(3, 2, 3, 8, 21));
  for (auto& t : b.tasks) {
    t.w_star = {0.8, 0.8, -0.5};
    for (TaskData* s : {&t.train, &t.validation, &t.test}) {
      for (std::size_t r = 0; r < s->X.rows(); ++r) s->X(r, 1) = s->X(r, 0);
      const Vector xw = matvec(s->X, t.w_star);
      for (std::size_t r = 0; r < xw.size(); ++r) s->y[r] = xw[r] + 0.1 * std::sin(3.0 * r + 1.0);
    }
  }
  return b;
}

}  // namespace

TEST(BruteForce, SingleFeatureHasTwoCandidates) {
  std::size_t calls = 0;
  const auto r = brute_force_binary(1, 2, [&](const GroupAssignment& th) {
    ++calls;
    return th(0, 0) == 1.0 ? 2.0 : 1.0;
  });
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(r.evaluated, 2u);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.theta(0, 1), 1.0);
}

TEST(BruteForce, TieGoesToFirstInLexicographicOrder) {
  const auto r = brute_force_binary(2, 3, [](const GroupAssignment&) { return 0.0; });
  EXPECT_EQ(r.evaluated, 9u);
  EXPECT_EQ(r.theta(0, 0), 1.0);
  EXPECT_EQ(r.theta(1, 0), 1.0);
}

TEST(BruteForce, TooLarge) {
  try {
    brute_force_binary(13, 2, [](const GroupAssignment&) { return 0.0; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_large);
  }
  EXPECT_EQ(brute_force_binary(12, 2, [](const GroupAssignment&) { return 0.0; }).evaluated, 4096u);
}

TEST(BruteForce, SymmetricFeaturesEvaluateEqual) {
  const TaskBundle b = twin_feature_bundle();
  const ExactObjective g(b, 0.2, 0.1, 5000);
  GroupAssignment a(3, 2), s(3, 2);
  a(0, 0) = a(1, 1) = a(2, 1) = 1.0;  // features 0 | 1,2
  s(1, 0) = s(0, 1) = s(2, 1) = 1.0;  // features 1 | 0,2
  EXPECT_NEAR(g(a), g(s), 1e-9);
}

TEST(BruteForce, BeatsRandomAssignments) {
  const TaskBundle b = generate(suite::detail::tiny_cfg(4, 2, 4, 10, 22));
  const ExactObjective g(b, 0.1, 0.1, 2000);
  const auto best = brute_force_binary(4, 2, std::cref(g));
  EXPECT_EQ(best.evaluated, 16u);
  CounterRng rng(22);
  for (int k = 0; k < 100; ++k) EXPECT_LE(best.value, g(oracle::random_binary(rng, 4, 2)));
}

TEST(FiniteDiff, ExactOnQuadraticAndLinear) {
  CounterRng rng(23);
  const GroupAssignment theta = suite::detail::interior(rng, 4, 3);
  const Matrix fd = finite_diff([](const GroupAssignment& th) { return phi(th); }, theta, 1e-5);
  EXPECT_LE(oracle::max_abs_diff(fd, grad_phi(theta)), 1e-9);

  Matrix c(4, 3);
  for (double& x : c.data()) x = rng.uniform() - 0.5;
  const Matrix lin = finite_diff(
      [&](const GroupAssignment& th) { return dot(c.data(), th.data()); }, theta, 1e-5);
  EXPECT_LE(oracle::max_abs_diff(lin, c), 1e-9);
  EXPECT_THROW(finite_diff([](const GroupAssignment&) { return 0.0; }, theta, 0.0), Error);
}

TEST(Landscape, CornersCenterAndCsv) {
  ToyObjective toy = make_toy();
  toy.q = 200;
  const double eps = 0.05;
  const auto cells = landscape_grid(toy, eps, 5);
  ASSERT_EQ(cells.size(), 25u);
  for (const auto& c : cells) {
    const bool corner = (c.t11 == 0.0 || c.t11 == 1.0) && (c.t21 == 0.0 || c.t21 == 1.0);
    if (corner) {
      EXPECT_EQ(c.G, c.Gpen);
    }
  }
  const auto& center = cells[2 * 5 + 2];
  EXPECT_EQ(center.t11, 0.5);
  EXPECT_EQ(center.t21, 0.5);
  EXPECT_NEAR(center.Gpen - center.G, 1.0 / eps, 1e-12);

  std::ostringstream os;
  write_landscape_csv(os, cells);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t11,t21,G,Gpen");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 25u);
  EXPECT_THROW(landscape_grid(toy, eps, 1), Error);
}

TEST(Landscape, ToySymmetryUnderGroupRelabeling) {
  const ToyObjective toy = make_toy();
  const ExactObjective g = toy.objective();
  EXPECT_NEAR(g(ToyObjective::assignment(0.3, 0.9)), g(ToyObjective::assignment(0.7, 0.1)), 1e-12);
}

TEST(Suite, PenaltyLemmas) {
  const auto r = suite::penalty_lemmas();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Suite, GradientOracle) {
  const auto r = suite::gradient_oracle();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Suite, LowerLevelOracle) {
  const auto r = suite::lower_oracle();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Suite, ToyAgreement) {
  const auto r = suite::toy_agreement();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Suite, ToyLandscapeAndLocalMinima) {
  const auto v = suite::toy_landscape_vertex(41);
  EXPECT_TRUE(v.passed) << v.detail;
  const auto m = suite::toy_local_minima(41);
  EXPECT_TRUE(m.passed) << m.detail;
}

TEST(Suite, GridArgminMatchesEnumeration) {
  const auto r = suite::grid_vs_enumeration(10, 201);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Suite, ContinuationMatchesEnumeration) {
  const auto r = suite::continuation_vs_enumeration();
  EXPECT_TRUE(r.passed) << r.detail;
}
