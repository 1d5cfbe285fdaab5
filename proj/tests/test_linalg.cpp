#include <gtest/gtest.h>

#include "mixbil/linalg.hpp"
#include "mixbil/rng.hpp"
#include "oracles.hpp"

using namespace mixbil;

namespace {

Matrix random_spd(CounterRng& rng, std::size_t d) {
  Matrix m(d, d);
  for (double& x : m.data()) x = 2.0 * rng.uniform() - 1.0;
  Matrix a = gram(m);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += 1.0;
  return a;
}

double residual(const Matrix& a, const Vector& z, const Vector& b) {
  const Vector az = matvec(a, z);
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += (az[i] - b[i]) * (az[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(SpdFactor, IdentitySolvesToRhs) {
  const auto f = spd_factor(Matrix::identity(3));
  EXPECT_EQ(spd_solve(f, Vector{1, 2, 3}), (Vector{1, 2, 3}));
}

TEST(SpdFactor, DiagonalSystem) {
  Matrix a(2, 2);
  a(0, 0) = a(1, 1) = 2.0;
  const Vector z = spd_solve(spd_factor(a), Vector{4, 6});
  EXPECT_DOUBLE_EQ(z[0], 2.0);
  EXPECT_DOUBLE_EQ(z[1], 3.0);
}

TEST(SpdFactor, ZeroRhsGivesZero) {
  CounterRng rng(3);
  const auto f = spd_factor(random_spd(rng, 5));
  for (double x : spd_solve(f, Vector(5, 0.0))) EXPECT_EQ(x, 0.0);
}

TEST(SpdFactor, RejectsAsymmetricAndIndefinite) {
  Matrix a = Matrix::identity(2);
  a(0, 1) = 0.5;
  try {
    spd_factor(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_symmetric);
  }
  Matrix b = Matrix::identity(2);
  b(1, 1) = -1.0;
  try {
    spd_factor(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_positive_definite);
  }
}

TEST(SpdFactor, DimensionMismatch) {
  const auto f = spd_factor(Matrix::identity(3));
  try {
    spd_solve(f, Vector{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(SpdFactor, ResidualAndReconstructionOnRandomSystems) {
  CounterRng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(49);
    const Matrix a = random_spd(rng, d);
    const auto f = spd_factor(a);
    Vector b(d);
    for (double& x : b) x = 2.0 * rng.uniform() - 1.0;
    const Vector z = spd_solve(f, b);
    EXPECT_LE(residual(a, z, b), 1e-8 * norm2(b)) << "d=" << d;

    const Matrix r = f.reconstruct();
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      scale = std::max(scale, std::abs(a.data()[i]));
      err = std::max(err, std::abs(a.data()[i] - r.data()[i]));
    }
    EXPECT_LE(err, 1e-10 * scale);
  }
}

TEST(SpdFactor, SolvesAreLinear) {
  CounterRng rng(5);
  const Matrix a = random_spd(rng, 8);
  const auto f = spd_factor(a);
  Vector b1(8), b2(8), sum(8);
  for (std::size_t i = 0; i < 8; ++i) {
    b1[i] = rng.uniform();
    b2[i] = rng.uniform();
    sum[i] = b1[i] + b2[i];
  }
  const Vector z1 = spd_solve(f, b1), z2 = spd_solve(f, b2), zs = spd_solve(f, sum);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(zs[i], z1[i] + z2[i], 1e-12);
}

TEST(ProjectSimplex, Examples) {
  EXPECT_EQ(project_simplex(Vector{0.5, 0.5}), (Vector{0.5, 0.5}));
  EXPECT_EQ(project_simplex(Vector{2.0, 0.0}), (Vector{1.0, 0.0}));
  const Vector p = project_simplex(Vector{0.4, 0.2, 0.1});
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  EXPECT_NEAR(p[2], 0.2, 1e-15);
}

TEST(ProjectSimplex, MatchesSupportEnumeration) {
  CounterRng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(4);
    Vector v(n);
    for (double& x : v) x = 4.0 * rng.uniform() - 2.0;
    const Vector p = project_simplex(v);
    const Vector ref = oracle::simplex_projection_enum(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(p[i], 0.0);
      EXPECT_NEAR(p[i], ref[i], 1e-12);
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ProjectSimplex, Idempotent) {
  CounterRng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector v(1 + rng.uniform_index(16));
    for (double& x : v) x = 6.0 * rng.uniform() - 3.0;
    const Vector once = project_simplex(v);
    const Vector twice = project_simplex(once);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(once[i], twice[i], 1e-12);
  }
}
