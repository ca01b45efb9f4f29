#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "neurocount/ssl_kernel.hpp"
#include "oracles.hpp"

using namespace neurocount;
using namespace neurocount::ssl;

TEST(Normalize, TwoRowColumn) {
  Matrix z(2, 1);
  z(0, 0) = 1;
  z(1, 0) = -1;
  const auto a = normalize_batch(z);
  EXPECT_NEAR(a(0, 0), 1.0 / (1.0 + kDefaultEps), 1e-15);
  EXPECT_NEAR(a(1, 0), -1.0 / (1.0 + kDefaultEps), 1e-15);
}

TEST(Normalize, ConstantColumnIsZero) {
  Matrix z(4, 2, 3.0);
  const auto a = normalize_batch(z), b = normalize_batch(z, 0.0);
  for (double v : a.data()) EXPECT_EQ(v, 0.0);
  for (double v : b.data()) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, RandomColumnsStandardized) {
  const auto b = random_batch(8, 4, 3);
  const auto a = normalize_batch(b.z1);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0, var = 0;
    for (std::size_t k = 0; k < 8; ++k) mean += a(k, j);
    mean /= 8;
    for (std::size_t k = 0; k < 8; ++k) var += (a(k, j) - mean) * (a(k, j) - mean);
    EXPECT_LT(std::abs(mean), 1e-12);
    EXPECT_NEAR(std::sqrt(var / 8), 1.0, 1e-4);
  }
}

TEST(CrossCorrelation, SelfAndNegated) {
  auto b = random_batch(16, 5, 4);
  b.z2 = b.z1;
  auto c = cross_correlation(b);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(c(i, i), 1.0, 1e-4);
  for (double& v : b.z2.data()) v = -v;
  c = cross_correlation(b);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(c(i, i), -1.0, 1e-4);
  for (double v : c.data()) EXPECT_LE(std::abs(v), 1.0 + 1e-6);
}

TEST(CrossCorrelation, MatchesTripleLoop) {
  const auto b = random_batch(9, 6, 5);
  const auto c = cross_correlation(b);
  const auto a1 = normalize_batch(b.z1), a2 = normalize_batch(b.z2);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 9; ++k) s += a1(k, i) * a2(k, j);
      EXPECT_NEAR(c(i, j), s / 9, 1e-12);
    }
}

TEST(CrossCorrelation, ShapeMismatch) {
  EmbeddingBatch b{Matrix(4, 3), Matrix(4, 2)};
  try {
    cross_correlation(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Loss, TabulatedValues) {
  EXPECT_EQ(bt_loss(Matrix::identity(4), 0.005), 0.0);
  EXPECT_DOUBLE_EQ(bt_loss(Matrix(3, 3), 1.0), 3.0);
  Matrix c(2, 2, 0.5);
  c(0, 0) = c(1, 1) = 1.0;
  EXPECT_NEAR(bt_loss(c, 0.005), 0.0025, 1e-15);
}

TEST(Loss, MatchesDirectDefinitionAndIsNonNegative) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto b = random_batch(2 + i % 10, 1 + i % 6, rng());
    for (double lambda : {0.0, 0.005, 1.0}) {
      const double l = bt_loss(b, lambda);
      EXPECT_GE(l, 0.0);
      EXPECT_NEAR(l, oracle::bt_loss_direct(b, lambda, kDefaultEps), 1e-10);
    }
  }
}

TEST(Loss, RowPermutationInvariant) {
  auto b = random_batch(10, 4, 7);
  const double before = bt_loss(b);
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  EmbeddingBatch p{Matrix(10, 4), Matrix(10, 4)};
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t j = 0; j < 4; ++j) {
      p.z1(k, j) = b.z1(perm[k], j);
      p.z2(k, j) = b.z2(perm[k], j);
    }
  EXPECT_NEAR(bt_loss(p), before, 1e-12);
}

TEST(Loss, ZeroLambdaIgnoresOffDiagonal) {
  Matrix c = Matrix::identity(3);
  c(0, 0) = 0.7;
  const double base = bt_loss(c, 0.0);
  c(0, 2) = 0.9;
  c(1, 0) = -0.4;
  EXPECT_EQ(bt_loss(c, 0.0), base);
}

TEST(Grad, MatchesFiniteDifferences) {
  const auto b = random_batch(8, 4, 1);
  const auto g = bt_grad(b, 0.005);
  const double h = 1e-5;
  auto probe = b;
  for (int view = 0; view < 2; ++view) {
    Matrix& z = view ? probe.z2 : probe.z1;
    const Matrix& an = view ? g.dz2 : g.dz1;
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t j = 0; j < 4; ++j) {
        const double saved = z(k, j);
        z(k, j) = saved + h;
        const double up = oracle::bt_loss_direct(probe, 0.005, kDefaultEps);
        z(k, j) = saved - h;
        const double down = oracle::bt_loss_direct(probe, 0.005, kDefaultEps);
        z(k, j) = saved;
        const double fd = (up - down) / (2 * h);
        EXPECT_LT(std::abs(fd - an(k, j)) / std::max({std::abs(fd), std::abs(an(k, j)), 1e-3}), 1e-5);
      }
  }
  EXPECT_DOUBLE_EQ(g.loss, bt_loss(b, 0.005));
}

TEST(Grad, CheckerAgreesOnRandomBatches) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = check_gradients(random_batch(12, 6, seed), 0.005);
    EXPECT_LT(r.max_relative_error, 1e-5);
    EXPECT_EQ(r.entries, 2u * 12 * 6);
  }
}

TEST(Grad, StationaryAtIdentityCorrelation) {
  // Columns with disjoint support over +-1 patterns: orthogonal, unit variance.
  Matrix z(4, 2);
  const double pattern[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 2; ++j) z(k, j) = pattern[k][j];
  EmbeddingBatch b{z, z};
  const auto g = bt_grad(b, 0.005, 0.0);
  EXPECT_EQ(bt_loss(b, 0.005, 0.0), 0.0);
  double norm = 0;
  for (double v : g.dz1.data()) norm += v * v;
  for (double v : g.dz2.data()) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-8);
}

TEST(Grad, SymmetricViewsGiveEqualGradients) {
  auto b = random_batch(7, 3, 9);
  b.z2 = b.z1;
  const auto g = bt_grad(b, 0.005);
  for (std::size_t i = 0; i < g.dz1.data().size(); ++i) EXPECT_NEAR(g.dz1.data()[i], g.dz2.data()[i], 1e-14);
}

TEST(Batch, Validation) {
  EXPECT_THROW(bt_loss(EmbeddingBatch{Matrix(1, 3), Matrix(1, 3)}), Error);
  EmbeddingBatch b{Matrix(3, 2), Matrix(3, 2)};
  b.z1(0, 0) = std::nan("");
  EXPECT_THROW(bt_loss(b), Error);
}
