#pragma once

// Barlow Twins objective on a pair of embedding batches.
//
//   A_v = standardize(Z_v) column-wise over the batch (population std + eps)
//   C   = A_1^T A_2 / n                      (d x d cross-correlation)
//   L   = sum_i (1 - C_ii)^2 + lambda * sum_i sum_{j != i} C_ij^2
//
// Gradients are propagated analytically back through the standardization
// to the raw embeddings. All arithmetic is double with fixed loop order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "neurocount/error.hpp"

namespace neurocount::ssl {

inline constexpr double kDefaultLambda = 0.005;
inline constexpr double kDefaultEps = 1e-5;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Two views of the same n samples, each an n x d embedding matrix.
struct EmbeddingBatch {
  Matrix z1;
  Matrix z2;

  std::size_t n() const noexcept { return z1.rows(); }
  std::size_t d() const noexcept { return z1.cols(); }
};

inline void validate(const EmbeddingBatch& b) {
  if (b.z1.rows() != b.z2.rows() || b.z1.cols() != b.z2.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "embedding views differ in shape");
  }
  if (b.n() < 2) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 2");
  if (b.d() < 1) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
  for (const auto* m : {&b.z1, &b.z2}) {
    for (double v : m->data()) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite embedding entry");
    }
  }
}

/// Column-wise standardization: (z - mean) / (std + eps), population std.
/// A constant column maps to zeros.
inline Matrix normalize_batch(const Matrix& z, double eps = kDefaultEps) {
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 2");
  Matrix out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += z(k, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) var += (z(k, j) - mean) * (z(k, j) - mean);
    const double std_dev = std::sqrt(var / static_cast<double>(n));
    const double denom = std_dev + eps;
    for (std::size_t k = 0; k < n; ++k) {
      out(k, j) = denom > 0.0 ? (z(k, j) - mean) / denom : 0.0;
    }
  }
  return out;
}

/// a^T b / n for two n x d matrices.
inline Matrix correlate(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  Matrix c(d, b.cols());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
  for (double& v : c.data()) v /= static_cast<double>(n);
  return c;
}

inline Matrix cross_correlation(const EmbeddingBatch& batch, double eps = kDefaultEps) {
  validate(batch);
  return correlate(normalize_batch(batch.z1, eps), normalize_batch(batch.z2, eps));
}

inline double bt_loss(const Matrix& c, double lambda = kDefaultLambda) {
  if (c.rows() != c.cols()) throw Error(ErrorCode::DimensionMismatch, "cross-correlation must be square");
  double on_diag = 0.0;
  double off_diag = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      if (i == j) on_diag += (1.0 - c(i, i)) * (1.0 - c(i, i));
      else off_diag += c(i, j) * c(i, j);
    }
  }
  return on_diag + lambda * off_diag;
}

inline double bt_loss(const EmbeddingBatch& batch, double lambda = kDefaultLambda, double eps = kDefaultEps) {
  return bt_loss(cross_correlation(batch, eps), lambda);
}

struct Gradients {
  double loss = 0.0;
  Matrix dz1;
  Matrix dz2;
};

namespace detail {

/// Backpropagates dL/dA through A = (Z - mean) / (std + eps), per column.
inline Matrix standardize_backward(const Matrix& z, const Matrix& grad_a, double eps) {
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  const double nn = static_cast<double>(n);
  Matrix grad_z(n, d);
  std::vector<double> centered(n);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += z(k, j);
    mean /= nn;
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      centered[k] = z(k, j) - mean;
      var += centered[k] * centered[k];
    }
    const double sigma = std::sqrt(var / nn);
    const double s = sigma + eps;
    if (s <= 0.0) continue;  // constant column with eps = 0: output pinned to 0
    double g_mean = 0.0;
    double g_dot_centered = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      g_mean += grad_a(k, j);
      g_dot_centered += grad_a(k, j) * centered[k];
    }
    g_mean /= nn;
    // d sigma / d z_m = centered_m / (n sigma); zero when the column is constant.
    const double sigma_term = sigma > 0.0 ? g_dot_centered / (nn * sigma * s * s) : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      grad_z(k, j) = (grad_a(k, j) - g_mean) / s - centered[k] * sigma_term;
    }
  }
  return grad_z;
}

}  // namespace detail

/// Loss and exact gradients with respect to the raw embeddings.
inline Gradients bt_grad(const EmbeddingBatch& batch, double lambda = kDefaultLambda, double eps = kDefaultEps) {
  validate(batch);
  const std::size_t n = batch.n();
  const std::size_t d = batch.d();
  const Matrix a1 = normalize_batch(batch.z1, eps);
  const Matrix a2 = normalize_batch(batch.z2, eps);
  const Matrix c = correlate(a1, a2);

  // dL/dC
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      g(i, j) = i == j ? -2.0 * (1.0 - c(i, i)) : 2.0 * lambda * c(i, j);
    }
  }
  // C = A1^T A2 / n  =>  dL/dA1 = A2 G^T / n,  dL/dA2 = A1 G / n
  const double nn = static_cast<double>(n);
  Matrix ga1(n, d), ga2(n, d);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      double s1 = 0.0;
      double s2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s1 += g(i, j) * a2(k, j);
        s2 += a1(k, j) * g(j, i);
      }
      ga1(k, i) = s1 / nn;
      ga2(k, i) = s2 / nn;
    }
  }
  Gradients out;
  out.loss = bt_loss(c, lambda);
  out.dz1 = detail::standardize_backward(batch.z1, ga1, eps);
  out.dz2 = detail::standardize_backward(batch.z2, ga2, eps);
  return out;
}

/// Seeded batch with standard-normal entries.
inline EmbeddingBatch random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingBatch b{Matrix(n, d), Matrix(n, d)};
  for (double& v : b.z1.data()) v = normal(rng);
  for (double& v : b.z2.data()) v = normal(rng);
  return b;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
};

/// Floor of the relative-error denominator; gradients smaller than this are
/// compared in absolute terms.
inline constexpr double kRelativeErrorFloor = 1e-3;

/// Compares bt_grad against central finite differences of the loss.
/// Relative error per entry: |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradientCheck check_gradients(const EmbeddingBatch& batch, double lambda = kDefaultLambda,
                                     double h = 1e-5, double eps = kDefaultEps) {
  const Gradients analytic = bt_grad(batch, lambda, eps);
  GradientCheck result;
  EmbeddingBatch probe = batch;
  for (int view = 0; view < 2; ++view) {
    Matrix& z = view == 0 ? probe.z1 : probe.z2;
    const Matrix& grad = view == 0 ? analytic.dz1 : analytic.dz2;
    for (std::size_t k = 0; k < z.rows(); ++k) {
      for (std::size_t j = 0; j < z.cols(); ++j) {
        const double saved = z(k, j);
        z(k, j) = saved + h;
        const double up = bt_loss(probe, lambda, eps);
        z(k, j) = saved - h;
        const double down = bt_loss(probe, lambda, eps);
        z(k, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double abs_err = std::abs(numeric - grad(k, j));
        const double denom = std::max({std::abs(numeric), std::abs(grad(k, j)), kRelativeErrorFloor});
        result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
        result.max_relative_error = std::max(result.max_relative_error, abs_err / denom);
        ++result.entries;
      }
    }
  }
  return result;
}

}  // namespace neurocount::ssl
