#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "mixbil/error.hpp"

namespace mixbil {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(Errc::dimension_mismatch, "matrix payload does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() & noexcept { return data_; }
  const std::vector<double>& data() const& noexcept { return data_; }
  std::vector<double> data() && noexcept { return std::move(data_); }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) noexcept {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// y = A x
inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(Errc::dimension_mismatch, "matvec");
  Vector y(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
  return y;
}

/// y = Aᵀ x
inline Vector matvec_t(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw Error(Errc::dimension_mismatch, "matvec_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * x[r];
  }
  return y;
}

/// AᵀA
inline Matrix gram(const Matrix& a) {
  Matrix g(a.cols(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ri = row[i];
      for (std::size_t j = i; j < a.cols(); ++j) g(i, j) += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

/// Lower Cholesky factor of an SPD matrix, stored packed row-major.
class SpdFactor {
 public:
  SpdFactor() = default;

  std::size_t dimension() const noexcept { return n_; }

  /// Solve A z = b in place.
  void solve_in_place(std::span<double> b) const {
    if (b.size() != n_) throw Error(Errc::dimension_mismatch, "spd_solve: rhs has wrong length");
    // L y = b
    for (std::size_t i = 0; i < n_; ++i) {
      const double* li = &lower_[offset(i)];
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
      b[i] = s / li[i];
    }
    // Lᵀ z = y, column sweep so the packed rows are read contiguously
    for (std::size_t i = n_; i-- > 0;) {
      const double* li = &lower_[offset(i)];
      b[i] /= li[i];
      const double zi = b[i];
      for (std::size_t k = 0; k < i; ++k) b[k] -= li[k] * zi;
    }
  }

  /// Reconstructs L Lᵀ.
  Matrix reconstruct() const {
    Matrix a(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k <= j; ++k) s += lower_[offset(i) + k] * lower_[offset(j) + k];
        a(i, j) = a(j, i) = s;
      }
    return a;
  }

 private:
  friend SpdFactor spd_factor(const Matrix& a);

  static constexpr std::size_t offset(std::size_t i) noexcept { return i * (i + 1) / 2; }

  std::size_t n_ = 0;
  std::vector<double> lower_;
};

inline SpdFactor spd_factor(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(Errc::dimension_mismatch, "spd_factor: matrix not square");
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double x : a.data()) {
    if (!std::isfinite(x))
      throw Error(Errc::not_positive_definite, "spd_factor: non-finite entry");
    scale = std::max(scale, std::abs(x));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * std::max(1.0, scale))
        throw Error(Errc::not_symmetric, "spd_factor: asymmetry exceeds 1e-10");

  SpdFactor f;
  f.n_ = n;
  f.lower_.assign(n * (n + 1) / 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* li = &f.lower_[SpdFactor::offset(i)];
    for (std::size_t j = 0; j <= i; ++j) {
      const double* lj = &f.lower_[SpdFactor::offset(j)];
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0))
          throw Error(Errc::not_positive_definite, "spd_factor: non-positive pivot");
        li[i] = std::sqrt(s);
      } else {
        li[j] = s / lj[j];
      }
    }
  }
  return f;
}

inline Vector spd_solve(const SpdFactor& f, std::span<const double> b) {
  Vector z(b.begin(), b.end());
  f.solve_in_place(z);
  return z;
}

/// Euclidean projection onto the probability simplex (sort and threshold).
inline Vector project_simplex(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return {};
  Vector sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cumsum += sorted[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) tau = t;
  }
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - tau, 0.0);
  return out;
}

}  // namespace mixbil
