#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixbil/linalg.hpp"

namespace mixbil {

/// Relaxed group membership: d×L, entry (j, l) is the weight of feature j in
/// group l. Feasible when entries lie in [0, 1] and every row sums to one.
using GroupAssignment = Matrix;

inline bool is_feasible(const GroupAssignment& theta, double entry_tol = 1e-12,
                        double row_tol = 1e-9) {
  for (std::size_t j = 0; j < theta.rows(); ++j) {
    double s = 0.0;
    for (double x : theta.row(j)) {
      if (!(x >= -entry_tol && x <= 1.0 + entry_tol)) return false;
      s += x;
    }
    if (std::abs(s - 1.0) > row_tol) return false;
  }
  return true;
}

inline void require_feasible(const GroupAssignment& theta, const char* where) {
  if (!is_feasible(theta))
    throw Error(Errc::infeasible, std::string(where) + ": theta is not a row-stochastic assignment");
}

/// Project each row onto the simplex.
inline void project_rows(GroupAssignment& theta) {
  for (std::size_t j = 0; j < theta.rows(); ++j) {
    auto row = theta.row(j);
    const Vector p = project_simplex(row);
    std::copy(p.begin(), p.end(), row.begin());
  }
}

/// Binarity penalty: sum of θ(1−θ) over all entries. Zero exactly on binary points.
inline double phi(const GroupAssignment& theta) noexcept {
  double s = 0.0;
  for (double x : theta.data()) s += x * (1.0 - x);
  return s;
}

inline Matrix grad_phi(const GroupAssignment& theta) {
  Matrix g(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < theta.size(); ++i) g.data()[i] = 1.0 - 2.0 * theta.data()[i];
  return g;
}

/// ℓ∞ distance from one simplex row to its nearest vertex.
inline double row_dist_to_vertex(std::span<const double> row) noexcept {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < row.size(); ++k) {
    double d = std::abs(1.0 - row[k]);
    for (std::size_t j = 0; j < row.size(); ++j)
      if (j != k) d = std::max(d, std::abs(row[j]));
    best = std::min(best, d);
  }
  return best;
}

/// Exact ℓ∞ distance to the set of binary assignments. The binary set is a
/// product over rows, so this is the max over rows of the distance to each
/// row's nearest vertex.
inline double dist_inf_to_bin(const GroupAssignment& theta) noexcept {
  double m = 0.0;
  for (std::size_t j = 0; j < theta.rows(); ++j) m = std::max(m, row_dist_to_vertex(theta.row(j)));
  return m;
}

/// Replace every row by the vertex of its largest entry; ties go to the lowest index.
inline GroupAssignment snap_to_bin(const GroupAssignment& theta) {
  GroupAssignment out(theta.rows(), theta.cols());
  for (std::size_t j = 0; j < theta.rows(); ++j) {
    const auto row = theta.row(j);
    const auto best = std::max_element(row.begin(), row.end());  // first maximum
    out(j, static_cast<std::size_t>(best - row.begin())) = 1.0;
  }
  return out;
}

inline bool is_binary(const GroupAssignment& theta) noexcept {
  return std::all_of(theta.data().begin(), theta.data().end(),
                     [](double x) { return x == 0.0 || x == 1.0; });
}

/// Uniform 1/L with a small per-entry jitter, re-projected onto the simplex.
template <class Rng>
GroupAssignment initial_assignment(std::size_t d, std::size_t groups, Rng& rng) {
  const double base = 1.0 / static_cast<double>(groups);
  const double jitter = base / 100.0;
  GroupAssignment theta(d, groups, base);
  for (double& x : theta.data()) x += jitter * (2.0 * rng.uniform() - 1.0);
  project_rows(theta);
  return theta;
}

}  // namespace mixbil
