#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "mixbil/data.hpp"
#include "mixbil/outer.hpp"
#include "mixbil/upper.hpp"

namespace mixbil {

using ScalarField = std::function<double(const GroupAssignment&)>;

/// Mean validation loss of the lower-level solution computed from zero duals
/// with a fixed (large) iteration count. Pure in θ; used as the reference G.
class ExactObjective {
 public:
  ExactObjective(const TaskBundle& bundle, double lambda, double eta, std::size_t q)
      : bundle_(bundle), lambda_(lambda), q_(q) {
    for (const auto& t : bundle.tasks) factors_.push_back(precompute(t.train, eta));
  }

  double operator()(const GroupAssignment& theta) const {
    double s = 0.0;
    for (std::size_t t = 0; t < bundle_.size(); ++t)
      s += validation_loss(bundle_.tasks[t].validation,
                           lower_forward(factors_[t], theta, lambda_, q_).w);
    return s / static_cast<double>(bundle_.size());
  }

 private:
  const TaskBundle& bundle_;
  double lambda_;
  std::size_t q_;
  std::vector<TaskFactor> factors_;
};

struct BruteForceResult {
  GroupAssignment theta;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
};

/// Exhaustive minimum of G over all binary assignments (feature j in group
/// g_j), visited in lexicographic order of (g_0, …, g_{d−1}); the first
/// minimizer wins ties.
inline BruteForceResult brute_force_binary(std::size_t d, std::size_t groups, const ScalarField& g) {
  double count = std::pow(static_cast<double>(groups), static_cast<double>(d));
  if (count > 4096.0) throw Error(Errc::too_large, "brute_force_binary: more than 4096 assignments");
  BruteForceResult best;
  std::vector<std::size_t> label(d, 0);
  while (true) {
    GroupAssignment theta(d, groups);
    for (std::size_t j = 0; j < d; ++j) theta(j, label[j]) = 1.0;
    const double v = g(theta);
    ++best.evaluated;
    if (v < best.value) {
      best.value = v;
      best.theta = std::move(theta);
    }
    std::size_t j = d;  // odometer, last feature fastest
    while (j > 0 && ++label[j - 1] == groups) label[--j] = 0;
    if (j == 0) break;
  }
  return best;
}

/// Central differences in the ambient d×L space (no re-projection).
inline Matrix finite_diff(const ScalarField& f, GroupAssignment theta, double h) {
  if (!(h > 0.0)) throw Error(Errc::config, "finite_diff: h must be > 0");
  Matrix g(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double x = theta.data()[i];
    theta.data()[i] = x + h;
    const double up = f(theta);
    theta.data()[i] = x - h;
    const double down = f(theta);
    theta.data()[i] = x;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// FISTA on the primal group lasso with known (binary) groups:
///   ½‖Xw−y‖² + (η/2)‖w‖² + λ Σ_g ‖w_g‖.
inline Vector primal_group_lasso(const TaskData& task, const std::vector<std::size_t>& group_of,
                                 std::size_t groups, double lambda, double eta,
                                 std::size_t max_iter = 200000, double tol = 1e-15) {
  const std::size_t d = task.X.cols();
  const Matrix a = gram(task.X);
  const Vector xty = matvec_t(task.X, task.y);
  // Lipschitz constant: power iteration on XᵀX, padded.
  Vector b(d, 1.0);
  double lip = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector ab = matvec(a, b);
    lip = norm2(ab);
    for (std::size_t i = 0; i < d; ++i) b[i] = ab[i] / lip;
  }
  lip = 1.01 * lip + eta;
  Vector w(d, 0.0), z = w, w_old;
  double t = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    w_old = w;
    const Vector az = matvec(a, z);
    Vector v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = z[i] - (az[i] - xty[i] + eta * z[i]) / lip;
    for (std::size_t g = 0; g < groups; ++g) {
      double nrm = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        if (group_of[i] == g) nrm += v[i] * v[i];
      nrm = std::sqrt(nrm);
      const double scale = nrm > lambda / lip ? 1.0 - lambda / lip / nrm : 0.0;
      for (std::size_t i = 0; i < d; ++i)
        if (group_of[i] == g) w[i] = scale * v[i];
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      z[i] = w[i] + (t - 1.0) / t_next * (w[i] - w_old[i]);
      change = std::max(change, std::abs(w[i] - w_old[i]));
    }
    t = t_next;
    if (it > 100 && change < tol) break;
  }
  return w;
}

/// Two features, two groups. Feature 0 and feature 1 belong to different
/// oracle groups and every task uses exactly one of them, so the global
/// minimizers of G are the two labelings that separate the features.
struct ToyObjective {
  TaskBundle bundle;
  double lambda = 0.3;
  double eta = 0.1;
  std::size_t q = 2000;

  /// θ from the free coordinates t11 = θ(0,0), t21 = θ(1,0).
  static GroupAssignment assignment(double t11, double t21) {
    GroupAssignment theta(2, 2);
    theta(0, 0) = t11;
    theta(0, 1) = 1.0 - t11;
    theta(1, 0) = t21;
    theta(1, 1) = 1.0 - t21;
    return theta;
  }

  ExactObjective objective() const { return ExactObjective(bundle, lambda, eta, q); }
};

inline ToyObjective make_toy(std::uint64_t seed = 7, std::size_t tasks = 6, std::size_t n = 10) {
  ToyObjective toy;
  auto& b = toy.bundle;
  b.cfg = GenConfig{2, 2, tasks, n, 0.1, seed};
  b.group_of = {0, 1};
  const CounterRng root(seed);
  boost::random::normal_distribution<double> normal;
  for (std::size_t t = 0; t < tasks; ++t) {
    CounterRng rng = root.substream("toy-regressor", t);
    Task task;
    task.w_star = {0.0, 0.0};
    const double mag = 1.0 + 0.25 * std::abs(normal(rng));
    task.w_star[t % 2] = rng.uniform() < 0.5 ? -mag : mag;
    task.train = detail::draw_split(task.w_star, n, 0.1, root.substream("toy-train", t));
    task.validation = detail::draw_split(task.w_star, n, 0.1, root.substream("toy-validation", t));
    task.test = detail::draw_split(task.w_star, n, 0.1, root.substream("toy-test", t));
    b.tasks.push_back(std::move(task));
  }
  return toy;
}

struct LandscapeCell {
  double t11 = 0.0;
  double t21 = 0.0;
  double G = 0.0;
  double Gpen = 0.0;
};

/// Uniform resolution×resolution grid over [0,1]², t11 major.
inline std::vector<LandscapeCell> landscape_grid(const ToyObjective& toy, double eps,
                                                 std::size_t resolution) {
  if (resolution < 2) throw Error(Errc::config, "landscape_grid: resolution must be >= 2");
  const ExactObjective g = toy.objective();
  std::vector<LandscapeCell> cells;
  cells.reserve(resolution * resolution);
  const double step = 1.0 / static_cast<double>(resolution - 1);
  for (std::size_t a = 0; a < resolution; ++a)
    for (std::size_t b = 0; b < resolution; ++b) {
      const double t11 = (a + 1 == resolution) ? 1.0 : a * step;
      const double t21 = (b + 1 == resolution) ? 1.0 : b * step;
      const GroupAssignment theta = ToyObjective::assignment(t11, t21);
      const double G = g(theta);
      const double pen = std::isinf(eps) ? 0.0 : phi(theta) / eps;
      cells.push_back({t11, t21, G, G + pen});
    }
  return cells;
}

inline void write_landscape_csv(std::ostream& os, const std::vector<LandscapeCell>& cells) {
  os.precision(17);
  os << "t11,t21,G,Gpen\n";
  for (const auto& c : cells) os << c.t11 << ',' << c.t21 << ',' << c.G << ',' << c.Gpen << '\n';
}

inline const LandscapeCell& grid_argmin(const std::vector<LandscapeCell>& cells, bool penalized) {
  return *std::min_element(cells.begin(), cells.end(), [&](const auto& x, const auto& y) {
    return penalized ? x.Gpen < y.Gpen : x.G < y.G;
  });
}

/// Largest finite-difference slope (gradient norm in the free coordinates)
/// of G over the grid; an empirical Lipschitz constant.
inline double estimate_lip_G(const std::vector<LandscapeCell>& cells, std::size_t resolution) {
  const double h = 1.0 / static_cast<double>(resolution - 1);
  double lip = 0.0;
  auto at = [&](std::size_t a, std::size_t b) { return cells[a * resolution + b].G; };
  for (std::size_t a = 0; a + 1 < resolution; ++a)
    for (std::size_t b = 0; b + 1 < resolution; ++b) {
      const double ga = (at(a + 1, b) - at(a, b)) / h;
      const double gb = (at(a, b + 1) - at(a, b)) / h;
      lip = std::max(lip, std::hypot(ga, gb));
    }
  return lip;
}

/// Grid cells no higher than any of their (up to eight) neighbours on the
/// penalized surface.
inline std::vector<LandscapeCell> grid_local_minima(const std::vector<LandscapeCell>& cells,
                                                    std::size_t resolution) {
  std::vector<LandscapeCell> out;
  const auto r = static_cast<long>(resolution);
  for (long a = 0; a < r; ++a)
    for (long b = 0; b < r; ++b) {
      const double v = cells[a * r + b].Gpen;
      bool is_min = true;
      for (long da = -1; da <= 1 && is_min; ++da)
        for (long db = -1; db <= 1; ++db) {
          const long x = a + da, y = b + db;
          if ((da == 0 && db == 0) || x < 0 || y < 0 || x >= r || y >= r) continue;
          if (cells[x * r + y].Gpen < v) {
            is_min = false;
            break;
          }
        }
      if (is_min) out.push_back(cells[a * r + b]);
    }
  return out;
}

}  // namespace mixbil
