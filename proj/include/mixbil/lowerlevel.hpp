#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "mixbil/linalg.hpp"
#include "mixbil/penalty.hpp"

namespace mixbil {

struct TaskData {
  Matrix X;  // n×d
  Vector y;  // n
};

/// Everything about a training task that does not depend on (λ, θ).
struct TaskFactor {
  SpdFactor chol;  // XᵀX + ηI
  Vector xty;
  double eta = 0.0;

  std::size_t dimension() const noexcept { return xty.size(); }
};

inline TaskFactor precompute(const TaskData& task, double eta) {
  if (!(eta > 0.0)) throw Error(Errc::dimension_mismatch, "precompute: eta must be positive");
  if (task.X.rows() != task.y.size()) throw Error(Errc::dimension_mismatch, "precompute: X/y");
  Matrix a = gram(task.X);
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += eta;
  return TaskFactor{spd_factor(a), matvec_t(task.X, task.y), eta};
}

/// Dual ascent step size; the dual gradient map is (1/η)-Lipschitz when the
/// rows of θ lie in the simplex.
inline double dual_step(double eta) noexcept { return 0.9 * eta; }

/// Dual variables u, stored d×L like θ: column l is the dual of group l.
using Duals = Matrix;

/// Recorded forward pass of the unrolled dual solver.
struct LowerTape {
  std::size_t q = 0;
  std::size_t d = 0;
  std::size_t groups = 0;
  double gamma = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  GroupAssignment theta;
  std::vector<double> duals;   // (q+1)·d·L, iterate j at offset j·d·L
  std::vector<double> primal;  // (q+1)·d, w(u^(j))

  std::span<const double> dual(std::size_t j) const noexcept {
    return {duals.data() + j * d * groups, d * groups};
  }
  std::span<const double> w_at(std::size_t j) const noexcept { return {primal.data() + j * d, d}; }

  /// w^(q), the solver output.
  Vector w() const { return {primal.end() - static_cast<std::ptrdiff_t>(d), primal.end()}; }
  Duals final_duals() const {
    const auto u = dual(q);
    return Duals(d, groups, std::vector<double>(u.begin(), u.end()));
  }
};

namespace detail {

// w = A⁻¹(Xᵀy − Σ_l θ_l ⊙ u_l)
inline void primal_from_duals(const TaskFactor& f, const GroupAssignment& theta,
                              std::span<const double> u, std::span<double> w) {
  const std::size_t d = theta.rows(), groups = theta.cols();
  const double* th = theta.data().data();
  for (std::size_t i = 0; i < d; ++i) {
    double s = f.xty[i];
    for (std::size_t l = 0; l < groups; ++l) s -= th[i * groups + l] * u[i * groups + l];
    w[i] = s;
  }
  f.chol.solve_in_place(w);
}

// u ← P_{‖·‖≤λ}(u + γ θ ⊙ w) column-wise. `norms` receives ‖v_l‖ before projection.
inline void dual_ascent(const GroupAssignment& theta, std::span<const double> w, double gamma,
                        double lambda, std::span<const double> u_in, std::span<double> u_out,
                        std::span<double> norms) {
  const std::size_t d = theta.rows(), groups = theta.cols();
  const double* th = theta.data().data();
  std::fill(norms.begin(), norms.end(), 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double gw = gamma * w[i];
    for (std::size_t l = 0; l < groups; ++l) {
      const double v = u_in[i * groups + l] + gw * th[i * groups + l];
      u_out[i * groups + l] = v;
      norms[l] += v * v;
    }
  }
  for (auto& n : norms) n = std::sqrt(n);
  for (std::size_t l = 0; l < groups; ++l) {
    if (norms[l] <= lambda) continue;
    const double scale = lambda / norms[l];
    for (std::size_t i = 0; i < d; ++i) u_out[i * groups + l] *= scale;
  }
}

inline void check_inputs(const TaskFactor& f, const GroupAssignment& theta, double lambda,
                         std::size_t q, const Duals* warm) {
  if (theta.rows() != f.dimension())
    throw Error(Errc::dimension_mismatch, "lower_solve: theta rows differ from feature count");
  if (!(lambda > 0.0)) throw Error(Errc::dimension_mismatch, "lower_solve: lambda must be > 0");
  if (q < 1) throw Error(Errc::dimension_mismatch, "lower_solve: q must be >= 1");
  if (warm && !warm->same_shape(theta))
    throw Error(Errc::dimension_mismatch, "lower_solve: warm duals have the wrong shape");
}

inline void check_finite(std::span<const double> w) {
  for (double x : w)
    if (!std::isfinite(x)) throw Error(Errc::non_finite_iterate, "lower solver diverged");
}

}  // namespace detail

/// Runs q projected dual-ascent iterations for
///   min_w ½‖Xw − y‖² + λ Σ_l ‖θ_l ⊙ w‖₂ + (η/2)‖w‖²
/// starting from `warm` (zero when absent) and records every iterate.
inline LowerTape lower_solve(const TaskFactor& f, const GroupAssignment& theta, double lambda,
                             std::size_t q, const Duals* warm = nullptr) {
  detail::check_inputs(f, theta, lambda, q, warm);
  LowerTape tape;
  tape.q = q;
  tape.d = theta.rows();
  tape.groups = theta.cols();
  tape.gamma = dual_step(f.eta);
  tape.lambda = lambda;
  tape.eta = f.eta;
  tape.theta = theta;
  const std::size_t p = tape.d * tape.groups;
  tape.duals.assign((q + 1) * p, 0.0);
  tape.primal.assign((q + 1) * tape.d, 0.0);
  if (warm) std::copy(warm->data().begin(), warm->data().end(), tape.duals.begin());

  Vector norms(tape.groups);
  for (std::size_t j = 0; j <= q; ++j) {
    std::span<const double> u(tape.duals.data() + j * p, p);
    std::span<double> w(tape.primal.data() + j * tape.d, tape.d);
    detail::primal_from_duals(f, theta, u, w);
    if (j == q) break;
    detail::dual_ascent(theta, w, tape.gamma, lambda, u,
                        std::span<double>(tape.duals.data() + (j + 1) * p, p), norms);
  }
  detail::check_finite(tape.w_at(q));
  return tape;
}

struct LowerResult {
  Vector w;
  Duals duals;
};

/// Same iteration as lower_solve without recording the tape.
inline LowerResult lower_forward(const TaskFactor& f, const GroupAssignment& theta, double lambda,
                                 std::size_t q, const Duals* warm = nullptr) {
  detail::check_inputs(f, theta, lambda, q, warm);
  const std::size_t d = theta.rows(), groups = theta.cols();
  LowerResult r{Vector(d), warm ? *warm : Duals(d, groups)};
  Duals next(d, groups);
  Vector norms(groups);
  const double gamma = dual_step(f.eta);
  for (std::size_t j = 0; j < q; ++j) {
    detail::primal_from_duals(f, theta, r.duals.data(), r.w);
    detail::dual_ascent(theta, r.w, gamma, lambda, r.duals.data(), next.data(), norms);
    std::swap(r.duals, next);
  }
  detail::primal_from_duals(f, theta, r.duals.data(), r.w);
  detail::check_finite(r.w);
  return r;
}

/// ∂(gbarᵀ w^(q)) / ∂θ by reverse replay of the recorded iterations.
/// The initial duals are treated as constants.
inline Matrix lower_vjp(const LowerTape& tape, const TaskFactor& f, std::span<const double> gbar) {
  if (gbar.size() != tape.d || f.dimension() != tape.d || f.eta != tape.eta ||
      tape.theta.rows() != tape.d || tape.theta.cols() != tape.groups ||
      tape.duals.size() != (tape.q + 1) * tape.d * tape.groups)
    throw Error(Errc::tape_mismatch, "lower_vjp: tape, factor and cotangent disagree");

  const std::size_t d = tape.d, groups = tape.groups, p = d * groups;
  const double* th = tape.theta.data().data();
  const double gamma = tape.gamma, lambda = tape.lambda;

  Matrix theta_bar(d, groups);
  double* tb = theta_bar.data().data();
  Vector s(gbar.begin(), gbar.end());
  Vector u_bar(p), v(p), v_bar(p), norms(groups), vu(groups);

  // w^(q) = A⁻¹(Xᵀy − Σ θ ⊙ u^(q))
  f.chol.solve_in_place(s);
  {
    const auto u = tape.dual(tape.q);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < groups; ++l) {
        tb[i * groups + l] -= s[i] * u[i * groups + l];
        u_bar[i * groups + l] = -th[i * groups + l] * s[i];
      }
  }

  for (std::size_t j = tape.q; j-- > 0;) {
    const auto u = tape.dual(j);
    const auto w = tape.w_at(j);
    std::fill(norms.begin(), norms.end(), 0.0);
    std::fill(vu.begin(), vu.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < groups; ++l) {
        const std::size_t k = i * groups + l;
        v[k] = u[k] + gamma * th[k] * w[i];
        norms[l] += v[k] * v[k];
        vu[l] += v[k] * u_bar[k];
      }
    for (auto& n : norms) n = std::sqrt(n);

    // Jacobian of the ball projection: identity inside (and on) the ball,
    // (λ/‖v‖)(I − v vᵀ/‖v‖²) outside.
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < groups; ++l) {
        const std::size_t k = i * groups + l;
        if (norms[l] <= lambda) {
          v_bar[k] = u_bar[k];
        } else {
          const double nv = norms[l];
          v_bar[k] = (lambda / nv) * (u_bar[k] - v[k] * vu[l] / (nv * nv));
        }
      }

    for (std::size_t i = 0; i < d; ++i) {
      double wb = 0.0;
      for (std::size_t l = 0; l < groups; ++l) {
        const std::size_t k = i * groups + l;
        tb[k] += gamma * v_bar[k] * w[i];
        wb += th[k] * v_bar[k];
      }
      s[i] = gamma * wb;
    }
    f.chol.solve_in_place(s);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < groups; ++l) {
        const std::size_t k = i * groups + l;
        tb[k] -= s[i] * u[k];
        u_bar[k] = v_bar[k] - th[k] * s[i];
      }
  }
  return theta_bar;
}

/// ½‖Xw − y‖² + λ Σ_l ‖θ_l ⊙ w‖₂ + (η/2)‖w‖²
inline double primal_objective(const TaskData& task, const GroupAssignment& theta, double lambda,
                               double eta, std::span<const double> w) {
  const Vector xw = matvec(task.X, w);
  double fit = 0.0;
  for (std::size_t r = 0; r < xw.size(); ++r) fit += (xw[r] - task.y[r]) * (xw[r] - task.y[r]);
  double pen = 0.0;
  for (std::size_t l = 0; l < theta.cols(); ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < theta.rows(); ++i) s += theta(i, l) * w[i] * theta(i, l) * w[i];
    pen += std::sqrt(s);
  }
  return 0.5 * fit + lambda * pen + 0.5 * eta * dot(w, w);
}

/// Dual function value min_w ½‖Xw−y‖² + (η/2)‖w‖² + ⟨Σ_l θ_l⊙u_l, w⟩.
inline double dual_objective(const TaskData& task, const TaskFactor& f,
                             const GroupAssignment& theta, const Duals& u) {
  Vector w(theta.rows());
  detail::primal_from_duals(f, theta, u.data(), w);
  const Vector xw = matvec(task.X, w);
  double fit = 0.0;
  for (std::size_t r = 0; r < xw.size(); ++r) fit += (xw[r] - task.y[r]) * (xw[r] - task.y[r]);
  double coupling = 0.0;
  for (std::size_t i = 0; i < theta.rows(); ++i)
    for (std::size_t l = 0; l < theta.cols(); ++l) coupling += w[i] * theta(i, l) * u(i, l);
  return 0.5 * fit + 0.5 * f.eta * dot(w, w) + coupling;
}

}  // namespace mixbil
