#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mixbil/data.hpp"
#include "mixbil/lowerlevel.hpp"
#include "mixbil/penalty.hpp"
#include "mixbil/rng.hpp"

namespace mixbil {

inline constexpr double kInfiniteEps = std::numeric_limits<double>::infinity();

/// ½‖X w − y‖² / n
inline double validation_loss(const TaskData& val, std::span<const double> w) {
  const Vector xw = matvec(val.X, w);
  double s = 0.0;
  for (std::size_t r = 0; r < xw.size(); ++r) s += (xw[r] - val.y[r]) * (xw[r] - val.y[r]);
  return 0.5 * s / static_cast<double>(val.y.size());
}

/// ∂/∂w of validation_loss: Xᵀ(Xw − y)/n
inline Vector validation_loss_grad(const TaskData& val, std::span<const double> w) {
  Vector res = matvec(val.X, w);
  for (std::size_t r = 0; r < res.size(); ++r) res[r] -= val.y[r];
  Vector g = matvec_t(val.X, res);
  for (double& x : g) x /= static_cast<double>(val.y.size());
  return g;
}

struct UpperEval {
  double loss = 0.0;     // mean validation loss over the batch
  double penalty = 0.0;  // φ(θ)/ε, zero for ε = ∞
  Matrix grad;           // ∂(loss + penalty)/∂θ

  double total() const noexcept { return loss + penalty; }
};

/// G(θ) + φ(θ)/ε as a finite sum over `summands()` pieces that can be
/// evaluated on minibatches. Implementations may keep warm-start state
/// between calls; `full_loss` never modifies it.
class PenalizedObjective {
 public:
  virtual ~PenalizedObjective() = default;

  virtual std::size_t features() const = 0;
  virtual std::size_t groups() const = 0;
  virtual std::size_t summands() const = 0;

  virtual UpperEval evaluate(std::span<const std::size_t> batch, const GroupAssignment& theta,
                             double eps) = 0;

  /// Mean unpenalized loss over all summands.
  virtual double full_loss(const GroupAssignment& theta) = 0;

  /// Drops any warm-start state.
  virtual void reset() {}
};

inline void add_penalty(UpperEval& e, const GroupAssignment& theta, double eps) {
  if (std::isinf(eps)) return;
  e.penalty = phi(theta) / eps;
  for (std::size_t i = 0; i < theta.size(); ++i)
    e.grad.data()[i] += (1.0 - 2.0 * theta.data()[i]) / eps;
}

struct LowerSettings {
  double eta = 1e-3;
  std::size_t q = 500;
  std::size_t final_q = 5000;  // iterations for reporting w at the returned θ
  bool warm_start = true;
};

/// Bilevel multi-task group lasso at fixed λ: the upper loss is the mean
/// validation error of w^(q)(λ, θ) over tasks.
class GroupLassoObjective final : public PenalizedObjective {
 public:
  GroupLassoObjective(const TaskBundle& bundle, double lambda, LowerSettings lower)
      : bundle_(bundle), lambda_(lambda), lower_(lower) {
    factors_.reserve(bundle.size());
    for (const auto& t : bundle.tasks) factors_.push_back(precompute(t.train, lower.eta));
    reset();
  }

  std::size_t features() const override { return bundle_.d(); }
  std::size_t groups() const override { return bundle_.groups(); }
  std::size_t summands() const override { return bundle_.size(); }

  double lambda() const noexcept { return lambda_; }
  const LowerSettings& lower() const noexcept { return lower_; }
  const TaskBundle& bundle() const noexcept { return bundle_; }
  const TaskFactor& factor(std::size_t t) const { return factors_.at(t); }
  const std::vector<Duals>& warm_duals() const noexcept { return warm_; }

  void reset() override {
    warm_.assign(bundle_.size(), Duals(bundle_.d(), bundle_.groups()));
  }

  UpperEval evaluate(std::span<const std::size_t> batch, const GroupAssignment& theta,
                     double eps) override {
    if (batch.empty()) throw Error(Errc::dimension_mismatch, "evaluate: empty batch");
    UpperEval e{0.0, 0.0, Matrix(theta.rows(), theta.cols())};
    std::vector<std::pair<std::size_t, Duals>> next;
    next.reserve(batch.size());
    // Summed in batch order, so results do not depend on scheduling.
    for (std::size_t t : batch) {
      const Task& task = bundle_.tasks.at(t);
      const LowerTape tape = lower_solve(factors_[t], theta, lambda_, lower_.q, warm_ptr(t));
      const Vector w = tape.w();
      e.loss += validation_loss(task.validation, w);
      const Matrix g = lower_vjp(tape, factors_[t], validation_loss_grad(task.validation, w));
      for (std::size_t i = 0; i < g.size(); ++i) e.grad.data()[i] += g.data()[i];
      if (lower_.warm_start) next.emplace_back(t, tape.final_duals());
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    e.loss *= inv;
    for (double& x : e.grad.data()) x *= inv;
    add_penalty(e, theta, eps);
    for (auto& [t, u] : next) warm_[t] = std::move(u);
    return e;
  }

  double full_loss(const GroupAssignment& theta) override {
    double s = 0.0;
    for (std::size_t t = 0; t < bundle_.size(); ++t) {
      const LowerResult r = lower_forward(factors_[t], theta, lambda_, lower_.q, warm_ptr(t));
      s += validation_loss(bundle_.tasks[t].validation, r.w);
    }
    return s / static_cast<double>(bundle_.size());
  }

  /// Per-task regressors at θ, refined for `final_q` iterations from the
  /// current warm state.
  std::vector<Vector> final_weights(const GroupAssignment& theta) const {
    std::vector<Vector> ws;
    ws.reserve(bundle_.size());
    for (std::size_t t = 0; t < bundle_.size(); ++t)
      ws.push_back(lower_forward(factors_[t], theta, lambda_, lower_.final_q, warm_ptr(t)).w);
    return ws;
  }

 private:
  const Duals* warm_ptr(std::size_t t) const {
    return lower_.warm_start ? &warm_[t] : nullptr;
  }

  const TaskBundle& bundle_;
  double lambda_;
  LowerSettings lower_;
  std::vector<TaskFactor> factors_;
  std::vector<Duals> warm_;
};

struct AdamSettings {
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double stability = 1e-8;

  friend bool operator==(const AdamSettings&, const AdamSettings&) = default;
};

struct AdamState {
  std::uint64_t step = 0;
  Matrix m;
  Matrix v;
  AdamSettings settings;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamSettings s)
      : m(rows, cols), v(rows, cols), settings(s) {}
};

/// One bias-corrected Adam step followed by per-row simplex projection.
inline std::pair<AdamState, GroupAssignment> adam_step(AdamState state, GroupAssignment theta,
                                                       const Matrix& grad) {
  if (!theta.same_shape(grad) || !theta.same_shape(state.m))
    throw Error(Errc::dimension_mismatch, "adam_step: shapes differ");
  const auto& s = state.settings;
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad.data()[i];
    double& m = state.m.data()[i];
    double& v = state.v.data()[i];
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g * g;
    theta.data()[i] -= s.step * (m / c1) / (std::sqrt(v / c2) + s.stability);
  }
  project_rows(theta);
  return {std::move(state), std::move(theta)};
}

struct StageConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 10;
  AdamSettings adam;
  // Stop once the best penalized full-batch loss has not improved by
  // `early_exit_tol` for `early_exit_window` consecutive epochs (0 disables).
  std::size_t early_exit_window = 20;
  double early_exit_tol = 1e-9;
  // Project the gradient onto the tangent cone of the row simplices before
  // the Adam update. Components the projection would annihilate anyway
  // (row-constant shifts, pushes below zero on entries already at zero)
  // would otherwise be rescaled by Adam and swamp the differences between
  // groups.
  bool tangent_gradient = true;
};

/// Projection of each row of `g` onto the tangent cone of the simplex at the
/// matching row of `theta`: mean-free over the free entries, zero on entries
/// pinned at 0 whose descent direction leaves the simplex.
inline Matrix tangent_rows(Matrix g, const GroupAssignment& theta) {
  if (!g.same_shape(theta)) throw Error(Errc::dimension_mismatch, "tangent_rows: shapes differ");
  std::vector<bool> free(g.cols());
  for (std::size_t j = 0; j < g.rows(); ++j) {
    auto row = g.row(j);
    const auto th = theta.row(j);
    std::fill(free.begin(), free.end(), true);
    std::vector<double> out(row.size());
    for (bool changed = true; changed;) {
      changed = false;
      double mean = 0.0;
      std::size_t count = 0;
      for (std::size_t l = 0; l < row.size(); ++l)
        if (free[l]) mean += row[l], ++count;
      mean /= static_cast<double>(count);
      for (std::size_t l = 0; l < row.size(); ++l) {
        out[l] = free[l] ? row[l] - mean : 0.0;
        if (free[l] && th[l] <= 0.0 && out[l] > 0.0 && count > 1) {
          free[l] = false;
          changed = true;
        }
      }
    }
    std::copy(out.begin(), out.end(), row.begin());
  }
  return g;
}

struct StageResult {
  GroupAssignment theta;
  std::vector<double> loss_trace;  // full-batch G after each epoch
  std::vector<double> dist_trace;  // dist∞(θ, Θ_bin) after each epoch
  std::size_t epochs_run = 0;
};

/// Fisher-Yates with the counter generator; std::shuffle is not portable.
inline std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  return p;
}

/// Minimizes G + φ/ε by minibatch projected Adam. `state` carries the moments
/// in and out so callers decide whether they persist across stages.
inline StageResult solve_stage(PenalizedObjective& obj, GroupAssignment theta, double eps,
                               const StageConfig& cfg, AdamState& state, CounterRng& rng) {
  require_feasible(theta, "solve_stage");
  if (state.m.rows() != theta.rows() || state.m.cols() != theta.cols())
    state = AdamState(theta.rows(), theta.cols(), cfg.adam);
  StageResult r;
  const std::size_t n = obj.summands();
  const std::size_t bs = std::max<std::size_t>(1, std::min(cfg.batch_size, n));
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(bs, n - start));
      const UpperEval e = obj.evaluate(batch, theta, eps);
      if (!std::isfinite(e.total()))
        throw Error(Errc::stage_diverged, "non-finite upper loss");
      std::tie(state, theta) = adam_step(std::move(state), std::move(theta),
                                         cfg.tangent_gradient ? tangent_rows(e.grad, theta) : e.grad);
    }
    const double loss = obj.full_loss(theta);
    if (!std::isfinite(loss)) throw Error(Errc::stage_diverged, "non-finite full-batch loss");
    r.loss_trace.push_back(loss);
    r.dist_trace.push_back(dist_inf_to_bin(theta));
    r.epochs_run = epoch + 1;
    const double penalized = std::isinf(eps) ? loss : loss + phi(theta) / eps;
    if (penalized < best - cfg.early_exit_tol) {
      best = penalized;
      stale = 0;
    } else if (cfg.early_exit_window > 0 && ++stale >= cfg.early_exit_window) {
      break;
    }
  }
  r.theta = std::move(theta);
  return r;
}

}  // namespace mixbil
