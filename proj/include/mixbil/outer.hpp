#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mixbil/penalty.hpp"
#include "mixbil/upper.hpp"

namespace mixbil {

struct ContinuationConfig {
  double eps0 = kInfiniteEps;
  double eps1 = 1e3;
  double beta = 0.5;
  std::size_t K = 10;
  StageConfig stage;
  double tau_bin = 1e-3;
  bool reset_moments = true;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::config, "continuation.beta must be in (0,1)");
    if (!(eps1 > 0.0)) throw Error(Errc::config, "continuation.eps1 must be > 0");
    if (!(eps0 > 0.0)) throw Error(Errc::config, "continuation.eps0 must be > 0 or null");
    if (K < 1) throw Error(Errc::config, "continuation.K must be >= 1");
    if (!(tau_bin >= 0.0 && tau_bin < 0.5))
      throw Error(Errc::config, "continuation.tau_bin must be in [0, 0.5)");
  }

  /// Penalty parameter of stage k: ε⁰, then ε¹βᵏ⁻¹.
  double eps_at(std::size_t k) const noexcept {
    return k == 0 ? eps0 : eps1 * std::pow(beta, static_cast<double>(k - 1));
  }

  /// Epoch budget of the relax-and-round baseline matched to K+1 stages.
  std::size_t matched_budget() const noexcept { return stage.epochs * (K + 1); }
};

/// Stage-level and epoch-level telemetry of one optimization run.
struct LoopTrace {
  std::vector<double> stage_eps;
  std::vector<double> stage_loss;
  std::vector<double> stage_dist;
  std::vector<std::size_t> stage_epochs;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_dist;

  std::size_t total_epochs() const noexcept {
    std::size_t s = 0;
    for (auto e : stage_epochs) s += e;
    return s;
  }
  void append(double eps, const StageResult& r) {
    stage_eps.push_back(eps);
    stage_loss.push_back(r.loss_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : r.loss_trace.back());
    stage_dist.push_back(dist_inf_to_bin(r.theta));
    stage_epochs.push_back(r.epochs_run);
    epoch_loss.insert(epoch_loss.end(), r.loss_trace.begin(), r.loss_trace.end());
    epoch_dist.insert(epoch_dist.end(), r.dist_trace.begin(), r.dist_trace.end());
  }
};

struct LoopResult {
  GroupAssignment theta;          // binary
  GroupAssignment relaxed_theta;  // iterate before snapping
  LoopTrace trace;
  bool forced_snap = false;  // budget ran out before the binarity test passed
  double pre_round_loss = 0.0;
  double post_round_loss = 0.0;
};

/// Continuation penalty method: solve the penalized problem for a decreasing
/// sequence of ε until the iterate is binary up to `tau_bin`, then snap.
inline LoopResult penalty_loop(PenalizedObjective& obj, const ContinuationConfig& cfg,
                               GroupAssignment theta0, CounterRng& rng) {
  cfg.validate();
  require_feasible(theta0, "penalty_loop");
  LoopResult out;
  AdamState state(theta0.rows(), theta0.cols(), cfg.stage.adam);
  GroupAssignment theta = std::move(theta0);
  bool binary = false;
  for (std::size_t k = 0; k <= cfg.K; ++k) {
    if (cfg.reset_moments) state = AdamState(theta.rows(), theta.cols(), cfg.stage.adam);
    const double eps = cfg.eps_at(k);
    StageResult r = solve_stage(obj, std::move(theta), eps, cfg.stage, state, rng);
    out.trace.append(eps, r);
    theta = std::move(r.theta);
    if (dist_inf_to_bin(theta) <= cfg.tau_bin) {
      binary = true;
      break;
    }
  }
  out.forced_snap = !binary;
  out.relaxed_theta = theta;
  out.theta = snap_to_bin(theta);
  out.pre_round_loss = obj.full_loss(out.relaxed_theta);
  out.post_round_loss = obj.full_loss(out.theta);
  return out;
}

/// Relax-and-round: optimize the unpenalized relaxation for `budget` epochs,
/// then round to the nearest binary assignment.
inline LoopResult relax_round_baseline(PenalizedObjective& obj, const StageConfig& stage,
                                       std::size_t budget, GroupAssignment theta0,
                                       CounterRng& rng) {
  require_feasible(theta0, "relax_round_baseline");
  LoopResult out;
  AdamState state(theta0.rows(), theta0.cols(), stage.adam);
  StageConfig cfg = stage;
  cfg.epochs = budget;
  StageResult r = solve_stage(obj, std::move(theta0), kInfiniteEps, cfg, state, rng);
  out.trace.append(kInfiniteEps, r);
  out.relaxed_theta = std::move(r.theta);
  out.theta = snap_to_bin(out.relaxed_theta);
  out.forced_snap = dist_inf_to_bin(out.relaxed_theta) > 0.0;
  out.pre_round_loss = obj.full_loss(out.relaxed_theta);
  out.post_round_loss = obj.full_loss(out.theta);
  return out;
}

struct Metrics {
  double test_error = 0.0;
  double reconstruction_error = 0.0;
};

/// Mean test loss over tasks and (1/d)·mean ‖w_t − w*_t‖².
inline Metrics metrics(const TaskBundle& bundle, const std::vector<Vector>& ws) {
  if (ws.size() != bundle.size()) throw Error(Errc::dimension_mismatch, "metrics: one w per task");
  Metrics m;
  for (std::size_t t = 0; t < ws.size(); ++t) {
    m.test_error += validation_loss(bundle.tasks[t].test, ws[t]);
    double s = 0.0;
    for (std::size_t j = 0; j < ws[t].size(); ++j) {
      const double e = ws[t][j] - bundle.tasks[t].w_star[j];
      s += e * e;
    }
    m.reconstruction_error += s;
  }
  const double T = static_cast<double>(ws.size());
  m.test_error /= T;
  m.reconstruction_error /= T * static_cast<double>(bundle.d());
  return m;
}

enum class Method { mib, bilevel };

inline const char* method_name(Method m) noexcept { return m == Method::mib ? "mib" : "bilevel"; }

/// Persisted result of one (method, λ, seed) run.
struct RunRecord {
  Method method = Method::mib;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t restart = 0;
  LoopResult result;
  double validation_error = 0.0;
  Metrics metrics;
  double wall_clock_seconds = 0.0;
};

/// Outcome of one (λ, seed) cell; `error` is set when the run failed.
struct CellOutcome {
  std::size_t lambda_index = 0;
  std::size_t seed_index = 0;
  std::optional<double> validation_error;
  std::string error;
};

struct LambdaSelection {
  std::size_t index = 0;
  std::vector<double> mean_error;  // NaN for columns with no surviving cell
  std::vector<double> std_error;
  std::vector<std::size_t> survivors;
};

/// Picks the λ with the lowest mean validation error over the cells that
/// finished. Fails only when a whole λ column failed.
inline LambdaSelection select_lambda(std::size_t grid_size, const std::vector<CellOutcome>& cells) {
  if (grid_size == 0) throw Error(Errc::config, "cross_validate: empty lambda grid");
  LambdaSelection sel;
  sel.mean_error.assign(grid_size, 0.0);
  sel.std_error.assign(grid_size, 0.0);
  sel.survivors.assign(grid_size, 0);
  std::vector<double> sq(grid_size, 0.0);
  for (const auto& c : cells) {
    if (!c.validation_error) continue;
    sel.mean_error[c.lambda_index] += *c.validation_error;
    sq[c.lambda_index] += *c.validation_error * *c.validation_error;
    ++sel.survivors[c.lambda_index];
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_size; ++i) {
    const auto n = static_cast<double>(sel.survivors[i]);
    if (sel.survivors[i] == 0)
      throw Error(Errc::stage_diverged,
                  "cross_validate: every run failed for lambda index " + std::to_string(i));
    sel.mean_error[i] /= n;
    sel.std_error[i] = sel.survivors[i] > 1
                           ? std::sqrt(std::max(0.0, (sq[i] - n * sel.mean_error[i] * sel.mean_error[i]) / (n - 1.0)))
                           : 0.0;
    if (sel.mean_error[i] < best) {
      best = sel.mean_error[i];
      sel.index = i;
    }
  }
  return sel;
}

/// `count` values spaced evenly (in log scale when `log_spaced`) over [lo, hi].
inline std::vector<double> lambda_grid(double lo, double hi, std::size_t count, bool log_spaced) {
  if (count == 0 || !(lo > 0.0) || hi < lo) throw Error(Errc::config, "lambda_grid: bad range");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    g[i] = log_spaced ? std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)))
                      : lo + t * (hi - lo);
  }
  if (count > 1) g.back() = hi;
  g.front() = lo;
  return g;
}

}  // namespace mixbil
