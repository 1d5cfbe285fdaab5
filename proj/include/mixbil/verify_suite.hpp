#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "mixbil/lemmas.hpp"
#include "mixbil/verify.hpp"

namespace mixbil::suite {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

enum class Level { quick, full };

namespace detail {

inline std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

template <class F>
CheckResult timed(std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline double in_range(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Random interior assignment with every entry at least floor/L.
inline GroupAssignment interior(CounterRng& rng, std::size_t d, std::size_t groups, double floor = 0.1) {
  GroupAssignment theta(d, groups);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < groups; ++l) s += (theta(j, l) = -std::log(1.0 - rng.uniform()));
    for (std::size_t l = 0; l < groups; ++l)
      theta(j, l) = (1.0 - floor) * theta(j, l) / s + floor / static_cast<double>(groups);
  }
  return theta;
}

inline bool near_boundary(const LowerTape& tape, double tol) {
  for (std::size_t j = 0; j < tape.q; ++j) {
    const auto u = tape.dual(j);
    const auto w = tape.w_at(j);
    for (std::size_t l = 0; l < tape.groups; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < tape.d; ++i) {
        const double v = u[i * tape.groups + l] + tape.gamma * tape.theta(i, l) * w[i];
        s += v * v;
      }
      if (std::abs(std::sqrt(s) - tape.lambda) < tol) return true;
    }
  }
  return false;
}

inline GenConfig tiny_cfg(std::size_t d, std::size_t groups, std::size_t tasks, std::size_t n,
                          std::uint64_t seed) {
  GenConfig c;
  c.d = d;
  c.groups = groups;
  c.tasks = tasks;
  c.n = n;
  c.seed = seed;
  return c;
}

}  // namespace detail

/// Penalty inequalities on `samples` random hypothesis-satisfying draws each.
inline CheckResult penalty_lemmas(std::size_t samples = 1000, std::uint64_t seed = 2024) {
  return detail::timed("penalty-lemmas", [&] {
    CheckResult r{"", true, ""};
    for (const auto& o : lemmas::run_all(samples, seed)) {
      r.passed &= o.violations == 0 && o.samples == samples;
      r.detail += detail::format("%s %zu/%zu ok (min slack %.2e); ", o.name.c_str(),
                                 o.samples - o.violations, o.samples, o.worst);
    }
    return r;
  });
}

/// Hypergradient of the batch objective versus central finite differences on
/// tiny instances (d ≤ 4, L = 2, T ≤ 3, q ≤ 30), skipping instances whose
/// dual iterates touch the projection boundary.
inline CheckResult gradient_oracle(std::size_t instances = 20, std::uint64_t seed = 11) {
  return detail::timed("gradient-oracle", [&] {
    CounterRng rng(seed);
    std::size_t checked = 0, failed = 0, skipped = 0;
    double worst = 0.0;
    for (std::size_t attempt = 0; checked < instances && attempt < 20 * instances; ++attempt) {
      const std::size_t d = 2 + rng.uniform_index(3), tasks = 1 + rng.uniform_index(3);
      const std::size_t q = 10 + rng.uniform_index(21);
      const TaskBundle b = generate(detail::tiny_cfg(d, 2, tasks, 4 + rng.uniform_index(5), rng()));
      const double lambda = detail::in_range(rng, 0.01, 0.5), eta = detail::in_range(rng, 0.05, 0.5);
      const double eps = detail::in_range(rng, 0.5, 5.0);
      const GroupAssignment theta = detail::interior(rng, d, 2);
      GroupLassoObjective obj(b, lambda, {eta, q, q, false});
      bool boundary = false;
      for (std::size_t t = 0; t < tasks; ++t)
        boundary |= detail::near_boundary(lower_solve(obj.factor(t), theta, lambda, q), 1e-6);
      if (boundary) {
        ++skipped;
        continue;
      }
      std::vector<std::size_t> batch(tasks);
      for (std::size_t t = 0; t < tasks; ++t) batch[t] = t;
      const Matrix g = obj.evaluate(batch, theta, eps).grad;
      const Matrix fd = finite_diff(
          [&](const GroupAssignment& th) { return obj.evaluate(batch, th, eps).total(); }, theta, 1e-5);
      double diff = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        diff = std::max(diff, std::abs(g.data()[i] - fd.data()[i]));
      const double rel = diff / std::max(norm_inf(fd.data()), 1e-6);
      worst = std::max(worst, rel);
      failed += rel > 1e-4;
      ++checked;
    }
    return CheckResult{"", checked == instances && failed == 0,
                       detail::format("%zu instances, %zu over 1e-4, worst relative error %.2e, "
                                      "%zu boundary instances skipped",
                                      checked, failed, worst, skipped)};
  });
}

/// w^(5000) from the dual scheme versus a primal FISTA solve on random
/// binary-θ instances.
inline CheckResult lower_oracle(std::size_t instances = 10, std::uint64_t seed = 12) {
  return detail::timed("lower-level-oracle", [&] {
    CounterRng rng(seed);
    double worst = 0.0;
    std::size_t failed = 0;
    for (std::size_t k = 0; k < instances; ++k) {
      const std::size_t d = 2 + rng.uniform_index(7), groups = 2 + rng.uniform_index(d > 2 ? 2 : 1);
      const TaskBundle b = generate(detail::tiny_cfg(d, groups, 1, d + 5, rng()));
      const TaskData& task = b.tasks[0].train;
      std::vector<std::size_t> label(d);
      GroupAssignment theta(d, groups);
      for (std::size_t j = 0; j < d; ++j) theta(j, label[j] = rng.uniform_index(groups)) = 1.0;
      const double lambda = detail::in_range(rng, 0.05, 0.5), eta = 0.1;
      const Vector w = lower_forward(precompute(task, eta), theta, lambda, 5000).w;
      const Vector ref = primal_group_lasso(task, label, groups, lambda, eta);
      double diff = 0.0;
      for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(w[i] - ref[i]));
      worst = std::max(worst, diff);
      failed += diff > 1e-6;
    }
    return CheckResult{"", failed == 0,
                       detail::format("%zu instances, %zu over 1e-6, worst |w - w_ref|_inf %.2e",
                                      instances, failed, worst)};
  });
}

/// Continuation on tiny instances (d ≤ 5, L = 2) reaches the brute-force
/// binary optimum in at least `required` of `instances` cases.
inline CheckResult continuation_vs_enumeration(std::size_t instances = 10, std::size_t required = 8,
                                               std::uint64_t seed = 13) {
  return detail::timed("continuation-vs-enumeration", [&] {
    CounterRng rng(seed);
    std::size_t hits = 0;
    std::string log;
    for (std::size_t k = 0; k < instances; ++k) {
      const std::size_t d = 3 + rng.uniform_index(3);
      const TaskBundle b = generate(detail::tiny_cfg(d, 2, 6, 10, rng()));
      const double lambda = 0.1, eta = 0.1;
      const ExactObjective exact(b, lambda, eta, 5000);
      const BruteForceResult best = brute_force_binary(d, 2, std::cref(exact));

      GroupLassoObjective obj(b, lambda, {eta, 200, 5000, true});
      ContinuationConfig cfg;
      cfg.K = 6;
      cfg.stage.epochs = 100;
      cfg.stage.batch_size = 2;
      CounterRng run = rng.substream("run", k);
      const LoopResult r = penalty_loop(obj, cfg, initial_assignment(d, 2, run), run);
      const double value = exact(r.theta);
      const bool hit = value <= best.value + 1e-9 * std::max(1.0, std::abs(best.value));
      hits += hit;
      log += detail::format("%s%.4g/%.4g", k ? " " : "", value, best.value);
    }
    return CheckResult{"", hits >= required,
                       detail::format("%zu/%zu match the enumerated optimum (need %zu); G found/opt: ",
                                      hits, instances, required) + log};
  });
}

/// On random d = 2, L = 2 instances, the argmin of G + φ/ε over a fine grid
/// of [0,1]² (ε = 1e-3 × the grid's G range) lies within one grid cell of
/// the enumerated binary optimum or its label swap.
inline CheckResult grid_vs_enumeration(std::size_t instances, std::size_t resolution,
                                       std::uint64_t seed = 14) {
  return detail::timed("grid-vs-enumeration", [&] {
    CounterRng rng(seed);
    std::size_t hits = 0;
    const double h = 1.0 / static_cast<double>(resolution - 1);
    for (std::size_t k = 0; k < instances; ++k) {
      ToyObjective toy;
      toy.bundle = generate(detail::tiny_cfg(2, 2, 4, 10, rng()));
      toy.q = 300;
      const ExactObjective exact = toy.objective();
      const BruteForceResult best = brute_force_binary(2, 2, std::cref(exact));
      auto cells = landscape_grid(toy, kInfiniteEps, resolution);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& c : cells) lo = std::min(lo, c.G), hi = std::max(hi, c.G);
      const double eps = 1e-3 * std::max(hi - lo, 1e-12);
      for (auto& c : cells) c.Gpen = c.G + phi(ToyObjective::assignment(c.t11, c.t21)) / eps;
      const auto& arg = grid_argmin(cells, true);
      const double b11 = best.theta(0, 0), b21 = best.theta(1, 0);
      const bool same = std::abs(arg.t11 - b11) <= h + 1e-12 && std::abs(arg.t21 - b21) <= h + 1e-12;
      const bool swapped =
          std::abs(arg.t11 - (1 - b11)) <= h + 1e-12 && std::abs(arg.t21 - (1 - b21)) <= h + 1e-12;
      hits += same || swapped;
    }
    return CheckResult{"", hits == instances,
                       detail::format("%zu/%zu grid argmins at the enumerated optimum (%zux%zu grid)",
                                      hits, instances, resolution, resolution)};
  });
}

/// The toy's penalized landscape has its global minimum at a vertex that
/// separates the two oracle groups.
inline CheckResult toy_landscape_vertex(std::size_t resolution, double eps = 1e-2) {
  return detail::timed("toy-landscape-vertex", [&] {
    const ToyObjective toy = make_toy();
    const auto cells = landscape_grid(toy, eps, resolution);
    const auto& arg = grid_argmin(cells, true);
    const bool vertex = (arg.t11 == 0.0 || arg.t11 == 1.0) && (arg.t21 == 0.0 || arg.t21 == 1.0);
    return CheckResult{"", vertex && arg.t11 != arg.t21,
                       detail::format("penalized argmin at (%.3f, %.3f), G=%.5f", arg.t11, arg.t21,
                                      arg.G)};
  });
}

/// Local minima of the toy's penalized landscape within c = 0.4 of a vertex
/// are vertices, once ε < (1 − 2c)/lip_G.
inline CheckResult toy_local_minima(std::size_t resolution, double c = 0.4) {
  return detail::timed("toy-local-minima", [&] {
    const ToyObjective toy = make_toy();
    const auto plain = landscape_grid(toy, kInfiniteEps, resolution);
    const double lip = estimate_lip_G(plain, resolution);
    const double eps = 0.9 * (1.0 - 2.0 * c) / lip;
    auto cells = plain;
    for (auto& cell : cells) cell.Gpen = cell.G + phi(ToyObjective::assignment(cell.t11, cell.t21)) / eps;
    const double h = 1.0 / static_cast<double>(resolution - 1);
    std::size_t near = 0, bad = 0;
    for (const auto& m : grid_local_minima(cells, resolution)) {
      const double dist = dist_inf_to_bin(ToyObjective::assignment(m.t11, m.t21));
      if (dist >= c) continue;
      ++near;
      bad += dist > h + 1e-12;
    }
    return CheckResult{"", near > 0 && bad == 0,
                       detail::format("lip_G=%.4f eps=%.4f: %zu local minima within %.1f of a "
                                      "vertex, %zu not binary",
                                      lip, eps, near, c, bad)};
  });
}

/// The exact toy objective and the pipeline's evaluate() agree.
inline CheckResult toy_agreement(std::uint64_t seed = 15) {
  return detail::timed("toy-agreement", [&] {
    const ToyObjective toy = make_toy();
    const ExactObjective exact = toy.objective();
    GroupLassoObjective obj(toy.bundle, toy.lambda, {toy.eta, toy.q, toy.q, false});
    std::vector<std::size_t> all(toy.bundle.size());
    for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
    CounterRng rng(seed);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const GroupAssignment theta = ToyObjective::assignment(rng.uniform(), rng.uniform());
      worst = std::max(worst, std::abs(exact(theta) - obj.evaluate(all, theta, kInfiniteEps).loss));
    }
    return CheckResult{"", worst <= 1e-10, detail::format("max |difference| %.2e", worst)};
  });
}

inline std::vector<CheckResult> run(Level level) {
  const bool full = level == Level::full;
  std::vector<CheckResult> out;
  out.push_back(penalty_lemmas());
  out.push_back(gradient_oracle());
  out.push_back(lower_oracle());
  out.push_back(toy_agreement());
  out.push_back(toy_landscape_vertex(full ? 101 : 41));
  out.push_back(toy_local_minima(full ? 101 : 41));
  out.push_back(grid_vs_enumeration(full ? 10 : 3, full ? 201 : 51));
  out.push_back(continuation_vs_enumeration());
  return out;
}

}  // namespace mixbil::suite
