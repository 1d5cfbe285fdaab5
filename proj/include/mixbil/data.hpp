#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "mixbil/lowerlevel.hpp"
#include "mixbil/rng.hpp"

namespace mixbil {

struct GenConfig {
  std::size_t d = 100;
  std::size_t groups = 10;
  std::size_t tasks = 50;
  std::size_t n = 50;
  double noise_variance = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (groups < 1 || groups > d) throw Error(Errc::config, "data: need 1 <= L <= d");
    if (n < 1 || tasks < 1) throw Error(Errc::config, "data: need n >= 1 and T >= 1");
    if (!(noise_variance > 0.0)) throw Error(Errc::config, "data: noise_variance must be > 0");
  }

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct Task {
  TaskData train;
  TaskData validation;
  TaskData test;
  Vector w_star;
};

/// Group index of each feature; every group is a contiguous index block.
using Partition = std::vector<std::size_t>;

struct TaskBundle {
  GenConfig cfg;
  Partition group_of;
  std::vector<Task> tasks;

  std::size_t d() const noexcept { return cfg.d; }
  std::size_t groups() const noexcept { return cfg.groups; }
  std::size_t size() const noexcept { return tasks.size(); }

  /// Oracle groups as a binary assignment.
  GroupAssignment oracle_assignment() const {
    GroupAssignment theta(cfg.d, cfg.groups);
    for (std::size_t j = 0; j < cfg.d; ++j) theta(j, group_of[j]) = 1.0;
    return theta;
  }
};

inline std::vector<std::size_t> group_sizes(const Partition& part, std::size_t groups) {
  std::vector<std::size_t> sizes(groups, 0);
  for (auto g : part) ++sizes[g];
  return sizes;
}

/// Contiguous blocks whose sizes follow a symmetric Dirichlet(0.5), so group
/// sizes are heavily dispersed. Every group gets at least one feature.
inline Partition random_partition(std::size_t d, std::size_t groups, CounterRng rng) {
  if (groups < 1 || groups > d) throw Error(Errc::config, "random_partition: need 1 <= L <= d");
  boost::random::gamma_distribution<double> gamma(0.5);
  std::vector<double> weights(groups);
  double total = 0.0;
  for (auto& w : weights) total += (w = gamma(rng));
  if (!(total > 0.0)) std::fill(weights.begin(), weights.end(), total = 1.0);

  std::vector<std::size_t> sizes(groups);
  std::size_t assigned = 0;
  for (std::size_t l = 0; l < groups; ++l) {
    const double raw = weights[l] / total * static_cast<double>(d);
    sizes[l] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw)));
    assigned += sizes[l];
  }
  while (assigned > d) {  // minimum-size bumps overshot: shave the largest group
    --*std::max_element(sizes.begin(), sizes.end());
    --assigned;
  }
  *std::max_element(sizes.begin(), sizes.end()) += d - assigned;

  Partition part;
  part.reserve(d);
  for (std::size_t l = 0; l < groups; ++l) part.insert(part.end(), sizes[l], l);
  return part;
}

inline Partition random_partition(std::size_t d, std::size_t groups, std::uint64_t seed) {
  return random_partition(d, groups, CounterRng(seed).substream("partition"));
}

namespace detail {

inline TaskData draw_split(const Vector& w_star, std::size_t n, double noise_variance,
                           CounterRng rng) {
  boost::random::normal_distribution<double> normal;
  const std::size_t d = w_star.size();
  TaskData t{Matrix(n, d), Vector(n)};
  for (double& x : t.X.data()) x = normal(rng);
  for (std::size_t c = 0; c < d; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += t.X(r, c) * t.X(r, c);
    s = std::sqrt(s);
    for (std::size_t r = 0; r < n; ++r) t.X(r, c) /= s;
  }
  const double sd = std::sqrt(noise_variance);
  const Vector xw = matvec(t.X, w_star);
  for (std::size_t r = 0; r < n; ++r) t.y[r] = xw[r] + sd * normal(rng);
  return t;
}

}  // namespace detail

/// Synthetic multi-task group-sparse regression. Each task's regressor is
/// supported on one or two (equally likely) randomly chosen oracle groups;
/// train, validation and test splits share the regressor and draw fresh
/// designs and noise.
inline TaskBundle generate(const GenConfig& cfg) {
  cfg.validate();
  const CounterRng root(cfg.seed);
  TaskBundle b;
  b.cfg = cfg;
  b.group_of = random_partition(cfg.d, cfg.groups, root.substream("partition"));

  boost::random::normal_distribution<double> normal;
  b.tasks.reserve(cfg.tasks);
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    CounterRng rng = root.substream("regressor", t);
    const std::size_t active = (cfg.groups > 1 && rng.uniform() < 0.5) ? 2 : 1;
    const std::size_t first = rng.uniform_index(cfg.groups);
    std::size_t second = first;
    if (active == 2) {
      second = rng.uniform_index(cfg.groups - 1);
      if (second >= first) ++second;
    }
    Task task;
    task.w_star.assign(cfg.d, 0.0);
    for (std::size_t j = 0; j < cfg.d; ++j)
      if (b.group_of[j] == first || b.group_of[j] == second) task.w_star[j] = normal(rng);

    task.train = detail::draw_split(task.w_star, cfg.n, cfg.noise_variance, root.substream("train", t));
    task.validation =
        detail::draw_split(task.w_star, cfg.n, cfg.noise_variance, root.substream("validation", t));
    task.test = detail::draw_split(task.w_star, cfg.n, cfg.noise_variance, root.substream("test", t));
    b.tasks.push_back(std::move(task));
  }
  return b;
}

}  // namespace mixbil
