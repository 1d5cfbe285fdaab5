#pragma once

// Randomized checks of the inequalities satisfied by the binarity penalty.
// Each sampler draws points that satisfy the statement's hypotheses, then
// evaluates the claimed bound with 1e-12 slack.

#include <cmath>
#include <string>
#include <vector>

#include "mixbil/penalty.hpp"
#include "mixbil/rng.hpp"

namespace mixbil::lemmas {

struct Outcome {
  std::string name;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();  // min(lhs − rhs)

  void record(double lhs, double rhs) {
    ++samples;
    worst = std::min(worst, lhs - rhs);
    if (lhs < rhs - 1e-12) ++violations;
  }
};

inline double psi(double t) { return t * (1.0 - t); }

inline double phi_vec(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += psi(v);
  return s;
}

inline double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// σ uniform in (0, hi]
inline double draw_sigma(CounterRng& rng, double hi) { return hi * (1.0 - rng.uniform()); }

/// |ψ(t₂) − ψ(t₁)| ≥ 2σ|t₂ − t₁| whenever |(t₁+t₂)/2 − 1/2| ≥ σ.
inline Outcome psi_inequality(std::size_t n, CounterRng rng) {
  Outcome o{"psi-increment"};
  while (o.samples < n) {
    const double t1 = rng.uniform(), t2 = rng.uniform(), sigma = draw_sigma(rng, 0.5);
    if (std::abs(0.5 * (t1 + t2) - 0.5) < sigma) continue;  // reject
    o.record(std::abs(psi(t2) - psi(t1)), 2.0 * sigma * std::abs(t2 - t1));
  }
  return o;
}

/// φ(θ′) − φ(θ) ≥ 2σ‖θ′ − θ‖ for pairs built from the coordinate-wise
/// sufficient condition: every changed coordinate keeps its side of 1/2,
/// moves toward 1/2, and starts at least 2σ away from it.
inline Outcome penalty_increment(std::size_t n, CounterRng rng) {
  Outcome o{"penalty-increment"};
  while (o.samples < n) {
    const std::size_t p = 1 + rng.uniform_index(40);
    const double sigma = draw_sigma(rng, 0.25);
    std::vector<double> a(p), b(p);
    bool hypotheses = true;
    for (std::size_t i = 0; i < p; ++i) {
      if (rng.uniform() < 1.0 / 3.0) {
        a[i] = b[i] = rng.uniform();
        continue;
      }
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double off = 2.0 * sigma + (0.5 - 2.0 * sigma) * rng.uniform();  // |θ_i − ½| ≥ 2σ
      a[i] = 0.5 + side * off;
      b[i] = 0.5 + side * off * rng.uniform();
      // The statement's own hypotheses, checked directly.
      if (a[i] != b[i] && (std::abs(0.5 * (a[i] + b[i]) - 0.5) < sigma ||
                           std::abs(b[i] - 0.5) > std::abs(a[i] - 0.5)))
        hypotheses = false;
    }
    if (!hypotheses) continue;
    o.record(phi_vec(b) - phi_vec(a), 2.0 * sigma * dist2(b, a));
  }
  return o;
}

/// For binary θ and ‖θ′ − θ‖∞ ≤ 1 − 2σ: φ(θ′) ≥ 2σ‖θ′ − θ‖.
inline Outcome binary_neighbourhood(std::size_t n, CounterRng rng) {
  Outcome o{"binary-neighbourhood"};
  while (o.samples < n) {
    const std::size_t p = 1 + rng.uniform_index(40);
    const double sigma = draw_sigma(rng, 0.5);
    std::vector<double> a(p), b(p);
    for (std::size_t i = 0; i < p; ++i) {
      a[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      const double r = (1.0 - 2.0 * sigma) * rng.uniform();
      b[i] = a[i] == 0.0 ? r : 1.0 - r;
    }
    o.record(phi_vec(b), 2.0 * sigma * dist2(b, a));
  }
  return o;
}

/// For binary θ, ‖θ − θ̄‖∞ < c < 1/2 and θᵗ on the segment from θ̄ to θ:
/// φ(θ̄) − φ(θᵗ) ≥ (1 − 2c)‖θᵗ − θ̄‖.
inline Outcome segment_decrease(std::size_t n, CounterRng rng) {
  Outcome o{"segment-decrease"};
  while (o.samples < n) {
    const std::size_t p = 1 + rng.uniform_index(40);
    const double c = draw_sigma(rng, 0.5);
    if (c >= 0.5) continue;
    std::vector<double> bin(p), bar(p), mid(p);
    const double t = rng.uniform();
    for (std::size_t i = 0; i < p; ++i) {
      bin[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      const double r = c * rng.uniform();  // < c
      bar[i] = bin[i] == 0.0 ? r : 1.0 - r;
      mid[i] = (1.0 - t) * bar[i] + t * bin[i];
    }
    o.record(phi_vec(bar) - phi_vec(mid), (1.0 - 2.0 * c) * dist2(mid, bar));
  }
  return o;
}

inline std::vector<Outcome> run_all(std::size_t n, std::uint64_t seed) {
  const CounterRng root(seed);
  return {psi_inequality(n, root.substream("psi")), penalty_increment(n, root.substream("pair")),
          binary_neighbourhood(n, root.substream("binary")),
          segment_decrease(n, root.substream("segment"))};
}

}  // namespace mixbil::lemmas
