#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace mixbil {

// SplitMix64 finalizer. Also used to derive substream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based 64-bit generator: output i is a keyed hash of the counter i.
/// Bit-identical on every platform, and cheap to split into independent
/// substreams keyed by (seed, purpose, index).
///
/// Satisfies UniformRandomBitGenerator so it plugs into boost::random
/// distributions (whose algorithms, unlike std::, are fixed across platforms).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return mix64(key_ ^ mix64(counter_++));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n) noexcept {
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  /// Independent child stream for a named purpose.
  constexpr CounterRng substream(std::string_view purpose,
                                 std::uint64_t index = 0) const noexcept {
    return CounterRng(mix64(key_ ^ hash_tag(purpose)) ^ mix64(index + 0x51ed27ULL));
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mixbil
