#pragma once

#include <cstdint>
#include <limits>

namespace indeltree {

// Counter-based randomness. Every stream is identified by a key derived from
// (seed, tag, a, b); the i-th draw of a stream is mix(key, i). Streams never
// share state, so any node or site can be replayed in isolation.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class StreamTag : std::uint64_t {
  kRoot = 1,
  kEdge = 2,
  kTie = 3,
  kStableTrim = 4,
  kGatewayTrim = 5,
  kTrial = 6,
  kAdversary = 7,
  kFixture = 8,
};

inline constexpr std::uint64_t stream_key(std::uint64_t seed, StreamTag tag,
                                          std::uint64_t a = 0,
                                          std::uint64_t b = 0) noexcept {
  std::uint64_t k = splitmix64(seed ^ (static_cast<std::uint64_t>(tag) << 56));
  k = splitmix64(k ^ a);
  k = splitmix64((k + 0x632be59bd9b4e019ULL) ^ b);
  return k;
}

class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key = 0) noexcept : key_(key) {}
  constexpr Stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                   std::uint64_t b = 0) noexcept
      : key_(stream_key(seed, tag, a, b)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return splitmix64(key_ ^ splitmix64(++counter_));
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

  constexpr std::uint8_t bit() noexcept {
    return static_cast<std::uint8_t>((*this)() >> 63);
  }

  /// Uniform integer in [0, bound). bound must be positive.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift; the bias is below 2^-64 * bound.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace indeltree
