#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace qstforge {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic xoshiro256** stream.  All randomness in the library flows
// from a single user seed through derive_stream(seed, purpose, index), so
// replicas and noise instances are reproducible independently of scheduling
// and of the C++ standard library in use (std:: distributions are not
// portable across implementations).
class RngStream {
 public:
  RngStream() : RngStream(0, "default", 0) {}

  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    std::uint64_t mix = seed ^ (detail::fnv1a(purpose) + 0x9e3779b97f4a7c15ULL * (index + 1));
    for (auto& word : state_) word = detail::splitmix64(mix);
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift; bias is negligible for the n used here (n << 2^32).
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller, caching the second deviate.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  std::uint64_t state_[4];
  bool has_spare_;
  double spare_;
};

inline RngStream derive_stream(std::uint64_t seed, std::string_view purpose,
                               std::uint64_t index = 0) {
  return RngStream(seed, purpose, index);
}

}  // namespace qstforge
