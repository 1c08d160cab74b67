#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace plc::rng {

// Counter-based generation: every (seed, stream, index) triple owns an
// independent deterministic stream, so per-instance sampling is reproducible
// regardless of iteration order or thread count.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// splitmix64 state advance (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stateless hash combine of two 64-bit values.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * kGolden + 0x2545F4914F6CDD1DULL);
  return splitmix64(s);
}

/// Derives the seed of sub-stream `stream` from a master seed.
inline std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
  return mix(master, stream);
}

/// Sequential generator over one stream.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  Stream(std::uint64_t seed, std::uint64_t stream) : state_(derive(seed, stream)) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1].
  double next_double_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Modulo bias is < 2^-50 for the n used here (dataset sizes).
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller; generates pairs and caches the spare.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Sample an index from a categorical distribution given by `probs`.
  /// Probabilities must be non-negative; they are treated as already normalized.
  int next_categorical(std::span<const double> probs) {
    const double u = next_double();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stream owned by element `index` of the stream seeded by `seed`.
inline Stream at(std::uint64_t seed, std::uint64_t index) {
  return Stream(mix(seed, index));
}

}  // namespace plc::rng
