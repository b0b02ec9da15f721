#pragma once

#include <cstdint>
#include <random>

namespace fors {

/// SplitMix64 finalizer. Used to derive well-separated engine seeds from a
/// (root seed, stream id) pair.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Random stream used by every sampler in the library.
///
/// A stream is identified by a root seed and a stream id. Two streams with
/// the same pair produce identical draws; streams with different ids are
/// statistically independent. Chains get stream id = chain index, so results
/// do not depend on how chains are scheduled across threads.
///
/// Satisfies UniformRandomBitGenerator, so it can also feed <random>
/// distributions directly.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(derive(seed, stream)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal.
  double normal() { return normal_(engine_); }

  /// A child stream; `split(k)` is deterministic in (seed, stream, k).
  Rng split(std::uint64_t k) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_ + 0x632BE59BD9B4E019ULL)), k);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace fors
