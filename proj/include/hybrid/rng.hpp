#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>

namespace hybrid {

/// Deterministic random stream: xoshiro256** seeded through splitmix64.
///
/// Normal deviates use the Box-Muller transform on two uniforms; the second
/// deviate of each pair is cached and returned by the next call. Given the
/// same seed and call sequence every platform produces bit-identical output.
///
/// Streams are single-owner. Parallel work uses independent sub-streams
/// obtained through `derive_seed`.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double next_unit();
  /// Uniform on [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return next_unit() < p; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a master seed with a path of integer tags into a sub-stream seed.
/// Distinct tag paths give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

// Tags naming the sub-streams used by training runs.
namespace stream_tag {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kEvolution = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kSynthetic = 5;
}  // namespace stream_tag

}  // namespace hybrid
