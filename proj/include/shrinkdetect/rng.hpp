#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace shrinkdetect {

/// One Philox4x32-10 block: ten rounds of the bijection keyed by `key`.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Philox4x32-10 counter-based generator.
///
/// Every (seed, replication, substream) triple addresses an independent
/// sequence, so a replication's draws do not depend on which thread runs it
/// or in what order replications are scheduled. Satisfies
/// UniformRandomBitGenerator with 64-bit output.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint32_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in (0, 1).
  double uniform_open();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// Well-known substreams inside a replication.
enum class Substream : std::uint32_t {
  observations = 0,
  auxiliary = 1,
};

inline CounterRng make_rng(std::uint64_t seed, std::uint64_t replication,
                           Substream substream = Substream::observations) {
  return CounterRng(seed, replication, static_cast<std::uint32_t>(substream));
}

}  // namespace shrinkdetect
