#include "catch_amalgamated.hpp"

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "shrinkdetect/rng.hpp"

using namespace shrinkdetect;

TEST_CASE("philox known answers") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu}) ==
        Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u}) ==
        Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  auto draw = [](CounterRng rng) {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < 16; ++i) out.push_back(rng());
    return out;
  };
  CHECK(draw(CounterRng(1, 2, 0)) == draw(CounterRng(1, 2, 0)));
  CHECK(draw(CounterRng(1, 2, 0)) != draw(CounterRng(1, 3, 0)));
  CHECK(draw(CounterRng(1, 2, 0)) != draw(CounterRng(2, 2, 0)));
  CHECK(draw(CounterRng(1, 2, 0)) != draw(CounterRng(1, 2, 1)));
  CHECK(draw(make_rng(5, 0, Substream::auxiliary)) == draw(CounterRng(5, 0, 1)));

  std::set<std::uint64_t> seen;
  CounterRng rng(9, 0);
  for (int i = 0; i < 10000; ++i) seen.insert(rng());
  CHECK(seen.size() == 10000);
}

TEST_CASE("uniform_open stays inside (0, 1) with the right moments") {
  CounterRng rng(42, 7);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}
