#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "ctxbias/matrix.hpp"

namespace ctxbias {

// Deterministic random stream: xoshiro256** whose 256-bit state is filled from
// the 64-bit seed by splitmix64.
//
// Streams are never shared between consumers. A consumer that needs its own
// randomness takes a child with split(label) or split(label, index):
//
//   child_seed = mix64(mix64(seed ^ fnv1a64(label)) + (index + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the splitmix64 finaliser. The child seed depends only on the
// parent's seed and the label, never on how many draws the parent has made, so
// trial t of a sweep sees the same numbers whether trials run serially or on
// separate threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

Matrix rng_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);
// Entries are 1 with probability p, else 0.
Matrix rng_bernoulli(Rng& rng, std::size_t rows, std::size_t cols, double p);
Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols, double stddev = 1.0);

// In-place Fisher-Yates shuffle driven by rng.
template <typename Range>
void shuffle(Range& range, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(std::size(range));
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(range[i - 1], range[j]);
  }
}

}  // namespace ctxbias
