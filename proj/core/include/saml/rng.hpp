#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace saml {

// PCG32 (XSH-RR output, 64-bit LCG state). Every stochastic routine in the
// library takes one of these explicitly; there is no global generator.
//
// uniform() and normal() are implemented here rather than through <random>
// distributions so that streams are identical across standard libraries.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL);

  result_type operator()() { return next_u32(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();
  // Unbiased integer in [0, bound).
  std::uint32_t below(std::uint32_t bound);

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = below(static_cast<std::uint32_t>(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t increment_ = 0;
};

// SplitMix64 finalizer over the pair; used to derive independent child seeds
// from (run seed, task index) keys.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace saml
