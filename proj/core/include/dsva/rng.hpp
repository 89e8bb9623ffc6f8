#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dsva {

// Deterministic random stream (xoshiro256++ seeded through splitmix64).
// Identical seeds produce identical draws on every platform; none of the
// std:: distributions are used because their output is not portable.
//
// A stream is not shareable between threads. Workers take child streams:
// child(i) depends only on (seed, i), never on how much the parent has
// already drawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; the spare value is cached so draws
  // stay aligned with the underlying stream.
  double normal();
  double normal(double mean, double stddev);

  // Normal clipped by resampling to |x| <= 2*stddev (ViT-style init).
  double truncated_normal(double stddev);

  // Uniform integer on [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Sample k distinct indices from [0, n) in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  // Independent reproducible substream; a function of (seed, index) only.
  Rng child(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dsva
