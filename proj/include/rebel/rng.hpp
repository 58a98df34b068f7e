#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace rebel {

// Deterministic random stream. mt19937_64 output is fully specified by the
// standard; doubles and bounded integers are derived here by hand because the
// std:: distributions are not bit-reproducible across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n), unbiased via rejection.
  int below(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<int>(v % un);
  }

  // Inverse-CDF draw from a probability vector (assumed to sum to ~1).
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("Rng::categorical: empty probabilities");
    const double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rebel
