#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace maskprobe {

// Deterministic, platform-independent random stream. We avoid the
// <random> distributions because their output differs across standard
// library implementations; digests of generated data must not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Integer in [0, n), n > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent child seed from a master seed and a label, so
// that data order, parameter init and scene generation draw from
// distinct streams. Stable across platforms and versions.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace maskprobe
