#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nuer {

// Deterministic RNG wrapper. std::mt19937_64 is fully specified by the
// standard; the derived draws below are hand-rolled because the standard
// library distributions are implementation-defined and would break
// byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no spare caching; draw order is part of
  // the determinism contract).
  double next_normal() {
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Normal(0, std^2) truncated to [-2*std, 2*std] by resampling.
  double next_trunc_normal(double std_dev) {
    for (;;) {
      const double z = next_normal();
      if (z >= -2.0 && z <= 2.0) return z * std_dev;
    }
  }

  // In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Weighted index draw; weights must contain at least one positive entry.
  size_t next_weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double r = next_unit() * total;
    double c = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      c += weights[i];
      if (r < c) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

// Stable stream derivation so independent consumers (per-seed runs, per-epoch
// shuffles) never share draws.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace nuer
