#pragma once

#include "scotrl/types.hpp"

#include <cstdint>
#include <random>

namespace scotrl {

// splitmix64 finalizer; used for seed derivation and the fixed positional
// masks so every stream is reproducible independent of call order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

// Deterministic RNG wrapper. Avoids std::uniform_*_distribution so output
// streams depend only on the engine, not the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

  // Uniform integer in [lo, hi] inclusive.
  int between(int lo, int hi) { return lo + below(hi - lo + 1); }

  // Standard normal via Box-Muller on our own uniforms.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Index draw from an unnormalized nonnegative weight vector.
  int categorical(const Vec& w) {
    const double total = w.sum();
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      u -= w(i);
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(w.size() - 1);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
    }
  }

  // Random point on the probability simplex (normalized exponentials).
  Vec simplex(int dim) {
    Vec p(dim);
    for (int i = 0; i < dim; ++i) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      p(i) = -std::log(u);
    }
    p /= p.sum();
    return p;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace scotrl
