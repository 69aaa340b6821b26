// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace rknode {

// Deterministic random source. The engine (mt19937_64) is fully specified by
// the standard, but the std:: distributions are not, so every transform here
// is hand-rolled. Identical seeds give identical streams on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. The second variate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Standard Cauchy via inverse CDF. u == 0 maps to tan(-pi/2); reject it so
  // draws stay finite-but-heavy-tailed rather than astronomically extreme.
  double cauchy() {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return std::tan(std::numbers::pi * (u - 0.5));
  }

  // Uniform integer in [0, n). Rejection-free modulo would bias; use
  // Lemire-style rejection on the top bits.
  std::uint64_t integer(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::integer: n must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Child stream decorrelated from the parent. Consuming from the child does
  // not advance the parent beyond this one draw.
  Rng fork() {
    const std::uint64_t s = engine_() ^ 0x9e3779b97f4a7c15ull;
    return Rng(s);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// In-place Fisher-Yates shuffle of 0..n-1 index vectors (or anything else).
template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.integer(i));
    std::swap(v[i - 1], v[j]);
  }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle_vec(idx, rng);
  return idx;
}

}  // namespace rknode
