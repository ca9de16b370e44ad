#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gnsq/problem.hpp"

namespace gnsq {

// mt19937_64 with explicitly defined derived draws, so sequences do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // 53-bit uniform in [0,1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) by rejection on the top of the 64-bit range.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do { v = gen_(); } while (v >= limit);
    return v % n;
  }

  // Box–Muller, one value per call.
  double normal() {
    double u1;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Uniform point in the ball of the given radius.
  Vec in_ball(Eigen::Index n, double radius) {
    Vec v = normal_vec(n);
    const double nv = v.norm();
    if (nv == 0.0) return Vec::Zero(n);
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
    return v * (r / nv);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gnsq
