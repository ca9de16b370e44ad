#pragma once

#include <cstdint>

#include "gnsq/problem.hpp"
#include "gnsq/rng.hpp"

namespace gnsq {

// Uniform b-subsets of {0..m-1} without replacement, by partial Fisher–Yates
// over the identity permutation; indices are returned sorted.
class BatchSampler {
 public:
  BatchSampler(std::size_t m, std::size_t b, std::uint64_t seed = 0);

  BatchHandle sample();
  std::size_t m() const { return m_; }
  std::size_t b() const { return b_; }

 private:
  std::size_t m_;
  std::size_t b_;
  Rng rng_;
  std::vector<std::size_t> perm_;
};

}  // namespace gnsq
