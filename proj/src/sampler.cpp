#include "gnsq/sampler.hpp"

#include <algorithm>
#include <numeric>

namespace gnsq {

BatchSampler::BatchSampler(std::size_t m, std::size_t b, std::uint64_t seed)
    : m_(m), b_(b), rng_(seed), perm_(m) {
  if (b_ < 1 || b_ > m_)
    throw Error(ErrorCode::InvalidBatch, "batch size must lie in 1..m");
}

BatchHandle BatchSampler::sample() {
  if (b_ == m_) return BatchHandle::full(m_);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t j = 0; j < b_; ++j) {
    const std::size_t r = j + static_cast<std::size_t>(rng_.below(m_ - j));
    std::swap(perm_[j], perm_[r]);
  }
  std::vector<std::size_t> idx(perm_.begin(), perm_.begin() + b_);
  std::sort(idx.begin(), idx.end());
  return BatchHandle(std::move(idx), m_);
}

}  // namespace gnsq
