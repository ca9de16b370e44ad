#include "gnsq/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnsq {

ResidualProblem::ResidualProblem(std::size_t n, std::size_t m,
                                 ComponentEval eval, ComponentGrad grad,
                                 std::string name)
    : n_(n), m_(m), eval_(std::move(eval)), grad_(std::move(grad)),
      name_(std::move(name)) {
  if (n_ < 1 || m_ < 1)
    throw Error(ErrorCode::DimensionMismatch, "need n >= 1 and m >= 1");
  if (!eval_) throw Error(ErrorCode::ConfigError, "missing component_eval");
}

double ResidualProblem::value(std::size_t i, const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != n_)
    throw Error(ErrorCode::DimensionMismatch, "point has wrong dimension");
  double v = eval_(i, x);
  if (!std::isfinite(v))
    throw Error(ErrorCode::NonFiniteResidual,
                "component " + std::to_string(i + 1), i + 1);
  return v;
}

void ResidualProblem::gradient(std::size_t i, const Vec& x,
                               Eigen::Ref<Vec> out) const {
  if (static_cast<std::size_t>(x.size()) != n_)
    throw Error(ErrorCode::DimensionMismatch, "point has wrong dimension");
  if (grad_) {
    grad_(i, x, out);
  } else {
    Vec xp = x;
    for (std::size_t j = 0; j < n_; ++j) {
      const double h = std::max(1e-6, 1e-6 * std::abs(x[j]));
      const double xj = x[j];
      xp[j] = xj + h;
      const double fp = eval_(i, xp);
      xp[j] = xj - h;
      const double fm = eval_(i, xp);
      xp[j] = xj;
      out[j] = (fp - fm) / (2.0 * h);
    }
  }
  if (!out.allFinite())
    throw Error(ErrorCode::NonFiniteGradient,
                "gradient of component " + std::to_string(i + 1), i + 1);
}

BatchHandle::BatchHandle(std::vector<std::size_t> indices, std::size_t m)
    : idx_(std::move(indices)), m_(m) {
  if (idx_.empty() || idx_.size() > m_)
    throw Error(ErrorCode::InvalidBatch, "batch size out of range");
  for (std::size_t k = 0; k < idx_.size(); ++k) {
    if (idx_[k] >= m_)
      throw Error(ErrorCode::InvalidBatch, "index out of range", idx_[k] + 1);
    if (k > 0 && idx_[k] <= idx_[k - 1])
      throw Error(ErrorCode::InvalidBatch,
                  "indices must be strictly increasing", idx_[k] + 1);
  }
}

BatchHandle BatchHandle::full(std::size_t m) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return BatchHandle(std::move(idx), m);
}

BatchHandle BatchHandle::from_one_based(const std::vector<std::size_t>& idx,
                                        std::size_t m) {
  std::vector<std::size_t> z;
  z.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i < 1) throw Error(ErrorCode::InvalidBatch, "index 0 in 1-based batch");
    z.push_back(i - 1);
  }
  return BatchHandle(std::move(z), m);
}

std::vector<std::size_t> BatchHandle::one_based() const {
  std::vector<std::size_t> out(idx_);
  for (auto& i : out) ++i;
  return out;
}

static void check_batch(const ResidualProblem& p, const BatchHandle& B) {
  if (B.m() != p.m())
    throw Error(ErrorCode::InvalidBatch, "batch built for a different m");
}

Vec residual_hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B) {
  check_batch(p, B);
  const double s = 1.0 / std::sqrt(static_cast<double>(B.size()));
  Vec r(B.size());
  for (std::size_t j = 0; j < B.size(); ++j) r[j] = p.value(B.indices()[j], x) * s;
  return r;
}

Vec residual_full(const ResidualProblem& p, const Vec& x) {
  Vec r(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) r[i] = p.value(i, x);
  return r;
}

double eval_f1hat(const ResidualProblem& p, const Vec& x) {
  return residual_full(p, x).norm() / std::sqrt(static_cast<double>(p.m()));
}

double eval_f2hat(const ResidualProblem& p, const Vec& x) {
  return residual_full(p, x).squaredNorm() / static_cast<double>(p.m());
}

double eval_g1hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B) {
  return residual_hat(p, x, B).norm();
}

double eval_g2hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B) {
  return residual_hat(p, x, B).squaredNorm();
}

Mat jacobian_hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B) {
  check_batch(p, B);
  const double s = 1.0 / std::sqrt(static_cast<double>(B.size()));
  Mat J(B.size(), p.n());
  Vec g(p.n());
  for (std::size_t j = 0; j < B.size(); ++j) {
    p.gradient(B.indices()[j], x, g);
    J.row(j) = g.transpose() * s;
  }
  return J;
}

Vec grad_f2hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B) {
  return 2.0 * jacobian_hat(p, x, B).transpose() * residual_hat(p, x, B);
}

Vec grad_f2hat(const ResidualProblem& p, const Vec& x) {
  return grad_f2hat(p, x, BatchHandle::full(p.m()));
}

Linearization Linearization::at(const ResidualProblem& p, const Vec& x,
                                const BatchHandle& B) {
  return Linearization{x, B, residual_hat(p, x, B), jacobian_hat(p, x, B)};
}

}  // namespace gnsq
