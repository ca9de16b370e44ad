#include "gnsq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnsq {

namespace {

double offdiag_norm(const Mat& A) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (i != j) s += A(i, j) * A(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen jacobi_eigen(const Mat& A_in, int max_sweeps, double rel_tol) {
  const Eigen::Index n = A_in.rows();
  if (A_in.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "eigensolver needs a square matrix");
  if (!A_in.allFinite())
    throw Error(ErrorCode::FactorizationError, "non-finite matrix");
  Mat A = 0.5 * (A_in + A_in.transpose());
  Mat V = Mat::Identity(n, n);
  const double scale = A.norm();
  int sweep = 0;
  for (;; ++sweep) {
    const double off = offdiag_norm(A);
    if (off <= rel_tol * scale || off == 0.0) break;
    if (sweep >= max_sweeps)
      throw Error(ErrorCode::FactorizationError,
                  "Jacobi did not converge in " + std::to_string(max_sweeps) +
                      " sweeps");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = A(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return A(a, a) > A(b, b); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = A(order[k], order[k]);
    out.vectors.col(k) = V.col(order[k]);
  }
  out.sweeps = sweep;
  return out;
}

SpectralCache SpectralCache::factorize(const Mat& J) {
  if (!J.allFinite())
    throw Error(ErrorCode::FactorizationError, "non-finite Jacobian");
  SpectralCache c;
  c.J_ = J;
  c.side_ = J.rows() > J.cols() ? GramSide::GramN : GramSide::GramB;
  const Mat G = c.side_ == GramSide::GramN ? Mat(J.transpose() * J)
                                           : Mat(J * J.transpose());
  SymmetricEigen eig = jacobi_eigen(G);
  const double lmax = eig.values.size() ? std::max(eig.values[0], 0.0) : 0.0;
  const double clamp = 1e-10 * lmax;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    double& l = eig.values[k];
    if (l < -std::max(clamp, 1e-10))
      throw Error(ErrorCode::ReconstructError, "Gram matrix not PSD");
    if (l <= clamp) l = 0.0;
  }
  c.Q_ = std::move(eig.vectors);
  c.lambda_ = std::move(eig.values);
  const double gmax = G.cwiseAbs().maxCoeff();
  if (gmax > 0.0) {
    const double rec =
        (c.Q_ * c.lambda_.asDiagonal() * c.Q_.transpose() - G).cwiseAbs().maxCoeff();
    if (rec > 1e-8 * gmax)
      throw Error(ErrorCode::ReconstructError, "eigendecomposition drifted");
  }
  return c;
}

SpectralCache SpectralCache::factorize(const Mat& J, const Vec& F) {
  if (F.size() != J.rows())
    throw Error(ErrorCode::DimensionMismatch, "residual length differs from rows");
  SpectralCache c = factorize(J);
  c.has_rhs_ = true;
  c.F_ = F;
  if (c.side_ == GramSide::GramN) {
    c.proj_ = c.Q_.transpose() * (J.transpose() * F);
    for (Eigen::Index k = 0; k < c.proj_.size(); ++k)
      if (c.lambda_[k] == 0.0) c.proj_[k] = 0.0;
    c.weights_ = c.proj_.cwiseAbs2();
  } else {
    c.proj_ = c.Q_.transpose() * F;
    // ‖JᵀF‖² splits as Σ λ_i (q_iᵀF)²
    c.weights_ = c.lambda_.cwiseProduct(c.proj_.cwiseAbs2());
  }
  if (c.side_ == GramSide::GramN) {
    Vec s(c.proj_.size());
    for (Eigen::Index k = 0; k < s.size(); ++k)
      s[k] = c.lambda_[k] > 0.0 ? c.proj_[k] / c.lambda_[k] : 0.0;
    c.ls_residual_ = (F - J * (c.Q_ * s)).squaredNorm();
  } else {
    for (Eigen::Index k = 0; k < c.proj_.size(); ++k)
      if (c.lambda_[k] == 0.0) c.ls_residual_ += c.proj_[k] * c.proj_[k];
  }
  return c;
}

Vec SpectralCache::regularized_solve(double tauL) const {
  if (!has_rhs_)
    throw Error(ErrorCode::DimensionMismatch, "cache built without a residual");
  if (!(tauL > 0.0)) throw Error(ErrorCode::SingularSolve, "tauL must be positive");
  if (side_ == GramSide::GramN) {
    Vec s = proj_.cwiseQuotient((lambda_.array() + tauL).matrix());
    return Q_ * s;
  }
  // SMW form (1/τL)Jᵀ(F − Q(τL+Λ)⁻¹ΛQᵀF) rewritten as JᵀQ(Λ+τL)⁻¹QᵀF; null
  // directions of JJᵀ are dropped since Jᵀq vanishes on them.
  Vec s(proj_.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s[k] = lambda_[k] > 0.0 ? proj_[k] / (lambda_[k] + tauL) : 0.0;
  return J_.transpose() * (Q_ * s);
}

Vec SpectralCache::regularized_solve(double tauL, const Vec& F) const {
  if (F.size() != J_.rows())
    throw Error(ErrorCode::DimensionMismatch, "residual length differs from rows");
  if (!(tauL > 0.0)) throw Error(ErrorCode::SingularSolve, "tauL must be positive");
  if (side_ == GramSide::GramN) {
    Vec p = Q_.transpose() * (J_.transpose() * F);
    for (Eigen::Index k = 0; k < p.size(); ++k)
      p[k] = lambda_[k] > 0.0 ? p[k] / (lambda_[k] + tauL) : 0.0;
    return Q_ * p;
  }
  Vec p = Q_.transpose() * F;
  for (Eigen::Index k = 0; k < p.size(); ++k)
    p[k] = lambda_[k] > 0.0 ? p[k] / (lambda_[k] + tauL) : 0.0;
  return J_.transpose() * (Q_ * p);
}

Vec SpectralCache::apply_inverse(double tauL, const Vec& g) const {
  if (g.size() != J_.cols())
    throw Error(ErrorCode::DimensionMismatch, "vector length differs from n");
  if (!(tauL > 0.0)) throw Error(ErrorCode::SingularSolve, "tauL must be positive");
  if (side_ == GramSide::GramN) {
    Vec p = Q_.transpose() * g;
    return Q_ * p.cwiseQuotient((lambda_.array() + tauL).matrix());
  }
  Vec p = Q_.transpose() * (J_ * g);
  p = p.cwiseQuotient((lambda_.array() + tauL).matrix());
  return (g - J_.transpose() * (Q_ * p)) / tauL;
}

double SpectralCache::gn_quadratic(double tauL) const {
  if (!has_rhs_)
    throw Error(ErrorCode::DimensionMismatch, "cache built without a residual");
  double s = 0.0;
  for (Eigen::Index k = 0; k < weights_.size(); ++k)
    if (weights_[k] > 0.0) s += weights_[k] / (lambda_[k] + tauL);
  return s;
}

double SpectralCache::gn_quadratic_derivative(double tauL) const {
  double s = 0.0;
  for (Eigen::Index k = 0; k < weights_.size(); ++k)
    if (weights_[k] > 0.0) {
      const double d = lambda_[k] + tauL;
      s -= weights_[k] / (d * d);
    }
  return s;
}

double SpectralCache::damped_residual(double t) const {
  if (!has_rhs_)
    throw Error(ErrorCode::DimensionMismatch, "cache built without a residual");
  double s = ls_residual_;
  for (Eigen::Index k = 0; k < lambda_.size(); ++k) {
    if (lambda_[k] == 0.0) continue;
    if (side_ == GramSide::GramN)
      s += proj_[k] * proj_[k] * t / (lambda_[k] * (lambda_[k] + t));
    else
      s += proj_[k] * proj_[k] * t / (lambda_[k] + t);
  }
  return s;
}

double SpectralCache::damped_residual_derivative(double t) const {
  return -gn_quadratic_derivative(t);
}

Vec SpectralCache::pseudo_inverse_solve() const {
  if (!has_rhs_)
    throw Error(ErrorCode::DimensionMismatch, "cache built without a residual");
  Vec s(proj_.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s[k] = lambda_[k] > 0.0 ? proj_[k] / lambda_[k] : 0.0;
  if (side_ == GramSide::GramN) return Q_ * s;
  return J_.transpose() * (Q_ * s);
}

Vec doubly_stochastic_solve(const SpectralCache& tilde, double tauL,
                            const Vec& g) {
  return tilde.apply_inverse(tauL, g);
}

SigmaBounds sigma_bounds(const Mat& J) {
  SigmaBounds out;
  if (J.size() == 0) return out;
  if (J.rows() > J.cols()) {
    // more rows than columns: JJᵀ is singular
    SymmetricEigen e = jacobi_eigen(J.transpose() * J);
    out.sigma_max = std::sqrt(std::max(e.values[0], 0.0));
    return out;
  }
  SymmetricEigen e = jacobi_eigen(J * J.transpose());
  out.sigma_max = std::sqrt(std::max(e.values[0], 0.0));
  out.sigma_min = std::sqrt(std::max(e.values[e.values.size() - 1], 0.0));
  return out;
}

}  // namespace gnsq
