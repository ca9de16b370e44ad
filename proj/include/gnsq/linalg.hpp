#pragma once

#include "gnsq/problem.hpp"

namespace gnsq {

struct SymmetricEigen {
  Vec values;   // descending
  Mat vectors;  // columns
  int sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix.
SymmetricEigen jacobi_eigen(const Mat& A, int max_sweeps = 30,
                            double rel_tol = 1e-14);

enum class GramSide { GramN, GramB };

class SpectralCache {
 public:
  static SpectralCache factorize(const Mat& J, const Vec& F);
  static SpectralCache factorize(const Mat& J);

  GramSide side() const { return side_; }
  const Mat& Q() const { return Q_; }
  const Vec& lambda() const { return lambda_; }
  const Mat& jacobian() const { return J_; }
  Eigen::Index rows() const { return J_.rows(); }
  Eigen::Index cols() const { return J_.cols(); }
  bool has_rhs() const { return has_rhs_; }
  const Vec& rhs() const { return F_; }

  // d with (JᵀJ + tauL·I) d = JᵀF, F being the residual stored at factorization.
  Vec regularized_solve(double tauL) const;
  Vec regularized_solve(double tauL, const Vec& F) const;
  // (JᵀJ + tauL·I)⁻¹ g for arbitrary g ∈ ℝⁿ.
  Vec apply_inverse(double tauL, const Vec& g) const;
  // ⟨(JᵀJ+tauL·I)⁻¹JᵀF, JᵀF⟩ and its derivative in tauL.
  double gn_quadratic(double tauL) const;
  double gn_quadratic_derivative(double tauL) const;
  // min_h ‖F + Jh‖² + t‖h‖² and its derivative in t (= ‖d(t)‖²).
  double damped_residual(double t) const;
  double damped_residual_derivative(double t) const;
  // Minimum-norm least-squares step J⁺F.
  Vec pseudo_inverse_solve() const;

  double lambda_max() const { return lambda_.size() ? lambda_[0] : 0.0; }

 private:
  GramSide side_ = GramSide::GramB;
  Mat J_;
  Mat Q_;
  Vec lambda_;
  bool has_rhs_ = false;
  Vec F_;
  Vec proj_;     // QᵀJᵀF (GRAM_N) or QᵀF (GRAM_B)
  Vec weights_;  // squared spectral weights of JᵀF
  double ls_residual_ = 0.0;  // ‖F − JJ⁺F‖²
};

Vec doubly_stochastic_solve(const SpectralCache& tilde, double tauL,
                            const Vec& g);

struct SigmaBounds {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

SigmaBounds sigma_bounds(const Mat& J);

}  // namespace gnsq
