#pragma once

#include <memory>

#include "gnsq/linalg.hpp"
#include "gnsq/problem.hpp"

namespace gnsq {

inline constexpr double kTauFloor = 1e-300;

// Anchor (x, L, τ, B) of ψ̂_{x,L,τ}(·,B). The linearization carries x and B.
struct ModelAnchor {
  std::shared_ptr<const Linearization> lin;
  double L = 1.0;
  double tau = 1.0;

  ModelAnchor(std::shared_ptr<const Linearization> lin, double L, double tau);
  const Vec& x() const { return lin->x; }
  const BatchHandle& batch() const { return lin->batch; }
};

double psi_value(const ModelAnchor& a, const Vec& y);
Vec psi_gradient(const ModelAnchor& a, const Vec& y);

// Closed-form ψ at the prox point, from the cache.
double psi_at_prox(const SpectralCache& cache, double L, double tau);

Vec prox_point(const ModelAnchor& a, const SpectralCache& cache);
Vec scaled_step(const ModelAnchor& a, const SpectralCache& cache, double eta);

struct TauSearch {
  double tau = 0.0;
  double phi = 0.0;    // ψ at T_{L,τ}
  double dphi = 0.0;   // φ'(τ)
  bool at_lower_bound = false;
};

// φ(τ) = τ/2 + min_h{‖Ĝ+Ĵh‖² + τL‖h‖²}/(2τ).
double tau_objective(const SpectralCache& cache, double L, double tau);
double tau_objective_derivative(const SpectralCache& cache, double L, double tau);

TauSearch optimal_tau(const SpectralCache& cache, double L, double tol = 1e-12);

double kappa(double t);

double delta_r(const SpectralCache& cache, double r);
double delta_r(const ResidualProblem& p, const Vec& x, double r);
double delta_tilde_r(const ResidualProblem& p, const Vec& x, double r);

}  // namespace gnsq
