#include "gnsq/model.hpp"

#include <algorithm>
#include <cmath>

namespace gnsq {

ModelAnchor::ModelAnchor(std::shared_ptr<const Linearization> lin_, double L_,
                         double tau_)
    : lin(std::move(lin_)), L(L_), tau(tau_) {
  if (!lin) throw Error(ErrorCode::ConfigError, "anchor without linearization");
  if (!(L > 0.0)) throw Error(ErrorCode::DomainError, "L must be positive");
  if (!(tau >= kTauFloor)) throw Error(ErrorCode::DomainError, "tau below floor");
}

double psi_value(const ModelAnchor& a, const Vec& y) {
  const Vec h = y - a.x();
  const double phi2 = (a.lin->residual + a.lin->jacobian * h).squaredNorm();
  return a.tau / 2.0 + phi2 / (2.0 * a.tau) + a.L * h.squaredNorm() / 2.0;
}

Vec psi_gradient(const ModelAnchor& a, const Vec& y) {
  const Vec h = y - a.x();
  const Vec r = a.lin->residual + a.lin->jacobian * h;
  return a.L * h + a.lin->jacobian.transpose() * r / a.tau;
}

double tau_objective(const SpectralCache& cache, double L, double tau) {
  return tau / 2.0 + cache.damped_residual(tau * L) / (2.0 * tau);
}

double tau_objective_derivative(const SpectralCache& cache, double L, double tau) {
  const double t = tau * L;
  return 0.5 - cache.damped_residual(t) / (2.0 * tau * tau) +
         L * cache.damped_residual_derivative(t) / (2.0 * tau);
}

double psi_at_prox(const SpectralCache& cache, double L, double tau) {
  return tau_objective(cache, L, tau);
}

Vec prox_point(const ModelAnchor& a, const SpectralCache& cache) {
  return a.x() - cache.regularized_solve(a.tau * a.L);
}

Vec scaled_step(const ModelAnchor& a, const SpectralCache& cache, double eta) {
  return a.x() - eta * cache.regularized_solve(a.tau * a.L);
}

TauSearch optimal_tau(const SpectralCache& cache, double L, double tol) {
  const double g1 = std::sqrt(cache.rhs().squaredNorm());
  if (!(g1 > 0.0))
    throw Error(ErrorCode::DomainError, "optimal_tau needs a nonzero residual");
  auto dphi = [&](double t) { return tau_objective_derivative(cache, L, t); };
  // Below this the model value at the prox point is lost in rounding of φ².
  const double lower = std::max(kTauFloor, 1e-12 * g1);

  double hi = g1;
  int doublings = 0;
  while (dphi(hi) <= 0.0) {
    if (++doublings > 64)
      throw Error(ErrorCode::BracketFailure, "no increasing tail for phi(tau)");
    hi *= 2.0;
  }
  double lo = hi / 2.0;
  while (lo > lower && dphi(lo) > 0.0) lo /= 2.0;
  TauSearch out;
  if (lo <= lower) {
    lo = lower;
    if (dphi(lo) >= 0.0) {
      out.tau = lo;
      out.phi = tau_objective(cache, L, lo);
      out.dphi = dphi(lo);
      out.at_lower_bound = true;
      return out;
    }
  }
  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < 400; ++it) {
    mid = std::sqrt(lo * hi);
    const double d = dphi(mid);
    if (std::abs(d) <= tol) break;
    if (d > 0.0) hi = mid; else lo = mid;
    if (hi / lo < 1.0 + 1e-15) break;
  }
  out.tau = mid;
  out.phi = tau_objective(cache, L, mid);
  out.dphi = dphi(mid);
  return out;
}

double kappa(double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::DomainError, "kappa needs t >= 0");
  return t <= 1.0 ? t * t / 2.0 : t - 0.5;
}

double delta_r(const SpectralCache& cache, double r) {
  if (!(r > 0.0)) throw Error(ErrorCode::DomainError, "radius must be positive");
  const Vec& F = cache.rhs();
  const Mat& J = cache.jacobian();
  const double f2 = F.squaredNorm();
  const double gnorm = (J.transpose() * F).norm();
  if (gnorm == 0.0) return 0.0;
  Vec d = cache.pseudo_inverse_solve();
  if (d.norm() > r) {
    double lo = 0.0, hi = gnorm / r;
    bool found = false;
    for (int it = 0; it < 200; ++it) {
      const double lam = 0.5 * (lo + hi);
      d = cache.regularized_solve(lam);
      const double gap = d.norm() - r;
      if (std::abs(gap) <= 1e-12 * std::max(1.0, r)) { found = true; break; }
      if (gap > 0.0) lo = lam; else hi = lam;
      if (hi - lo <= 0.0) break;
    }
    if (!found)
      throw Error(ErrorCode::RootFindFailure, "multiplier bisection did not converge");
  }
  const double res = (F - J * d).squaredNorm();
  return std::clamp(f2 - res, 0.0, f2);
}

double delta_r(const ResidualProblem& p, const Vec& x, double r) {
  const BatchHandle B = BatchHandle::full(p.m());
  const Linearization lin = Linearization::at(p, x, B);
  const double d = delta_r(SpectralCache::factorize(lin.jacobian, lin.residual), r);
  return std::min(d, eval_f2hat(p, x));
}

double delta_tilde_r(const ResidualProblem& p, const Vec& x, double r) {
  const BatchHandle B = BatchHandle::full(p.m());
  const Linearization lin = Linearization::at(p, x, B);
  const double f2 = lin.g2();
  const double d = delta_r(SpectralCache::factorize(lin.jacobian, lin.residual), r);
  return std::sqrt(f2) - std::sqrt(std::max(f2 - d, 0.0));
}

}  // namespace gnsq
