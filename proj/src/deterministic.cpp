#include "gnsq/deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "engine.hpp"
#include "gnsq/rng.hpp"

namespace gnsq {

namespace detail {

InnerResult inner_solve_with_bound(const ModelAnchor& a, double eps_target,
                                   double M2, int max_iter) {
  if (!(eps_target >= 0.0))
    throw Error(ErrorCode::DomainError, "eps_target must be nonnegative");
  const double Lpsi = a.L + M2 / a.tau;
  const double beta = 1.0 / Lpsi;
  // gradient-norm test with β = 1/L_ψ, intersected with the strong-convexity
  // bound gap ≤ ‖∇ψ‖²/(2L)
  const double thr = std::min(eps_target / (beta + beta * beta * Lpsi / 2.0),
                              2.0 * a.L * eps_target);
  if (max_iter <= 0) {
    const double e = eps_target > 0.0 ? eps_target : 1e-16;
    const double lg = std::max(1.0, std::ceil(std::log(1.0 / e)));
    max_iter = static_cast<int>(10.0 * static_cast<double>(a.x().size()) * lg);
  }
  InnerResult out;
  Vec y = a.x();
  Vec best = y;
  double best_g2 = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const Vec g = psi_gradient(a, y);
    const double gn2 = g.squaredNorm();
    if (gn2 < best_g2) {
      best_g2 = gn2;
      best = y;
    }
    if (gn2 <= thr) {
      out.x = y;
      out.gap_bound = gn2 / (2.0 * a.L);
      out.iterations = it;
      return out;
    }
    if (it >= max_iter) break;
    y -= beta * g;
  }
  out.x = best;
  out.gap_bound = std::numeric_limits<double>::infinity();
  out.iterations = max_iter;
  out.hit_limit = true;
  return out;
}

}  // namespace detail

void DetSolverConfig::validate() const {
  if (!(L_init > 0.0)) throw Error(ErrorCode::ConfigError, "L_init must be positive");
  if (!(eta > 0.0 && eta < 2.0)) throw Error(ErrorCode::ConfigError, "eta must lie in (0,2)");
  if (max_outer < 1) throw Error(ErrorCode::ConfigError, "max_outer must be >= 1");
  if (tau_rule == TauRule::Fixed && !(tau_fixed > 0.0))
    throw Error(ErrorCode::ConfigError, "fixed tau must be positive");
  if (L_known && !(*L_known >= 0.0))
    throw Error(ErrorCode::ConfigError, "L_known must be nonnegative");
}

double estimate_jacobian_lipschitz(const ResidualProblem& p, const Vec& center,
                                   double radius, int pairs, std::uint64_t seed) {
  Rng rng(seed);
  const BatchHandle B = BatchHandle::full(p.m());
  const auto n = static_cast<Eigen::Index>(p.n());
  double best = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Vec x = center + rng.in_ball(n, radius);
    const Vec y = center + rng.in_ball(n, radius);
    const double dist = (y - x).norm();
    if (dist == 0.0) continue;
    const double num = (jacobian_hat(p, y, B) - jacobian_hat(p, x, B)).norm();
    best = std::max(best, num / dist);
  }
  return 2.0 * best;
}

namespace {

detail::ProxLoopConfig to_loop(const DetSolverConfig& cfg) {
  cfg.validate();
  detail::ProxLoopConfig lc;
  lc.step_rule = cfg.step_rule;
  lc.tau_mode = cfg.tau_rule == TauRule::F1Hat   ? detail::TauMode::G1
                : cfg.tau_rule == TauRule::Fixed ? detail::TauMode::Fixed
                                                 : detail::TauMode::Adaptive;
  lc.tau_fixed = cfg.tau_fixed;
  lc.eta = cfg.step_rule == StepRule::Scaled ? cfg.eta : 1.0;
  lc.L_floor = cfg.L_init;
  lc.gamma = 2.0;
  lc.L_known = cfg.L_known;
  lc.max_outer = cfg.max_outer;
  lc.stop = cfg.stop;
  lc.stall_limit = cfg.stall_limit;
  lc.estimator_seed = cfg.estimator_seed;
  lc.record_wall_time = cfg.record_wall_time;
  lc.inner_max_iter = cfg.inner_max_iter;
  const double eps = cfg.eps;
  switch (cfg.eps_rule) {
    case EpsRule::Zero: break;
    case EpsRule::Const:
      lc.eps = [eps](const detail::EpsContext&) { return eps; };
      break;
    case EpsRule::ProportionalDecrease:
      lc.eps = [eps](const detail::EpsContext& c) {
        if (std::isnan(c.f1_prev)) return eps;
        return eps * std::max(0.0, c.f1_prev - c.f1);
      };
      break;
  }
  return lc;
}

}  // namespace

RunState scheme1_run(const ResidualProblem& p, const DetSolverConfig& cfg,
                     const Vec& x0) {
  return detail::run_prox_loop(p, to_loop(cfg), x0);
}

RunState scheme2_run(const ResidualProblem& p, const DetSolverConfig& cfg,
                     const Vec& x0) {
  DetSolverConfig c = cfg;
  c.tau_rule = TauRule::Adaptive;
  return detail::run_prox_loop(p, to_loop(c), x0);
}

LineSearchResult line_search_L(const ResidualProblem& p, const Vec& x,
                               double tau, double L_start, double L_cap) {
  if (!(tau > 0.0)) throw Error(ErrorCode::DomainError, "tau must be positive");
  if (!(L_start > 0.0)) throw Error(ErrorCode::DomainError, "L_start must be positive");
  const BatchHandle B = BatchHandle::full(p.m());
  auto lin = std::make_shared<const Linearization>(Linearization::at(p, x, B));
  const SpectralCache cache = SpectralCache::factorize(lin->jacobian, lin->residual);
  LineSearchResult out;
  double L = L_start;
  for (;;) {
    ++out.n_probes;
    const ModelAnchor a(lin, L, tau);
    const Vec cand = prox_point(a, cache);
    if (eval_f1hat(p, cand) <= psi_value(a, cand) * (1.0 + 1e-14)) {
      out.L = L;
      out.x = cand;
      return out;
    }
    if (L >= L_cap)
      throw Error(ErrorCode::CapExceeded, "majorization fails at the L cap");
    L = std::min(2.0 * L, L_cap);
  }
}

InnerResult inexact_inner_solve(const ModelAnchor& a, double eps_target,
                                int max_iter) {
  const double smax = sigma_bounds(a.lin->jacobian).sigma_max;
  return detail::inner_solve_with_bound(a, eps_target, smax * smax, max_iter);
}

std::vector<double> certificate_check_det(const ResidualProblem& p,
                                          const RunState& s,
                                          const DetSolverConfig& cfg,
                                          const ProblemConstants& c,
                                          DetCertificate which) {
  std::vector<double> out;
  const std::size_t K = s.iterates.size() - 1;
  auto f1_at = [&](std::size_t i) { return eval_f1hat(p, s.iterates[i]); };
  auto eps_at = [&](std::size_t i) {
    return i < s.eps_used.size() ? s.eps_used[i] : 0.0;
  };
  double maxL = 0.0;
  for (const auto& r : s.trace) maxL = std::max(maxL, r.L_k);

  switch (which) {
    case DetCertificate::T5: {
      const double mu = ProblemConstants::need(c.mu, "mu");
      for (std::size_t i = 0; i < K; ++i) {
        const TraceRecord& r = s.trace[i];
        if (r.event != Event::Accept) continue;
        const double f1 = r.f1hat, f2 = f1 * f1;
        const double tau = r.tau_k, L = r.L_k, eta = r.eta_k;
        const double q = eta * (2.0 - eta);
        double rhs;
        if (tau >= mu / L) {
          rhs = tau / 2.0 + f2 / (2.0 * tau) * (1.0 - q * mu / (L * tau + mu));
        } else {
          // ξ = 1 is the weakest admissible instance of the second branch
          rhs = tau / 2.0 + f2 * (1.0 - eta) * (1.0 - eta) / (2.0 * tau) +
                q * L * f2 / (2.0 * mu) - q * L * L * f2 * tau / (2.0 * mu * mu * 8.0);
        }
        out.push_back(rhs - f1_at(i + 1));
      }
      break;
    }
    case DetCertificate::T7: {
      if (cfg.tau_rule != TauRule::F1Hat)
        throw Error(ErrorCode::DomainError, "product bound assumes tau = f1hat");
      const double mu = ProblemConstants::need(c.mu, "mu");
      const double f10 = f1_at(0);
      double prod = 1.0;
      for (std::size_t i = 0; i < K; ++i) {
        const TraceRecord& r = s.trace[i];
        const double Lf = r.L_k * r.f1hat;
        const double e = 1.0 - r.eta_k;
        prod *= 0.5 + (Lf + e * e * mu) / (2.0 * (Lf + mu));
        out.push_back(f10 * prod - f1_at(i + 1));
      }
      break;
    }
    case DetCertificate::T3: {
      const double mu = ProblemConstants::need(c.mu, "mu");
      const double LF0 = ProblemConstants::need(c.L_Fhat, "L_Fhat");
      for (std::size_t i = 0; i < K; ++i) {
        const TraceRecord& r = s.trace[i];
        if (r.event != Event::Accept) continue;
        // the ladder needs L_k ≤ 2L_F̂; a larger floor is covered by inflating L_F̂
        const double LF = std::max(LF0, r.L_k / 2.0);
        const double f1 = r.f1hat;
        const double bound = f1 <= mu / (4.0 * LF)
                                 ? f1 / 2.0 + LF / mu * f1 * f1
                                 : f1 - mu / (16.0 * LF);
        out.push_back(eps_at(i) + bound - f1_at(i + 1));
      }
      break;
    }
    case DetCertificate::T1: {
      const double LF = std::max(ProblemConstants::need(c.L_Fhat, "L_Fhat"), maxL / 2.0);
      const double L = cfg.L_init;
      double eps = 0.0;
      for (double e : s.eps_used) eps = std::max(eps, e);
      const double f10 = f1_at(0);
      const BatchHandle B = BatchHandle::full(p.m());
      double min_pg = std::numeric_limits<double>::infinity();
      std::vector<double> pg(K), f1s(K);
      for (std::size_t i = 0; i < K; ++i) {
        const Linearization lin = Linearization::at(p, s.iterates[i], B);
        f1s[i] = lin.g1();
        if (f1s[i] == 0.0) { pg[i] = 0.0; continue; }
        const SpectralCache cache = SpectralCache::factorize(lin.jacobian, lin.residual);
        const Vec d = cache.regularized_solve(2.0 * LF * f1s[i]);
        pg[i] = (2.0 * LF * d).squaredNorm();
      }
      for (std::size_t k = 1; k <= K; ++k) {
        min_pg = std::min(min_pg, pg[k - 1]);
        const double avg = eps + (f10 - f1_at(k)) / static_cast<double>(k);
        const double s1 = 8.0 * LF * LF / L * avg - min_pg;
        double r = s.trace[k - 1].step_norm;
        if (!(r > 0.0)) r = 1.0;
        double min_kap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
          if (f1s[i] == 0.0) { min_kap = 0.0; break; }
          const double dr = delta_r(p, s.iterates[i], r);
          min_kap = std::min(min_kap, 2.0 * (LF * r) * (LF * r) *
                                          kappa(dr / (4.0 * f1s[i] * LF * r * r)));
        }
        const double s2 = LF * avg - min_kap;
        out.push_back(std::min(s1, s2));
      }
      break;
    }
  }
  return out;
}

}  // namespace gnsq
