#include "engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "gnsq/sampler.hpp"

namespace gnsq::detail {

InnerResult inner_solve_with_bound(const ModelAnchor& a, double eps_target,
                                   double M2, int max_iter);

namespace {

using Clock = std::chrono::steady_clock;

double tau_choice(const ProxLoopConfig& cfg, const SpectralCache& cache,
                  double g1, double L, bool& fallback) {
  switch (cfg.tau_mode) {
    case TauMode::G1: return g1;
    case TauMode::Fixed: return cfg.tau_fixed;
    case TauMode::Adaptive: break;
  }
  // convexity in τ is only established for η = 1
  if (cfg.step_rule != StepRule::ExactProx && cfg.eta != 1.0) return g1;
  try {
    const TauSearch t = optimal_tau(cache, L);
    if (t.phi <= tau_objective(cache, L, g1)) return t.tau;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BracketFailure) throw;
  }
  fallback = true;
  return g1;
}

}  // namespace

RunState run_prox_loop(const ResidualProblem& p, const ProxLoopConfig& cfg,
                       const Vec& x0) {
  if (static_cast<std::size_t>(x0.size()) != p.n())
    throw Error(ErrorCode::DimensionMismatch, "x0 has wrong dimension");
  if (!x0.allFinite()) throw Error(ErrorCode::DomainError, "x0 not finite");

  RunState s;
  s.x = x0;
  s.fd_jacobian = p.uses_finite_differences();
  s.iterates.push_back(x0);

  const std::size_t m = p.m();
  std::unique_ptr<BatchSampler> sampler;
  if (cfg.batch > 0) sampler = std::make_unique<BatchSampler>(m, cfg.batch, cfg.seed);
  const std::size_t b = cfg.batch > 0 ? cfg.batch : m;
  const std::size_t max_resample = std::max<std::size_t>(1, m / b);

  double Lhat = cfg.L_known ? *cfg.L_known
                            : estimate_jacobian_lipschitz(p, x0, 1.0, 32,
                                                          cfg.estimator_seed);
  s.L_hat = Lhat;
  double L_k = cfg.L_floor;
  bool first = true;
  double f1_prev = std::numeric_limits<double>::quiet_NaN();
  int stalls = 0;
  std::size_t zero_batches = 0;
  int tau_fallbacks = 0;

  for (std::size_t k = 0;; ++k) {
    const auto t0 = Clock::now();
    auto stamp = [&](TraceRecord& r) {
      if (cfg.record_wall_time)
        r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        Clock::now() - t0).count();
    };
    const double f1 = eval_f1hat(p, s.x);
    TraceRecord rec;
    rec.k = k;
    rec.f1hat = f1;
    rec.L_k = L_k;
    if (f1 <= cfg.stop.f1_tol) {
      rec.event = Event::Converged;
      rec.g1hat_batch = f1;
      stamp(rec);
      s.trace.push_back(rec);
      s.status = Termination::F1Tol;
      break;
    }
    if (k >= static_cast<std::size_t>(cfg.max_outer)) {
      s.status = Termination::MaxOuter;
      break;
    }

    BatchHandle B = (sampler && zero_batches < max_resample) ? sampler->sample()
                                                             : BatchHandle::full(m);
    auto lin = std::make_shared<const Linearization>(Linearization::at(p, s.x, B));
    const double g1 = lin->g1();
    rec.g1hat_batch = g1;
    rec.batch_indices = B.one_based();
    if (g1 == 0.0) {
      ++zero_batches;
      rec.event = Event::Resample;
      stamp(rec);
      s.trace.push_back(rec);
      s.iterates.push_back(s.x);
      s.eps_used.push_back(0.0);
      continue;
    }
    zero_batches = 0;
    const bool full = B.is_full();
    const SpectralCache cache = SpectralCache::factorize(lin->jacobian, lin->residual);

    double lower = cfg.L_floor;
    double cap = cfg.gamma * Lhat;
    if (cfg.interval == Interval::Variable) {
      lower = std::max(cfg.L_floor, cfg.L_floor / g1);
      cap = std::max(cfg.gamma_tilde * Lhat, cfg.gamma * Lhat / g1);
    }
    cap = std::max(cap, lower);
    if (cfg.interval == Interval::Variable) L_k = first ? lower : std::max(L_k, lower);
    L_k = std::min(L_k, cap);
    first = false;

    bool fallback = false;
    double tau = tau_choice(cfg, cache, g1, L_k, fallback);
    Vec d = cache.regularized_solve(tau * L_k);
    rec.prox_grad_norm = L_k * d.norm();
    rec.L_k = L_k;
    rec.tau_k = tau;
    if (full && rec.prox_grad_norm <= cfg.stop.prox_grad_tol) {
      rec.event = Event::Converged;
      stamp(rec);
      s.trace.push_back(rec);
      s.status = Termination::ProxGradTol;
      break;
    }

    EpsContext ec;
    ec.k = k;
    ec.f1_prev = f1_prev;
    ec.f1 = f1;
    ec.g1 = g1;
    ec.grad_norm = 2.0 * lin->half_gradient().norm();
    ec.L_k = L_k;
    const double eps_k = cfg.eps ? cfg.eps(ec) : 0.0;
    s.eps_used.push_back(eps_k);

    int probes = 0;
    bool stalled = false;
    bool refreshed = false;
    Vec cand;
    double psi_c = 0.0;
    for (;;) {
      ++probes;
      if (probes > 1) {
        tau = tau_choice(cfg, cache, g1, L_k, fallback);
        d = cache.regularized_solve(tau * L_k);
      }
      const ModelAnchor a(lin, L_k, tau);
      switch (cfg.step_rule) {
        case StepRule::ExactProx: cand = s.x - d; break;
        case StepRule::Scaled: cand = s.x - cfg.eta * d; break;
        case StepRule::Inexact:
          cand = inner_solve_with_bound(a, eps_k, cache.lambda_max(),
                                        cfg.inner_max_iter).x;
          break;
      }
      psi_c = psi_value(a, cand);
      const double g1c = eval_g1hat(p, cand, B);
      if (g1c <= psi_c * (1.0 + 1e-14)) break;
      if (L_k >= cap) {
        if (!refreshed) {
          refreshed = true;
          // a user-supplied constant is trusted up to one doubling
          Lhat = cfg.L_known ? 2.0 * Lhat
                             : std::max(2.0 * Lhat,
                                        estimate_jacobian_lipschitz(
                                            p, s.x, 1.0, 32, cfg.estimator_seed + k + 1));
          s.L_hat = Lhat;
          cap = cfg.interval == Interval::Variable
                    ? std::max(cfg.gamma_tilde * Lhat, cfg.gamma * Lhat / g1)
                    : cfg.gamma * Lhat;
          cap = std::max(cap, lower);
          if (L_k < cap) {
            L_k = std::min(2.0 * L_k, cap);
            continue;
          }
        }
        stalled = true;
        break;
      }
      L_k = std::min(2.0 * L_k, cap);
    }
    if (!stalled && psi_c > g1 * (1.0 + 1e-14)) stalled = true;
    if (fallback) ++tau_fallbacks;

    rec.L_k = L_k;
    rec.tau_k = tau;
    rec.eta_k = cfg.step_rule == StepRule::Scaled ? cfg.eta : 1.0;
    rec.n_L_probes = probes;
    if (stalled) {
      rec.event = Event::Stall;
      rec.step_norm = 0.0;
      ++stalls;
    } else {
      rec.event = Event::Accept;
      rec.step_norm = (cand - s.x).norm();
      s.x = cand;
      stalls = 0;
    }
    stamp(rec);
    s.trace.push_back(rec);
    s.iterates.push_back(s.x);
    f1_prev = f1;

    const double post_lower = cfg.interval == Interval::Variable
                                  ? std::max(cfg.L_floor, cfg.L_floor / g1)
                                  : cfg.L_floor;
    L_k = std::max(L_k / 2.0, post_lower);

    if (stalls >= cfg.stall_limit) {
      s.status = Termination::StallLimit;
      break;
    }
    if (full && !stalled && rec.step_norm <= cfg.stop.step_tol) {
      TraceRecord fin;
      fin.k = k + 1;
      fin.f1hat = eval_f1hat(p, s.x);
      fin.g1hat_batch = fin.f1hat;
      fin.L_k = L_k;
      fin.event = Event::Converged;
      s.trace.push_back(fin);
      s.status = Termination::StepTol;
      break;
    }
  }
  s.k = s.iterates.size() - 1;
  s.L_k = L_k;
  s.last_f1 = s.trace.empty() ? eval_f1hat(p, s.x) : s.trace.back().f1hat;
  if (s.status == Termination::MaxOuter) s.last_f1 = eval_f1hat(p, s.x);
  if (tau_fallbacks > 0)
    s.message = "tau search fell back to g1hat on " + std::to_string(tau_fallbacks) +
                " iterations";
  return s;
}

}  // namespace gnsq::detail
