#include "gnsq/stochastic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "engine.hpp"
#include "gnsq/diagnostics.hpp"

namespace gnsq {

void StochSolverConfig::validate(std::size_t m) const {
  if (b < 1 || b > m) throw Error(ErrorCode::ConfigError, "b must lie in 1..m");
  if (b_tilde > m) throw Error(ErrorCode::ConfigError, "b_tilde must lie in 1..m");
  if (!(gamma >= 1.0)) throw Error(ErrorCode::ConfigError, "gamma must be >= 1");
  if (!(gamma_tilde >= 1.0 && gamma_tilde <= gamma))
    throw Error(ErrorCode::ConfigError, "gamma_tilde must lie in [1, gamma]");
  if (!(L_floor > 0.0)) throw Error(ErrorCode::ConfigError, "L_floor must be positive");
  if (!(eta > 0.0)) throw Error(ErrorCode::ConfigError, "eta must be positive");
  if (!(tauL_tilde > 0.0)) throw Error(ErrorCode::ConfigError, "tauL_tilde must be positive");
  if (!(l_init > 0.0)) throw Error(ErrorCode::ConfigError, "l_init must be positive");
  if (max_outer < 1) throw Error(ErrorCode::ConfigError, "max_outer must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0))
    throw Error(ErrorCode::ConfigError, "delta must lie in [0,1)");
}

double eps_bound_rule17(EpsPolicy mode, const EpsInputs& in) {
  switch (mode) {
    case EpsPolicy::EpsOverG1:
      return in.g1 > 0.0 ? in.eps / in.g1 : 0.0;
    case EpsPolicy::GradProportional: {
      const double M = ProblemConstants::need(in.M_G, "M_G");
      if (in.delta == 0.0 || in.grad_norm == 0.0 || in.g1 == 0.0) return 0.0;
      return in.delta * in.grad_norm * in.grad_norm /
             (8.0 * in.g1 * (M * M + in.g1 * in.L_k));
    }
    case EpsPolicy::PLProportional: {
      const double mu = ProblemConstants::need(in.mu, "mu");
      if (in.delta == 0.0) return 0.0;
      return in.delta * in.g1 * mu / (2.0 * (in.L_k * in.g1 + mu));
    }
  }
  return 0.0;
}

namespace {

ProblemConstants constants_for(const ResidualProblem& p, const StochSolverConfig& cfg,
                               const Vec& x0) {
  const ProblemConstants est =
      estimate_constants(p, x0, 64, 1.0, cfg.estimator_seed, cfg.b);
  return merge_constants(cfg.constants, est);
}

detail::ProxLoopConfig to_loop(const ResidualProblem& p, const StochSolverConfig& cfg,
                               const Vec& x0) {
  cfg.validate(p.m());
  detail::ProxLoopConfig lc;
  switch (cfg.step_rule) {
    case StochStepRule::Rule15: lc.step_rule = StepRule::Scaled; break;
    case StochStepRule::Rule17: lc.step_rule = StepRule::Inexact; break;
    case StochStepRule::Rule16:
      throw Error(ErrorCode::ConfigError, "rule 16 belongs to scheme 4");
  }
  if (cfg.step_rule == StochStepRule::Rule15 && cfg.eta_policy != EtaPolicy::Const)
    throw Error(ErrorCode::ConfigError, "rule 15 takes a constant eta");
  lc.eta = cfg.eta;
  lc.L_floor = cfg.L_floor;
  lc.gamma = cfg.gamma;
  lc.gamma_tilde = cfg.gamma_tilde;
  lc.L_known = cfg.L_known;
  lc.max_outer = cfg.max_outer;
  lc.stop = cfg.stop;
  lc.stall_limit = cfg.stall_limit;
  lc.estimator_seed = cfg.estimator_seed;
  lc.record_wall_time = cfg.record_wall_time;
  lc.inner_max_iter = cfg.inner_max_iter;
  lc.batch = cfg.b;
  lc.seed = cfg.seed;
  if (cfg.step_rule == StochStepRule::Rule17) {
    EpsInputs base;
    base.eps = cfg.eps;
    base.delta = cfg.delta;
    if (cfg.eps_policy != EpsPolicy::EpsOverG1) {
      const ProblemConstants c = constants_for(p, cfg, x0);
      base.M_G = c.M_G;
      base.mu = c.mu;
    }
    const EpsPolicy mode = cfg.eps_policy;
    lc.eps = [base, mode](const detail::EpsContext& e) {
      EpsInputs in = base;
      in.g1 = e.g1;
      in.grad_norm = e.grad_norm;
      in.L_k = e.L_k;
      return eps_bound_rule17(mode, in);
    };
  }
  return lc;
}

}  // namespace

RunState scheme3_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0) {
  detail::ProxLoopConfig lc = to_loop(p, cfg, x0);
  return detail::run_prox_loop(p, lc, x0);
}

RunState scheme5_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0) {
  detail::ProxLoopConfig lc = to_loop(p, cfg, x0);
  lc.interval = detail::Interval::Variable;
  return detail::run_prox_loop(p, lc, x0);
}

RunState scheme6_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0) {
  detail::ProxLoopConfig lc = to_loop(p, cfg, x0);
  lc.interval = detail::Interval::Variable;
  lc.tau_mode = detail::TauMode::Adaptive;
  return detail::run_prox_loop(p, lc, x0);
}

double eta_lemma17(const Mat& J_B, const Mat& J_Btilde, double tauL, double l_k,
                   const Vec& F_B) {
  if (!(tauL > 0.0) || !(l_k > 0.0))
    throw Error(ErrorCode::DomainError, "tauL and l_k must be positive");
  const Vec g = J_B.transpose() * F_B;
  if (g.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroGradient, "zero batch gradient");
  const SpectralCache c = SpectralCache::factorize(J_Btilde);
  const Vec Hg = c.apply_inverse(tauL, g);
  return 2.0 * g.dot(Hg) / (l_k * Hg.squaredNorm());
}

double eta_theorem18(double mu, double M_G, double M_F, double L_Fhat,
                     double P_f1, double tauL) {
  if (!(mu > 0.0) || !(M_G > 0.0) || !(M_F > 0.0) || !(tauL > 0.0) ||
      L_Fhat < 0.0 || P_f1 < 0.0)
    throw Error(ErrorCode::DomainError, "constants must be positive");
  if (mu > M_G * M_G) throw Error(ErrorCode::DomainError, "mu exceeds M_G^2");
  return mu * tauL * tauL /
         ((M_G * M_G + tauL) * (L_Fhat * P_f1 + M_F * M_F) * M_G * M_G);
}

double envelope_rate(const ProblemConstants& c, double tauL) {
  const double mu = ProblemConstants::need(c.mu, "mu");
  const double MG = ProblemConstants::need(c.M_G, "M_G");
  const double MF = ProblemConstants::need(c.M_F, "M_F");
  const double LF = ProblemConstants::need(c.L_Fhat, "L_Fhat");
  const double P = ProblemConstants::need(c.P_f1, "P_f1");
  const double q = mu * tauL / (MG * MG + tauL);
  return std::exp(-q * q / ((LF * P + MF * MF) * MG * MG));
}

namespace {

struct Scheme4Options {
  bool interpolation = false;
};

RunState scheme4_loop(const ResidualProblem& p, const StochSolverConfig& cfg,
                      const Vec& x0, const Scheme4Options& opt) {
  cfg.validate(p.m());
  if (static_cast<std::size_t>(x0.size()) != p.n())
    throw Error(ErrorCode::DimensionMismatch, "x0 has wrong dimension");
  using Clock = std::chrono::steady_clock;
  const std::size_t m = p.m();
  const std::size_t bt = cfg.b_tilde ? cfg.b_tilde : cfg.b;
  const bool independent = opt.interpolation || cfg.independent_tilde || bt != cfg.b;

  RunState s;
  s.x = x0;
  s.fd_jacobian = p.uses_finite_differences();
  s.iterates.push_back(x0);

  const bool need_consts = opt.interpolation || cfg.eta_policy == EtaPolicy::Theorem18 ||
                           !(cfg.l_policy == LPolicy::Known && cfg.gamma == 1.0);
  ProblemConstants c = cfg.constants;
  if (need_consts) {
    c = constants_for(p, cfg, x0);
    if (opt.interpolation || cfg.eta_policy == EtaPolicy::Theorem18) {
      if (!cfg.constants.mu) {
        const auto pts = sample_cloud(x0, 8, 1.0, cfg.estimator_seed);
        c.mu = mu_all_batch_sizes(p, pts, cfg.estimator_seed);
      }
      if (!cfg.constants.M_G) {
        // both batch sizes enter through the gradient and the curvature operator
        const ProblemConstants ct = estimate_constants(p, x0, 64, 1.0, cfg.estimator_seed, bt);
        c.M_G = std::max(*c.M_G, *ct.M_G);
      }
    }
  }

  double l_floor = cfg.l_init;
  double l_cap = std::numeric_limits<double>::infinity();
  bool skip_search = cfg.l_policy == LPolicy::Known && cfg.gamma == 1.0;
  double eta_fixed = cfg.eta;
  double rate = 1.0;
  if (opt.interpolation) {
    l_floor = c.l_f2();
    skip_search = true;
  } else if (!skip_search) {
    l_cap = std::max(cfg.gamma * c.l_g2(), l_floor);
  }
  if (opt.interpolation || cfg.eta_policy == EtaPolicy::Theorem18) {
    eta_fixed = eta_theorem18(*c.mu, *c.M_G, *c.M_F, *c.L_Fhat,
                              ProblemConstants::need(c.P_f1, "P_f1"), cfg.tauL_tilde);
    rate = envelope_rate(c, cfg.tauL_tilde);
  }

  BatchSampler sampler(m, cfg.b, cfg.seed);
  std::unique_ptr<BatchSampler> sampler_t;
  if (independent) sampler_t = std::make_unique<BatchSampler>(m, bt, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  double l_k = l_floor;
  int stalls = 0;
  const double mu_thr = c.mu ? *c.mu * (1.0 - 1e-9) : 0.0;

  for (std::size_t k = 0;; ++k) {
    const auto t0 = Clock::now();
    TraceRecord rec;
    rec.k = k;
    const double f1 = eval_f1hat(p, s.x);
    rec.f1hat = f1;
    rec.L_k = l_k;
    rec.tau_k = cfg.tauL_tilde;
    if (f1 <= cfg.stop.f1_tol) {
      rec.event = Event::Converged;
      rec.g1hat_batch = f1;
      s.trace.push_back(rec);
      s.status = Termination::F1Tol;
      break;
    }
    if (k >= static_cast<std::size_t>(cfg.max_outer)) {
      s.status = Termination::MaxOuter;
      break;
    }
    const BatchHandle B = sampler.sample();
    const Linearization lin = Linearization::at(p, s.x, B);
    rec.g1hat_batch = lin.g1();
    rec.batch_indices = B.one_based();
    const Vec g = lin.half_gradient();
    rec.prox_grad_norm = 2.0 * g.norm();
    if (B.is_full() && rec.prox_grad_norm <= cfg.stop.prox_grad_tol) {
      rec.event = Event::Converged;
      s.trace.push_back(rec);
      s.status = Termination::ProxGradTol;
      break;
    }
    if (g.squaredNorm() == 0.0) {
      rec.event = Event::Resample;
      s.trace.push_back(rec);
      s.iterates.push_back(s.x);
      continue;
    }
    Mat Jt;
    if (independent) {
      Jt = jacobian_hat(p, s.x, sampler_t->sample());
    } else {
      Jt = lin.jacobian;
    }
    const SpectralCache ct = SpectralCache::factorize(Jt);
    if (opt.interpolation && Jt.rows() <= Jt.cols() &&
        ct.lambda()[ct.lambda().size() - 1] < mu_thr)
      s.pl_violated = true;
    const Vec d = ct.apply_inverse(cfg.tauL_tilde, g);
    const double g2 = lin.g2();

    int probes = 0;
    bool stalled = false;
    double eta = eta_fixed;
    Vec cand;
    for (;;) {
      ++probes;
      if (cfg.eta_policy == EtaPolicy::Lemma17Opt && !opt.interpolation)
        eta = 2.0 * g.dot(d) / (l_k * d.squaredNorm());
      cand = s.x - eta * d;
      if (skip_search) break;
      const Vec h = cand - s.x;
      const double model = g2 + 2.0 * g.dot(h) + l_k / 2.0 * h.squaredNorm();
      if (eval_g2hat(p, cand, B) <= model + 1e-14 * std::max(model, g2)) break;
      if (l_k >= l_cap) {
        stalled = true;
        break;
      }
      l_k = std::min(2.0 * l_k, l_cap);
    }
    rec.L_k = l_k;
    rec.eta_k = eta;
    rec.n_L_probes = probes;
    if (stalled) {
      rec.event = Event::Stall;
      ++stalls;
    } else {
      rec.event = Event::Accept;
      rec.step_norm = (cand - s.x).norm();
      if (opt.interpolation) {
        const double f2_now = f1 * f1;
        const double f2_next = eval_f2hat(p, cand);
        s.theory_factor.push_back(rate);
        s.empirical_factor.push_back(f2_next / f2_now);
      }
      s.x = cand;
      stalls = 0;
    }
    if (cfg.record_wall_time)
      rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        Clock::now() - t0).count();
    s.trace.push_back(rec);
    s.iterates.push_back(s.x);
    if (!skip_search) l_k = std::max(l_k / 2.0, l_floor);
    if (stalls >= cfg.stall_limit) {
      s.status = Termination::StallLimit;
      break;
    }
  }
  s.k = s.iterates.size() - 1;
  s.L_k = l_k;
  s.last_f1 = eval_f1hat(p, s.x);
  if (s.pl_violated) s.message = "PLViolated: a sampled batch fell below the mu threshold";
  return s;
}

}  // namespace

RunState scheme4_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0) {
  return scheme4_loop(p, cfg, x0, Scheme4Options{});
}

RunState interpolation_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                           const Vec& x0) {
  if (p.m() > p.n())
    throw Error(ErrorCode::DomainError, "interpolation step needs m <= n");
  Scheme4Options o;
  o.interpolation = true;
  return scheme4_loop(p, cfg, x0, o);
}

RunState stochastic_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                        const Vec& x0) {
  switch (cfg.scheme) {
    case StochScheme::S3: return scheme3_run(p, cfg, x0);
    case StochScheme::S4:
      return cfg.eta_policy == EtaPolicy::Theorem18 ? interpolation_run(p, cfg, x0)
                                                    : scheme4_run(p, cfg, x0);
    case StochScheme::S5: return scheme5_run(p, cfg, x0);
    case StochScheme::S6: return scheme6_run(p, cfg, x0);
  }
  throw Error(ErrorCode::ConfigError, "unknown scheme");
}

VarianceResult variance_of_g2(const ResidualProblem& p, const Vec& x, std::size_t b) {
  const std::size_t m = p.m();
  if (b < 1 || b > m) throw Error(ErrorCode::InvalidBatch, "b must lie in 1..m");
  VarianceResult out;
  const Vec F = residual_full(p, x);
  const Vec sq = F.cwiseAbs2();
  const double f2 = sq.mean();
  if (m == 1) {
    out.sigma_undefined = true;
    out.enumerated = 0.0;
    return out;
  }
  const double sigma2 = (sq.array() - f2).square().sum() / static_cast<double>(m - 1);
  const double bd = static_cast<double>(b), md = static_cast<double>(m);
  out.exact_scale = sigma2 / bd;
  out.exact = out.exact_scale * (1.0 - bd / md);
  if (m <= 10) {
    // enumerate all b-subsets via bitmasks
    double acc = 0.0;
    std::size_t count = 0;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != b) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        if (mask & (1u << i)) s += sq[static_cast<Eigen::Index>(i)];
      const double dev = s / bd - f2;
      acc += dev * dev;
      ++count;
    }
    out.enumerated = acc / static_cast<double>(count);
  }
  return out;
}

}  // namespace gnsq
