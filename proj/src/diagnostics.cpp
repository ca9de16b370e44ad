#include "gnsq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gnsq/linalg.hpp"
#include "gnsq/rng.hpp"
#include "gnsq/sampler.hpp"

namespace gnsq {

std::vector<Vec> sample_cloud(const Vec& x0, int count, double radius,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> pts;
  pts.push_back(x0);
  for (int i = 1; i < count; ++i) pts.push_back(x0 + rng.in_ball(x0.size(), radius));
  return pts;
}

ProblemConstants estimate_constants(const ResidualProblem& p, const Vec& x0,
                                    int cloud_size, double radius,
                                    std::uint64_t seed, std::size_t batch_size) {
  if (cloud_size < 2) throw Error(ErrorCode::DomainError, "cloud_size must be >= 2");
  const std::size_t m = p.m();
  const std::size_t b = batch_size == 0 ? m : batch_size;
  if (b > m) throw Error(ErrorCode::InvalidBatch, "batch size exceeds m");
  const double sqm = std::sqrt(static_cast<double>(m));
  const double sqb = std::sqrt(static_cast<double>(b));
  const auto pts = sample_cloud(x0, cloud_size, radius, seed);
  BatchSampler sampler(m, b, seed + 1);
  const BatchHandle full = BatchHandle::full(m);

  double MF = 0.0, MG = 0.0, mu = std::numeric_limits<double>::infinity();
  double Pf = 0.0, Pg = 0.0, lF = 0.0, sig = 0.0;
  for (const Vec& x : pts) {
    const Linearization lin = Linearization::at(p, x, full);
    const Mat Jraw = lin.jacobian * sqm;  // rows ∇F_i
    const Vec Fraw = lin.residual * sqm;
    const SigmaBounds sb = sigma_bounds(lin.jacobian);
    MF = std::max(MF, sb.sigma_max);
    mu = std::min(mu, sb.sigma_min * sb.sigma_min);
    Pf = std::max(Pf, lin.g1());
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      lF = std::max(lF, 2.0 * std::abs(Fraw[ii]) * Jraw.row(ii).norm());
    }
    if (m > 1) {
      const Vec sq = Fraw.cwiseAbs2();
      const double f2 = sq.mean();
      sig = std::max(sig, std::sqrt((sq.array() - f2).square().sum() /
                                    static_cast<double>(m - 1)));
    }
    if (b == m) {
      MG = std::max(MG, sb.sigma_max);
      Pg = std::max(Pg, lin.g1());
      continue;
    }
    for (int t = 0; t < 8; ++t) {
      const BatchHandle B = sampler.sample();
      Mat Jb(b, p.n());
      Vec Fb(b);
      for (std::size_t j = 0; j < b; ++j) {
        const auto i = static_cast<Eigen::Index>(B.indices()[j]);
        Jb.row(static_cast<Eigen::Index>(j)) = Jraw.row(i) / sqb;
        Fb[static_cast<Eigen::Index>(j)] = Fraw[i] / sqb;
      }
      const SigmaBounds bb = sigma_bounds(Jb);
      MG = std::max(MG, bb.sigma_max);
      mu = std::min(mu, bb.sigma_min * bb.sigma_min);
      Pg = std::max(Pg, Fb.norm());
    }
    Pg = std::max(Pg, lin.g1());
  }
  ProblemConstants c;
  c.L_Fhat = estimate_jacobian_lipschitz(p, x0, radius, std::max(1, cloud_size / 2), seed);
  c.M_F = MF;
  c.M_G = MG;
  c.mu = mu;
  c.P_f1 = 2.0 * Pf;
  c.P_g1 = 2.0 * Pg;
  c.l_F = lF;
  c.sigma_tilde = sig;
  c.sigma_undefined = m == 1;
  return c;
}

ProblemConstants merge_constants(const ProblemConstants& user,
                                 const ProblemConstants& est) {
  ProblemConstants c = est;
  auto take = [&](std::optional<double> ProblemConstants::*f, const char* name) {
    if (user.*f) {
      c.*f = user.*f;
      c.user_fields.insert(name);
    }
  };
  take(&ProblemConstants::L_Fhat, "L_Fhat");
  take(&ProblemConstants::M_G, "M_G");
  take(&ProblemConstants::M_F, "M_F");
  take(&ProblemConstants::P_g1, "P_g1");
  take(&ProblemConstants::P_f1, "P_f1");
  take(&ProblemConstants::l_F, "l_F");
  take(&ProblemConstants::mu, "mu");
  take(&ProblemConstants::sigma_tilde, "sigma_tilde");
  return c;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double min_row_eig(const Mat& Jb) {
  if (Jb.rows() > Jb.cols()) return 0.0;
  const SymmetricEigen e = jacobi_eigen(Jb * Jb.transpose());
  return std::max(e.values[e.values.size() - 1], 0.0);
}

}  // namespace

PLReport pl_check(const ResidualProblem& p, const std::vector<Vec>& points,
                  const std::vector<std::size_t>& batch_sizes, double threshold,
                  std::uint64_t seed) {
  if (points.empty() || batch_sizes.empty())
    throw Error(ErrorCode::DomainError, "pl_check needs points and batch sizes");
  const std::size_t m = p.m();
  const double sqm = std::sqrt(static_cast<double>(m));
  PLReport rep;
  rep.mu_hat = std::numeric_limits<double>::infinity();
  rep.pass = true;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const Mat Jraw = jacobian_hat(p, points[pi], BatchHandle::full(m)) * sqm;
    for (std::size_t b : batch_sizes) {
      if (b < 1 || b > m) throw Error(ErrorCode::InvalidBatch, "batch size out of range");
      const double sqb = std::sqrt(static_cast<double>(b));
      PLEntry e;
      e.point = pi;
      e.b = b;
      e.min_sigma2 = std::numeric_limits<double>::infinity();
      auto visit = [&](const std::vector<std::size_t>& idx) {
        Mat Jb(b, p.n());
        for (std::size_t j = 0; j < b; ++j)
          Jb.row(static_cast<Eigen::Index>(j)) =
              Jraw.row(static_cast<Eigen::Index>(idx[j])) / sqb;
        e.min_sigma2 = std::min(e.min_sigma2, min_row_eig(Jb));
        ++e.batches_checked;
      };
      if (binomial(m, b) <= 256.0) {
        e.enumerated = true;
        std::vector<std::size_t> idx(b);
        for (std::size_t j = 0; j < b; ++j) idx[j] = j;
        for (;;) {
          visit(idx);
          std::size_t j = b;
          while (j > 0 && idx[j - 1] == m - b + (j - 1)) --j;
          if (j == 0) break;
          ++idx[j - 1];
          for (std::size_t t = j; t < b; ++t) idx[t] = idx[t - 1] + 1;
        }
      } else {
        BatchSampler s(m, b, seed + pi * 7919 + b);
        for (int t = 0; t < 64; ++t) visit(s.sample().indices());
      }
      e.pass = e.min_sigma2 > threshold;
      rep.pass = rep.pass && e.pass;
      rep.mu_hat = std::min(rep.mu_hat, e.min_sigma2);
      rep.entries.push_back(e);
    }
  }
  return rep;
}

double mu_all_batch_sizes(const ResidualProblem& p, const std::vector<Vec>& points,
                          std::uint64_t seed) {
  std::vector<std::size_t> sizes;
  for (std::size_t b = 1; b <= std::min(p.m(), p.n()); ++b) sizes.push_back(b);
  return pl_check(p, points, sizes, 1e-12, seed).mu_hat;
}

double prox_grad_norm(const ResidualProblem& p, const Vec& x, double L_ref,
                      double tau, const BatchHandle& B) {
  const Linearization lin = Linearization::at(p, x, B);
  if (lin.g1() == 0.0) return 0.0;
  const SpectralCache cache = SpectralCache::factorize(lin.jacobian, lin.residual);
  return L_ref * cache.regularized_solve(tau * L_ref).norm();
}

namespace {

void check_common(const BudgetInputs& in) {
  if (!(in.eps > 0.0)) throw Error(ErrorCode::DomainError, "eps must be positive");
  if (!(in.eta > 0.0 && in.eta < 2.0)) throw Error(ErrorCode::DomainError, "eta must lie in (0,2)");
  if (!(in.gamma >= 1.0)) throw Error(ErrorCode::DomainError, "gamma must be >= 1");
  if (!(in.L > 0.0)) throw Error(ErrorCode::DomainError, "L must be positive");
  if (in.m < 1 || in.n < 1) throw Error(ErrorCode::DomainError, "m and n must be >= 1");
}

void check_r(double r) {
  if (!(r > 0.0 && r <= 0.999999))
    throw Error(ErrorCode::DomainError, "share r must lie in (0, 0.999999]");
}

long long ceil_count(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::DomainError, "budget is not finite");
  if (v <= 0.0) return 0;
  return static_cast<long long>(std::ceil(v));
}

long long batch_count(double num, double eps4r2, std::size_t m) {
  // min{m, ⌈N/(ε⁴r² + N/m)⌉}
  const double v = num / (eps4r2 + num / static_cast<double>(m));
  const long long c = ceil_count(v);
  return std::min<long long>(static_cast<long long>(m), std::max<long long>(c, 1));
}

double min_term(const BudgetInputs& in) {
  const double P = ProblemConstants::need(in.c.P_g1, "P_g1");
  const double M = ProblemConstants::need(in.c.M_G, "M_G");
  return std::min(std::sqrt(2.0 * P / in.L), M / in.L);
}

}  // namespace

Budget budget_sublinear_stochastic(const BudgetInputs& in) {
  check_common(in);
  check_r(in.r);
  const double M = ProblemConstants::need(in.c.M_G, "M_G");
  const double P = ProblemConstants::need(in.c.P_g1, "P_g1");
  const double LF = ProblemConstants::need(in.c.L_Fhat, "L_Fhat");
  const double lF = ProblemConstants::need(in.c.l_F, "l_F");
  const double st = ProblemConstants::need(in.c.sigma_tilde, "sigma_tilde");
  const double q = in.eta * (2.0 - in.eta);
  const double A = 8.0 * (M * M + in.gamma * P * LF) / q;
  const double md = static_cast<double>(in.m);
  const double X = 2.0 * lF * std::sqrt(md * (md - 1.0)) * min_term(in) + st;
  Budget out;
  out.k = ceil_count(A * in.E_g2_0 / (in.eps * in.eps * (1.0 - in.r)));
  const double e4r2 = std::pow(in.eps, 4) * in.r * in.r;
  out.b = batch_count(A * A * X * X, e4r2, in.m);
  return out;
}

Budget budget_linear_stochastic(const BudgetInputs& in) {
  check_common(in);
  check_r(in.r);
  const double M = ProblemConstants::need(in.c.M_G, "M_G");
  const double P = ProblemConstants::need(in.c.P_g1, "P_g1");
  const double LF = ProblemConstants::need(in.c.L_Fhat, "L_Fhat");
  const double lF = ProblemConstants::need(in.c.l_F, "l_F");
  const double st = ProblemConstants::need(in.c.sigma_tilde, "sigma_tilde");
  const double mu = ProblemConstants::need(in.c.mu, "mu");
  if (!(mu > 0.0)) throw Error(ErrorCode::DomainError, "mu must be positive");
  const double q = in.eta * (2.0 - in.eta);
  const double Z = (in.gamma * LF * P + mu) / (q * mu);
  const double md = static_cast<double>(in.m);
  const double Y = lF * std::sqrt(md * (md - 1.0)) * min_term(in) + st;
  Budget out;
  out.k = ceil_count(2.0 * Z *
                     std::log(4.0 * M * M * in.E_g2_0 / (in.eps * in.eps * (1.0 - in.r))));
  const double e4r2 = std::pow(in.eps, 4) * in.r * in.r;
  const double num = 256.0 * std::pow(M, 4) * Y * Y * Z * Z;
  out.b = std::min<long long>(batch_count(num, e4r2, in.m), static_cast<long long>(in.n));
  return out;
}

Budget budget_scheme4(const BudgetInputs& in, bool pl_variant) {
  check_common(in);
  for (double r : {in.r1, in.r2, in.r3})
    if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::DomainError, "shares must lie in (0,1)");
  if (std::abs(in.r1 + in.r2 + in.r3 - 1.0) > 1e-12)
    throw Error(ErrorCode::DomainError, "shares must sum to 1");
  if (!(in.tau_tilde > 0.0) || in.tau_tilde_max < in.tau_tilde)
    throw Error(ErrorCode::DomainError, "need 0 < tau_tilde <= tau_tilde_max");
  const double M = ProblemConstants::need(in.c.M_G, "M_G");
  const double P = ProblemConstants::need(in.c.P_g1, "P_g1");
  const double lF = ProblemConstants::need(in.c.l_F, "l_F");
  const double st = ProblemConstants::need(in.c.sigma_tilde, "sigma_tilde");
  const double lg2 = in.c.l_g2();
  double mu = 0.0;
  if (pl_variant) {
    mu = ProblemConstants::need(in.c.mu, "mu");
    if (!(mu > 0.0)) throw Error(ErrorCode::DomainError, "mu must be positive");
  }
  const double tt = in.tau_tilde;
  Budget out;
  double tauL;
  if (in.tauL) {
    tauL = *in.tauL;
    out.L = tauL / tt;
  } else {
    // L = min_{c>1} max{A/(√c−1), B c²}: the first term falls, the second rises
    const double A = M * M / tt;
    double inner = 4.0 * in.gamma * lg2 * lF / (in.r2 * in.eps * in.eps);
    if (pl_variant) inner *= M * M / mu;
    const double Bc = (in.tau_tilde_max + P * P / tt) * inner * inner;
    if (!(Bc > 0.0))
      throw Error(ErrorCode::DomainError, "L is unbounded below; supply tauL");
    if (A == 0.0) throw Error(ErrorCode::DomainError, "M_G = 0; supply tauL");
    double lo = 0.0, hi = 1.0;  // over u = √c − 1 > 0
    while (A / hi > Bc * std::pow(1.0 + hi, 4)) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double u = 0.5 * (lo + hi);
      if (A / u > Bc * std::pow(1.0 + u, 4)) lo = u; else hi = u;
    }
    const double u = 0.5 * (lo + hi);
    out.L = std::max(A / u, Bc * std::pow(1.0 + u, 4));
    tauL = tt * out.L;
  }
  const double f = std::pow(M * M / tauL + 1.0, 2);
  const double e4 = std::pow(in.eps, 4) * in.r3 * in.r3;
  if (!pl_variant) {
    out.k = ceil_count(2.0 * in.gamma * lg2 * f * in.E_g2_0 / (in.r1 * in.eps * in.eps));
    const double X = 2.0 * in.gamma * lg2 * f * st;
    out.b = batch_count(X * X, e4, in.m);
  } else {
    out.k = ceil_count(in.gamma * lg2 / (2.0 * mu) * f *
                       std::log(4.0 * M * M * in.E_g2_0 / (in.r1 * in.eps * in.eps)));
    const double X = 4.0 * in.gamma * lg2 * M * M / mu * f * st;
    out.b = std::min<long long>(batch_count(X * X, e4, in.m), static_cast<long long>(in.n));
  }
  return out;
}

CertificateReport certificate_check_stoch(const ResidualProblem& p,
                                          const std::vector<RunState>& runs,
                                          const StochSolverConfig& cfg,
                                          const ProblemConstants& c,
                                          StochCertificate which,
                                          const std::vector<std::size_t>& checkpoints) {
  if (runs.empty()) throw Error(ErrorCode::DomainError, "no runs to aggregate");
  const double M = ProblemConstants::need(c.M_G, "M_G");
  double P = ProblemConstants::need(c.P_g1, "P_g1");
  const double LF0 = ProblemConstants::need(c.L_Fhat, "L_Fhat");
  const double st = ProblemConstants::need(c.sigma_tilde, "sigma_tilde");
  const double lF = c.l_F.value_or(0.0);
  const double md = static_cast<double>(p.m());
  const double bd = static_cast<double>(cfg.b);
  const bool sub = cfg.b < p.m();
  const double noise = st * std::sqrt(std::max(0.0, 1.0 / bd - 1.0 / md));
  const double eta = cfg.eta;
  const double q = eta * (2.0 - eta);
  const double L = cfg.L_floor;

  // hypotheses of the ladder (L_k within the γ-cap, ĝ₁ ≤ P) are restored by
  // inflating L_F̂ and P to what the runs actually used
  double maxL = 0.0, maxLtau = 0.0;
  for (const auto& r : runs)
    for (const auto& t : r.trace) {
      maxL = std::max(maxL, t.L_k);
      maxLtau = std::max(maxLtau, t.L_k * t.g1hat_batch);
      P = std::max(P, t.g1hat_batch);
    }

  CertificateReport rep;
  const std::size_t R = runs.size();
  // per-run sequences f̂₂(x_i) and ‖∇f̂₂(x_i)‖²
  std::vector<std::vector<double>> f2s(R), gs(R);
  std::size_t K = 0;
  for (const auto& cp : checkpoints) K = std::max(K, cp);
  for (std::size_t r = 0; r < R; ++r) {
    const auto& it = runs[r].iterates;
    for (std::size_t i = 0; i <= K; ++i) {
      const Vec& x = it[std::min(i, it.size() - 1)];
      const double f2 = eval_f2hat(p, x);
      f2s[r].push_back(f2);
      gs[r].push_back(grad_f2hat(p, x).squaredNorm());
    }
  }
  double Ef20 = 0.0;
  for (std::size_t r = 0; r < R; ++r) Ef20 += f2s[r][0];
  Ef20 /= static_cast<double>(R);

  for (std::size_t k : checkpoints) {
    std::vector<double> lhs(R);
    for (std::size_t r = 0; r < R; ++r) {
      if (which == StochCertificate::T11) {
        lhs[r] = f2s[r][k];
      } else {
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < std::max<std::size_t>(k, 1); ++i) mn = std::min(mn, gs[r][i]);
        lhs[r] = mn;
      }
    }
    double mean = 0.0;
    for (double v : lhs) mean += v;
    mean /= static_cast<double>(R);
    double var = 0.0;
    for (double v : lhs) var += (v - mean) * (v - mean);
    const double se = R > 1 ? std::sqrt(var / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
    const double kd = static_cast<double>(std::max<std::size_t>(k, 1));
    double rhs = 0.0;
    switch (which) {
      case StochCertificate::T10: {
        rep.theorem = "T10";
        const double LF = std::max(LF0, maxL / cfg.gamma);
        const double mt = std::min(std::sqrt(2.0 * P / L), M / L);
        rhs = 8.0 * (M * M + cfg.gamma * P * LF) / q *
              (Ef20 / kd + (sub ? 2.0 * LF * mt : 0.0) + noise);
        break;
      }
      case StochCertificate::T11: {
        rep.theorem = "T11";
        const double mu = ProblemConstants::need(c.mu, "mu");
        const double LP = std::max(LF0 * P, maxLtau / cfg.gamma);
        const double Z = (cfg.gamma * LP + mu) / (q * mu);
        const double mt = std::min(std::sqrt(2.0 * P / L), M / L);
        rhs = Ef20 * std::exp(-static_cast<double>(k) / (2.0 * Z)) +
              4.0 * ((sub ? lF * mt : 0.0) + noise) * Z;
        break;
      }
      case StochCertificate::T12: {
        rep.theorem = "T12";
        const double lg2 = 2.0 * (M * M + LF0 * P);
        const double tl = cfg.tauL_tilde;
        const double f = std::pow(M * M / tl + 1.0, 2);
        const double l = cfg.l_init;
        const bool indep = cfg.independent_tilde || (cfg.b_tilde && cfg.b_tilde != cfg.b);
        double batch_term;
        if (indep) {
          batch_term = 4.0 * lF * M * P / l * f;
        } else {
          batch_term = sub ? 2.0 * lF * std::min(std::sqrt((tl + P * P / tl) / 1.0),
                                                 2.0 * M * P / l * f)
                           : 0.0;
        }
        rhs = 2.0 * cfg.gamma * lg2 * f * (Ef20 / kd + batch_term + noise);
        break;
      }
      case StochCertificate::T14: {
        rep.theorem = "T14";
        const double LF = std::max(LF0, maxL / cfg.gamma_tilde);
        const double head = M * M + std::max(cfg.gamma_tilde * P * LF, cfg.gamma * LF);
        if (cfg.eps_policy == EpsPolicy::GradProportional) {
          const double d = cfg.delta;
          rhs = 8.0 * head / (1.0 - d) *
                (Ef20 / kd +
                 (sub ? 2.0 * lF * (std::sqrt(d * P / L) + std::sqrt(2.0 * P / L)) : 0.0) +
                 noise);
        } else {
          const double e = cfg.eps;
          rhs = 8.0 * head *
                (Ef20 / kd + e +
                 (sub ? 2.0 * LF * (std::sqrt(2.0 * e / L) + std::sqrt(2.0 * P / L)) : 0.0) +
                 noise);
        }
        break;
      }
    }
    rep.checkpoints.push_back(k);
    rep.lhs_mean.push_back(mean);
    rep.lhs_se.push_back(se);
    rep.rhs.push_back(rhs);
    rep.slacks.push_back(rhs - mean);
  }
  rep.pass = true;
  for (std::size_t i = 0; i < rep.slacks.size(); ++i)
    if (rep.slacks[i] < -3.0 * rep.lhs_se[i]) rep.pass = false;
  return rep;
}

}  // namespace gnsq
