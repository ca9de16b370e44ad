#include <map>

#include "helpers.hpp"
#include "gnsq/deterministic.hpp"
#include "gnsq/diagnostics.hpp"
#include "gnsq/linalg.hpp"
#include "gnsq/sampler.hpp"
#include "gnsq/stochastic.hpp"

using namespace gnsq;
using th::v;

namespace {

// F_i = 3 + sin(a_iᵀx): every component stays in [2, 4]
ResidualProblem shifted_sines(std::size_t m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Mat A = th::random_matrix(rng, static_cast<Eigen::Index>(m),
                                  static_cast<Eigen::Index>(n));
  return ResidualProblem(
      n, m,
      [A](std::size_t i, const Vec& x) {
        return 3.0 + std::sin(A.row(static_cast<Eigen::Index>(i)).dot(x));
      },
      [A](std::size_t i, const Vec& x, Eigen::Ref<Vec> out) {
        const auto r = A.row(static_cast<Eigen::Index>(i));
        out = std::cos(r.dot(x)) * r.transpose();
      },
      "shifted_sines");
}

BatchHandle batch_of(const TraceRecord& r, std::size_t m) {
  return BatchHandle::from_one_based(r.batch_indices, m);
}

double sigma_max(const Mat& J) { return J.jacobiSvd().singularValues()[0]; }

}  // namespace

TEST_CASE("sampler draws every subset with equal frequency") {
  BatchSampler s(4, 2, 11);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[s.sample().indices()];
  CHECK(counts.size() == 6);
  for (const auto& [k, c] : counts)
    CHECK(std::abs(c / static_cast<double>(draws) - 1.0 / 6.0) <= 0.01);
}

TEST_CASE("sampler is deterministic per seed and full when b = m") {
  BatchSampler a(9, 3, 5), b(9, 3, 5);
  for (int i = 0; i < 100; ++i) CHECK(a.sample() == b.sample());
  BatchSampler f(5, 5, 1);
  for (int i = 0; i < 10; ++i) CHECK(f.sample().is_full());
}

TEST_CASE("scheme 3 with the full batch reproduces scheme 1") {
  for (const auto& gp : builtin_suite(3)) {
    const auto& bp = gp.problem;
    const Vec& x0 = gp.x0;
    DetSolverConfig d;
    d.max_outer = 30;
    StochSolverConfig c;
    c.b = bp.m();
    c.max_outer = 30;
    c.seed = 8;
    const RunState s1 = scheme1_run(bp, d, x0);
    const RunState s3 = scheme3_run(bp, c, x0);
    REQUIRE(s1.iterates.size() == s3.iterates.size());
    for (std::size_t i = 0; i < s1.iterates.size(); ++i)
      CHECK((s1.iterates[i] - s3.iterates[i]).norm() <=
            1e-12 * std::max(1.0, s1.iterates[i].norm()));
  }
}

TEST_CASE("scheme 6 with the full batch reproduces scheme 2") {
  // the variable interval collapses to [L, γL̂] once f̂₁ ≥ 1 and γ̃ = γ
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = shifted_sines(6, 3, seed);
    DetSolverConfig d;
    d.max_outer = 20;
    StochSolverConfig c;
    c.b = p.m();
    c.max_outer = 20;
    c.gamma = c.gamma_tilde = 2.0;
    const RunState s2 = scheme2_run(p, d, Vec::Zero(3));
    const RunState s6 = scheme6_run(p, c, Vec::Zero(3));
    REQUIRE(s2.iterates.size() == s6.iterates.size());
    for (std::size_t i = 0; i < s2.iterates.size(); ++i)
      CHECK((s2.iterates[i] - s6.iterates[i]).norm() <=
            1e-12 * std::max(1.0, s2.iterates[i].norm()));
  }
}

TEST_CASE("root at x0 stops every stochastic scheme") {
  const auto p = th::scalar_affine(1, -2);
  for (auto sch : {StochScheme::S3, StochScheme::S4, StochScheme::S5, StochScheme::S6}) {
    StochSolverConfig c;
    c.scheme = sch;
    const RunState s = stochastic_run(p, c, v({2}));
    CHECK(s.k == 0);
    CHECK(s.status == Termination::F1Tol);
  }
  const auto q = overparam_features(4, 10, 1);
  Vec root = Vec::Zero(10);
  const Vec Fq = residual_full(q, root);
  CHECK(Fq.norm() > 0.0);  // builtin root is not at zero; find it by one full Newton solve
  const Mat J = jacobian_hat(q, root, BatchHandle::full(4));
  root -= J.transpose() * (J * J.transpose()).ldlt().solve(residual_hat(q, root, BatchHandle::full(4)));
  StochSolverConfig c;
  c.stop.f1_tol = 1e-10;
  const RunState s = interpolation_run(q, c, root);
  CHECK(s.k == 0);
}

TEST_CASE("scheme 4 with huge damping takes a gradient step") {
  const auto p = trig_system(5, 2);
  const Vec x0 = Vec::Constant(5, 0.3);
  StochSolverConfig c;
  c.scheme = StochScheme::S4;
  c.step_rule = StochStepRule::Rule16;
  c.eta_policy = EtaPolicy::Lemma17Opt;
  c.l_policy = LPolicy::Known;
  c.gamma = 1.0;
  c.gamma_tilde = 1.0;
  c.l_init = 3.0;
  c.tauL_tilde = 1e12;
  c.b = 2;
  c.max_outer = 1;
  c.seed = 4;
  const RunState s = scheme4_run(p, c, x0);
  REQUIRE(s.iterates.size() == 2);
  const BatchHandle B = batch_of(s.trace[0], p.m());
  const Vec want = x0 - grad_f2hat(p, x0, B) / 3.0;
  CHECK(th::rel(s.iterates[1], want) <= 1e-4);
}

TEST_CASE("scheme 4 with the optimal eta decreases the batch objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = trig_system(6, seed);
    StochSolverConfig c;
    c.eta_policy = EtaPolicy::Lemma17Opt;
    c.step_rule = StochStepRule::Rule16;
    c.b = 3;
    c.max_outer = 40;
    c.seed = seed;
    c.tauL_tilde = 0.5;
    const RunState s = scheme4_run(p, c, Vec::Zero(6));
    int accepted = 0;
    for (std::size_t k = 0; k + 1 < s.iterates.size(); ++k) {
      if (s.trace[k].event != Event::Accept) continue;
      ++accepted;
      const BatchHandle B = batch_of(s.trace[k], p.m());
      CHECK(eval_g2hat(p, s.iterates[k + 1], B) <= eval_g2hat(p, s.iterates[k], B));
    }
    CHECK(accepted > 0);
  }
}

TEST_CASE("scheme 4 skips a batch with zero gradient") {
  // component 0 is constant, so a batch {0} has zero gradient
  const ResidualProblem p(
      1, 2,
      [](std::size_t i, const Vec& x) { return i == 0 ? 1.0 : x[0]; },
      [](std::size_t i, const Vec&, Eigen::Ref<Vec> out) { out[0] = i == 0 ? 0.0 : 1.0; },
      "half_constant");
  StochSolverConfig c;
  c.b = 1;
  c.max_outer = 40;
  c.eta_policy = EtaPolicy::Lemma17Opt;
  const RunState s = scheme4_run(p, c, v({1}));
  int skipped = 0;
  for (const auto& r : s.trace)
    if (r.event == Event::Resample) {
      ++skipped;
      const BatchHandle B = batch_of(r, 2);
      CHECK(grad_f2hat(p, s.iterates[r.k], B).norm() == 0.0);
    }
  CHECK(skipped > 0);
}

TEST_CASE("eta_lemma17 closed forms") {
  Mat JB(1, 1), Jt(1, 1);
  JB(0, 0) = 2.0;
  Jt(0, 0) = 3.0;
  CHECK(eta_lemma17(JB, Jt, 0.5, 4.0, v({1.5})) == doctest::Approx(2.0 * (9.0 + 0.5) / 4.0));
  Rng rng(3);
  const Mat J = th::random_matrix(rng, 3, 4);
  const Vec F = rng.normal_vec(3);
  CHECK(eta_lemma17(J, Mat::Zero(2, 4), 0.7, 2.0, F) == doctest::Approx(2.0 * 0.7 / 2.0));
  // dense oracle
  const Mat Jb = th::random_matrix(rng, 2, 4);
  const Mat H = (Jb.transpose() * Jb + 0.3 * Mat::Identity(4, 4)).inverse();
  const Vec g = J.transpose() * F;
  const double want = 2.0 * g.dot(H * g) / (1.5 * (H * g).squaredNorm());
  CHECK(eta_lemma17(J, Jb, 0.3, 1.5, F) == doctest::Approx(want).epsilon(1e-10));
  CHECK_THROWS_AS(eta_lemma17(J, Jb, 0.3, 1.5, Vec::Zero(3)), Error);
}

TEST_CASE("eta_theorem18 examples") {
  CHECK(eta_theorem18(1, 1, 1, 1, 1, 1) == doctest::Approx(1.0 / ((1 + 1) * (1 + 1))));
  CHECK(eta_theorem18(1, 1, 1, 0, 5, 1) == doctest::Approx(0.5));
  // η grows like τ̃L; the step η(…+τ̃L)⁻¹g tends to the plain gradient step
  CHECK(eta_theorem18(1, 1, 1, 0, 3, 1e9) / 1e9 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(eta_theorem18(1, 1, 1, 0, 3, 1e-8) < 1e-15);
  CHECK_THROWS_AS(eta_theorem18(2, 1, 1, 0, 3, 1), Error);
  CHECK_THROWS_AS(eta_theorem18(0, 1, 1, 0, 3, 1), Error);
}

TEST_CASE("scheme 5 probe count stays within the ladder cap") {
  const auto p = rosenbrock_system(4);
  StochSolverConfig c;
  c.scheme = StochScheme::S5;
  c.b = 2;
  c.gamma = 4.0;
  c.gamma_tilde = 2.0;
  c.L_floor = 0.05;
  c.max_outer = 300;
  c.stall_limit = 1000;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    c.seed = seed;
    const RunState s = scheme5_run(p, c, default_start(p));
    const int cap =
        static_cast<int>(std::ceil(std::log2(c.gamma * s.L_hat / c.L_floor))) + 1;
    for (const auto& r : s.trace) CHECK(r.n_L_probes <= cap);
  }
}

TEST_CASE("scheme 5 reduces to scheme 3 with gamma_tilde when the batch residual is large") {
  const auto p = shifted_sines(6, 3, 7);
  StochSolverConfig c5;
  c5.scheme = StochScheme::S5;
  c5.b = 2;
  c5.gamma = 4.0;
  c5.gamma_tilde = 2.0;
  c5.L_known = 1.5;
  c5.max_outer = 25;
  c5.seed = 3;
  StochSolverConfig c3 = c5;
  c3.scheme = StochScheme::S3;
  c3.gamma = 2.0;
  const RunState s5 = scheme5_run(p, c5, Vec::Zero(3));
  const RunState s3 = scheme3_run(p, c3, Vec::Zero(3));
  for (const auto& r : s5.trace) CHECK(r.g1hat_batch >= c5.gamma / c5.gamma_tilde);
  REQUIRE(s5.iterates.size() == s3.iterates.size());
  for (std::size_t i = 0; i < s5.iterates.size(); ++i)
    CHECK((s5.iterates[i] - s3.iterates[i]).norm() <= 1e-12);
}

TEST_CASE("scheme 6 adaptive tau beats tau = g1 on the batch model") {
  const auto p = trig_system(5, 6);
  StochSolverConfig c;
  c.scheme = StochScheme::S6;
  c.b = 3;
  c.max_outer = 20;
  c.seed = 2;
  const RunState s = scheme6_run(p, c, Vec::Zero(5));
  for (std::size_t k = 0; k + 1 < s.iterates.size(); ++k) {
    const auto& r = s.trace[k];
    if (r.event != Event::Accept) continue;
    const BatchHandle B = batch_of(r, p.m());
    const auto lin = std::make_shared<const Linearization>(
        Linearization::at(p, s.iterates[k], B));
    const SpectralCache cache = SpectralCache::factorize(lin->jacobian, lin->residual);
    const double star = psi_at_prox(cache, r.L_k, r.tau_k);
    const double base = psi_at_prox(cache, r.L_k, lin->g1());
    CHECK(star <= base * (1.0 + 1e-12));
  }
}

TEST_CASE("variance of the batch objective") {
  const auto p = th::constant_residual(v({0.0, std::sqrt(2.0)}));
  const VarianceResult r = variance_of_g2(p, v({0}), 1);
  CHECK(r.exact == doctest::Approx(1.0));
  REQUIRE(r.enumerated);
  CHECK(*r.enumerated == doctest::Approx(1.0));
  CHECK(variance_of_g2(p, v({0}), 2).exact == 0.0);
  const auto eq = th::constant_residual(v({1.5, -1.5, 1.5, 1.5}));
  for (std::size_t b = 1; b <= 4; ++b) CHECK(variance_of_g2(eq, v({0}), b).exact == 0.0);
  const auto one = th::constant_residual(v({2.0}));
  const VarianceResult u = variance_of_g2(one, v({0}), 1);
  CHECK(u.sigma_undefined);
  CHECK(u.exact == 0.0);
  CHECK_THROWS_AS(variance_of_g2(p, v({0}), 3), Error);
}

TEST_CASE("variance formula matches enumeration") {
  Rng rng(12);
  for (std::size_t m = 2; m <= 8; ++m) {
    const auto p = th::constant_residual(rng.normal_vec(static_cast<Eigen::Index>(m)));
    for (std::size_t b = 1; b <= m; ++b) {
      const VarianceResult r = variance_of_g2(p, v({0}), b);
      CHECK(std::abs(r.exact - *r.enumerated) <= 1e-12 * std::max(1.0, r.exact_scale));
    }
  }
}

TEST_CASE("eps bound examples") {
  EpsInputs in;
  in.eps = 1e-4;
  in.g1 = 2.0;
  CHECK(eps_bound_rule17(EpsPolicy::EpsOverG1, in) == doctest::Approx(5e-5));
  in.delta = 0.5;
  in.M_G = 1.0;
  in.grad_norm = 0.0;
  in.L_k = 1.0;
  CHECK(eps_bound_rule17(EpsPolicy::GradProportional, in) == 0.0);
  in.delta = 0.0;
  in.mu = 0.3;
  CHECK(eps_bound_rule17(EpsPolicy::PLProportional, in) == 0.0);
  in.delta = 0.5;
  in.grad_norm = 2.0;
  CHECK(eps_bound_rule17(EpsPolicy::GradProportional, in) ==
        doctest::Approx(0.5 * 4.0 / (8.0 * 2.0 * (1.0 + 2.0))));
  EpsInputs bare;
  bare.g1 = 1.0;
  bare.delta = 0.5;
  CHECK_THROWS_AS(eps_bound_rule17(EpsPolicy::PLProportional, bare), Error);
}

TEST_CASE("scheme 3 rule 15 never increases the batch residual") {
  for (double eta : {0.3, 1.0, 1.7}) {
    const auto p = trig_system(5, 9);
    StochSolverConfig c;
    c.b = 2;
    c.eta = eta;
    c.max_outer = 50;
    c.seed = 1;
    const RunState s = scheme3_run(p, c, Vec::Zero(5));
    for (std::size_t k = 0; k + 1 < s.iterates.size(); ++k) {
      if (s.trace[k].event != Event::Accept) continue;
      const BatchHandle B = batch_of(s.trace[k], p.m());
      CHECK(eval_g1hat(p, s.iterates[k + 1], B) <= eval_g1hat(p, s.iterates[k], B));
    }
  }
}

TEST_CASE("accepted scheme 3 steps obey the step length bounds") {
  for (const auto& gp : builtin_suite(5)) {
    const auto& p = gp.problem;
    for (double eta : {0.25, 1.0}) {
      StochSolverConfig c;
      c.b = std::max<std::size_t>(1, p.m() / 2);
      c.eta = eta;
      c.max_outer = 30;
      c.seed = 17;
      const RunState s = scheme3_run(p, c, gp.x0);
      for (std::size_t k = 0; k + 1 < s.iterates.size(); ++k) {
        const auto& r = s.trace[k];
        if (r.event != Event::Accept) continue;
        const BatchHandle B = batch_of(r, p.m());
        const Linearization lin = Linearization::at(p, s.iterates[k], B);
        const double M = sigma_max(lin.jacobian);
        const double g1 = lin.g1();
        const double grad = 2.0 * lin.half_gradient().norm();
        const double lo = eta * grad / (2.0 * (M * M + g1 * r.L_k));
        const double hi = std::min(std::sqrt(2.0 * g1 / r.L_k), eta * M / r.L_k);
        CHECK(r.step_norm >= lo - 1e-10);
        CHECK(r.step_norm <= hi + 1e-10);
      }
    }
  }
}

TEST_CASE("growth sandwich along an interpolation run") {
  const auto p = overparam_features(4, 10, 2);
  const Vec x0 = Vec::Zero(10);
  const double mu = mu_all_batch_sizes(p, sample_cloud(x0, 8, 1.0, 0), 0);
  const double M = estimate_constants(p, x0, 16, 1.0, 0, 1).M_G.value();
  StochSolverConfig c;
  c.scheme = StochScheme::S4;
  c.step_rule = StochStepRule::Rule16;
  c.eta_policy = EtaPolicy::Theorem18;
  c.b = 1;
  c.max_outer = 50;
  const RunState s = interpolation_run(p, c, x0);
  for (std::size_t k = 0; k + 1 < s.iterates.size(); ++k) {
    const BatchHandle B = batch_of(s.trace[k], p.m());
    const Vec g = grad_f2hat(p, s.iterates[k], B);
    const Linearization lin = Linearization::at(p, s.iterates[k], B);
    CHECK(th::rel(g, 2.0 * lin.half_gradient()) <= 1e-12);
    const double g2 = eval_g2hat(p, s.iterates[k], B);
    CHECK(4.0 * mu * g2 <= g.squaredNorm() * (1.0 + 1e-9));
    CHECK(g.squaredNorm() <= 4.0 * M * M * g2 * (1.0 + 1e-9));
  }
  CHECK_FALSE(s.pl_violated);
}

TEST_CASE("interpolation run respects the contraction envelope") {
  const auto p = overparam_features(4, 10, 3);
  StochSolverConfig c;
  c.scheme = StochScheme::S4;
  c.step_rule = StochStepRule::Rule16;
  c.eta_policy = EtaPolicy::Theorem18;
  c.b = 4;
  c.max_outer = 40;
  const RunState s = interpolation_run(p, c, Vec::Zero(10));
  REQUIRE(s.theory_factor.size() == 40);
  for (std::size_t k = 0; k < s.theory_factor.size(); ++k) {
    CHECK(s.theory_factor[k] < 1.0);
    CHECK(s.empirical_factor[k] <= s.theory_factor[k] + 1e-9);
  }
  CHECK_THROWS_AS(interpolation_run(linear_problem(6, 3, 2.0, true, 1), c, Vec::Zero(3)),
                  Error);
}

TEST_CASE("stochastic runs are reproducible per seed") {
  const auto p = trig_system(5, 1);
  for (auto sch : {StochScheme::S3, StochScheme::S4, StochScheme::S5, StochScheme::S6}) {
    StochSolverConfig c;
    c.scheme = sch;
    if (sch == StochScheme::S4) c.step_rule = StochStepRule::Rule16;
    c.b = 2;
    c.max_outer = 30;
    c.seed = 99;
    const RunState a = stochastic_run(p, c, Vec::Zero(5));
    const RunState b = stochastic_run(p, c, Vec::Zero(5));
    CHECK(a.trace == b.trace);
  }
}

TEST_CASE("config validation") {
  StochSolverConfig c;
  c.b = 0;
  CHECK_THROWS_AS(c.validate(4), Error);
  c.b = 5;
  CHECK_THROWS_AS(c.validate(4), Error);
  c.b = 2;
  c.gamma = 2.0;
  c.gamma_tilde = 3.0;
  CHECK_THROWS_AS(c.validate(4), Error);
  c.gamma_tilde = 1.0;
  CHECK_NOTHROW(c.validate(4));
}
