#pragma once

#include <cstdint>
#include <optional>

#include "gnsq/constants.hpp"
#include "gnsq/deterministic.hpp"
#include "gnsq/sampler.hpp"

namespace gnsq {

enum class StochScheme { S3, S4, S5, S6 };
enum class StochStepRule { Rule15, Rule16, Rule17 };
enum class EtaPolicy { Const, Lemma17Opt, Theorem18 };
enum class EpsPolicy { EpsOverG1, GradProportional, PLProportional };
enum class LPolicy { Bisection, Known };

struct StochSolverConfig {
  StochScheme scheme = StochScheme::S3;
  std::size_t b = 1;
  std::size_t b_tilde = 0;  // 0: same as b
  bool independent_tilde = false;
  StochStepRule step_rule = StochStepRule::Rule15;
  EtaPolicy eta_policy = EtaPolicy::Const;
  double eta = 1.0;
  double gamma = 2.0;
  double gamma_tilde = 2.0;
  double L_floor = 1.0;
  std::optional<double> L_known;
  double tauL_tilde = 1.0;
  EpsPolicy eps_policy = EpsPolicy::EpsOverG1;
  double eps = 1e-8;
  double delta = 0.5;
  LPolicy l_policy = LPolicy::Bisection;
  double l_init = 1.0;
  std::uint64_t seed = 0;
  int max_outer = 10000;
  StopRule stop;
  int stall_limit = 10;
  std::uint64_t estimator_seed = 0;
  bool record_wall_time = false;
  int inner_max_iter = 0;
  // constants used by η/ε policies; estimated around x0 when absent
  ProblemConstants constants;

  void validate(std::size_t m) const;
};

RunState scheme3_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0);
RunState scheme4_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0);
RunState scheme5_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0);
RunState scheme6_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                     const Vec& x0);
// Scheme 4 loop with independent batches, l fixed at l_f̂₂ and the interpolation η.
RunState interpolation_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                           const Vec& x0);
RunState stochastic_run(const ResidualProblem& p, const StochSolverConfig& cfg,
                        const Vec& x0);

double eta_lemma17(const Mat& J_B, const Mat& J_Btilde, double tauL, double l_k,
                   const Vec& F_B);
double eta_theorem18(double mu, double M_G, double M_F, double L_Fhat,
                     double P_f1, double tauL);
// per-iteration contraction factor of the interpolation envelope
double envelope_rate(const ProblemConstants& c, double tauL);

struct VarianceResult {
  double exact = 0.0;
  double exact_scale = 0.0;  // σ(x)²/b
  std::optional<double> enumerated;  // m ≤ 10
  bool sigma_undefined = false;      // m = 1
};

VarianceResult variance_of_g2(const ResidualProblem& p, const Vec& x, std::size_t b);

struct EpsInputs {
  double eps = 0.0;
  double delta = 0.0;
  double g1 = 0.0;
  double grad_norm = 0.0;  // ‖∇ĝ₂(x_k,B_k)‖
  double L_k = 0.0;
  std::optional<double> M_G;
  std::optional<double> mu;
};

double eps_bound_rule17(EpsPolicy mode, const EpsInputs& in);

}  // namespace gnsq
