#pragma once

#include <cstdint>
#include <optional>

#include "gnsq/constants.hpp"
#include "gnsq/linalg.hpp"
#include "gnsq/model.hpp"
#include "gnsq/trace.hpp"

namespace gnsq {

enum class StepRule { ExactProx, Scaled, Inexact };
enum class TauRule { F1Hat, Adaptive, Fixed };
enum class EpsRule { Const, ProportionalDecrease, Zero };

struct StopRule {
  double f1_tol = 1e-10;
  double prox_grad_tol = 1e-8;
  double step_tol = 1e-12;
};

struct DetSolverConfig {
  StepRule step_rule = StepRule::ExactProx;
  TauRule tau_rule = TauRule::F1Hat;
  double tau_fixed = 1.0;
  double L_init = 1.0;
  std::optional<double> L_known;
  double eta = 1.0;
  EpsRule eps_rule = EpsRule::Zero;
  double eps = 0.0;
  int max_outer = 10000;
  StopRule stop;
  int stall_limit = 10;
  std::uint64_t estimator_seed = 0;
  bool record_wall_time = false;
  int inner_max_iter = 0;  // 0: default limit

  void validate() const;
};

// max over random secant pairs in a ball of ‖F̂′(y)−F̂′(x)‖_F/‖y−x‖, times 2.
double estimate_jacobian_lipschitz(const ResidualProblem& p, const Vec& center,
                                   double radius = 1.0, int pairs = 32,
                                   std::uint64_t seed = 0);

RunState scheme1_run(const ResidualProblem& p, const DetSolverConfig& cfg,
                     const Vec& x0);
RunState scheme2_run(const ResidualProblem& p, const DetSolverConfig& cfg,
                     const Vec& x0);

struct LineSearchResult {
  double L = 0.0;
  Vec x;
  int n_probes = 0;
};

// Exact-prox doubling ladder on the full-batch model; throws CapExceeded.
LineSearchResult line_search_L(const ResidualProblem& p, const Vec& x,
                               double tau, double L_start, double L_cap);

struct InnerResult {
  Vec x;
  double gap_bound = 0.0;  // +inf when the iteration limit was hit
  int iterations = 0;
  bool hit_limit = false;
};

// Gradient descent on ψ with step 1/L_ψ, L_ψ = L + M²/τ.
InnerResult inexact_inner_solve(const ModelAnchor& a, double eps_target,
                                int max_iter = 0);

enum class DetCertificate { T1, T3, T5, T7 };


std::vector<double> certificate_check_det(const ResidualProblem& p,
                                          const RunState& s,
                                          const DetSolverConfig& cfg,
                                          const ProblemConstants& c,
                                          DetCertificate which);

}  // namespace gnsq
