#pragma once

// Shared outer loop of the prox-step schemes (1, 2, 3, 5, 6).

#include <functional>
#include <optional>

#include "gnsq/deterministic.hpp"

namespace gnsq::detail {

enum class TauMode { G1, Adaptive, Fixed };
enum class Interval { Fixed, Variable };

struct EpsContext {
  std::size_t k = 0;
  double f1_prev = 0.0;  // f̂₁(x_{k-1}), NaN at k = 0
  double f1 = 0.0;
  double g1 = 0.0;
  double grad_norm = 0.0;  // ‖∇ĝ₂(x_k,B_k)‖
  double L_k = 0.0;
};

struct ProxLoopConfig {
  StepRule step_rule = StepRule::ExactProx;
  TauMode tau_mode = TauMode::G1;
  double tau_fixed = 1.0;
  double eta = 1.0;
  Interval interval = Interval::Fixed;
  double L_floor = 1.0;
  double gamma = 2.0;
  double gamma_tilde = 2.0;
  std::optional<double> L_known;
  std::function<double(const EpsContext&)> eps;  // empty: zero
  int max_outer = 10000;
  StopRule stop;
  int stall_limit = 10;
  std::uint64_t estimator_seed = 0;
  bool record_wall_time = false;
  int inner_max_iter = 0;
  // batch size; 0 means full batch every iteration
  std::size_t batch = 0;
  std::uint64_t seed = 0;
};

RunState run_prox_loop(const ResidualProblem& p, const ProxLoopConfig& cfg,
                       const Vec& x0);

}  // namespace gnsq::detail
