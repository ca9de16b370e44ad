#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnsq/problem.hpp"

namespace gnsq {

enum class Event { Accept, Stall, Resample, Converged };

const char* event_name(Event e);
Event parse_event(const std::string& s);

// One outer iteration k: quantities at x_k, plus the step taken to x_{k+1}.
struct TraceRecord {
  std::size_t k = 0;
  double f1hat = 0.0;
  double g1hat_batch = 0.0;
  double step_norm = 0.0;
  double prox_grad_norm = 0.0;
  double L_k = 0.0;
  double tau_k = 0.0;
  double eta_k = 0.0;
  int n_L_probes = 0;
  std::vector<std::size_t> batch_indices;  // 1-based
  Event event = Event::Accept;
  std::int64_t wall_ns = 0;

  bool operator==(const TraceRecord&) const = default;
};

enum class Termination {
  Running,
  F1Tol,
  ProxGradTol,
  StepTol,
  MaxOuter,
  StallLimit,
};

const char* termination_name(Termination t);

struct RunState {
  std::size_t k = 0;
  Vec x;
  double L_k = 0.0;
  double last_f1 = 0.0;
  std::vector<TraceRecord> trace;
  std::vector<Vec> iterates;  // x_0 .. x_k
  Termination status = Termination::Running;
  bool fd_jacobian = false;
  double L_hat = 0.0;  // Lipschitz estimate used for the ladder cap
  std::vector<double> eps_used;
  // interpolation runs: per-iteration bound factor and observed f̂₂ ratio
  std::vector<double> theory_factor;
  std::vector<double> empirical_factor;
  bool pl_violated = false;
  std::string message;

  bool converged() const {
    return status == Termination::F1Tol || status == Termination::ProxGradTol ||
           status == Termination::StepTol;
  }
  std::size_t total_probes() const {
    std::size_t s = 0;
    for (const auto& r : trace) s += static_cast<std::size_t>(r.n_L_probes);
    return s;
  }
};

}  // namespace gnsq
