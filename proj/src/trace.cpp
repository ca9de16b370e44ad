#include "gnsq/trace.hpp"

#include "gnsq/error.hpp"

namespace gnsq {

const char* event_name(Event e) {
  switch (e) {
    case Event::Accept: return "ACCEPT";
    case Event::Stall: return "STALL";
    case Event::Resample: return "RESAMPLE";
    case Event::Converged: return "CONVERGED";
  }
  return "?";
}

Event parse_event(const std::string& s) {
  if (s == "ACCEPT") return Event::Accept;
  if (s == "STALL") return Event::Stall;
  if (s == "RESAMPLE") return Event::Resample;
  if (s == "CONVERGED") return Event::Converged;
  throw Error(ErrorCode::ConfigError, "unknown event '" + s + "'");
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::F1Tol: return "f1_tol";
    case Termination::ProxGradTol: return "prox_grad_tol";
    case Termination::StepTol: return "step_tol";
    case Termination::MaxOuter: return "max_outer";
    case Termination::StallLimit: return "stall_limit";
  }
  return "?";
}

}  // namespace gnsq
