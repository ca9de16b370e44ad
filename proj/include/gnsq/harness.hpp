#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnsq/builtins.hpp"
#include "gnsq/deterministic.hpp"
#include "gnsq/stochastic.hpp"
#include "json.hpp"

namespace gnsq {

struct RunConfig {
  nlohmann::json problem;
  // scheme1, scheme2 (deterministic); scheme3..scheme6, interpolation
  std::string scheme = "scheme1";
  std::optional<DetSolverConfig> det;
  std::optional<StochSolverConfig> stoch;
  std::string output = "gnsq_out";  // directory for traces and summary.csv
  std::vector<std::uint64_t> seeds{0};
  int report_every = 0;
  double x0_jitter = 0.0;  // per-seed uniform ball around the problem's x0
};

// Strict: unknown or mistyped keys raise ConfigError naming the key.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json to_json(const TraceRecord& r);
TraceRecord trace_record_from_json(const nlohmann::json& j);
std::string serialize_record(const TraceRecord& r);  // one line, no newline
TraceRecord parse_record(const std::string& line);

nlohmann::json to_json(const ProblemConstants& c);
ProblemConstants constants_from_json(const nlohmann::json& j);

Vec start_point(const GeneratedProblem& g, const RunConfig& cfg, std::uint64_t seed);
RunState run_one(const GeneratedProblem& g, const RunConfig& cfg, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  RunState state;
  double wall_s = 0.0;
  std::string error;  // non-empty when the run threw
};

// One thread per seed; results in seed order.
std::vector<SeedResult> run_seeds(const GeneratedProblem& g, const RunConfig& cfg);

// formula 21, 25, 28 or 31; params as for cmd_plan.
nlohmann::json plan_budget(int formula, const nlohmann::json& constants,
                           const nlohmann::json& params);
nlohmann::json estimate_report(const GeneratedProblem& g, int cloud, double radius,
                               std::uint64_t seed, std::size_t batch);

// CLI commands; return the process exit status.
int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_compare(const std::string& a, const std::string& b,
                const std::string& csv_path, std::ostream& out, std::ostream& err);

// params: eps, E_g2_0, r, eta, gamma, L, m, n, r1, r2, r3, tau_tilde,
// tau_tilde_max, tauL; formula 21, 25, 28 or 31.
int cmd_plan(int formula, const std::string& constants_path,
             const nlohmann::json& params, std::ostream& out, std::ostream& err);
int cmd_estimate(const std::string& problem_path, int cloud, double radius,
                 std::uint64_t seed, std::size_t batch, std::ostream& out,
                 std::ostream& err);

}  // namespace gnsq
