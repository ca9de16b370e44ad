#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gnsq/constants.hpp"
#include "gnsq/stochastic.hpp"

namespace gnsq {

// Constants over a cloud of points uniform in a ball around x0 (x0 included).
// batch_size 0 means M_G is taken over the full batch.
ProblemConstants estimate_constants(const ResidualProblem& p, const Vec& x0,
                                    int cloud_size = 64, double radius = 1.0,
                                    std::uint64_t seed = 0,
                                    std::size_t batch_size = 0);

// Fields present in `user` win; the rest come from `est`.
ProblemConstants merge_constants(const ProblemConstants& user,
                                 const ProblemConstants& est);

std::vector<Vec> sample_cloud(const Vec& x0, int count, double radius,
                              std::uint64_t seed);

struct PLEntry {
  std::size_t point = 0;
  std::size_t b = 0;
  double min_sigma2 = 0.0;
  std::size_t batches_checked = 0;
  bool enumerated = false;
  bool pass = false;
};

struct PLReport {
  std::vector<PLEntry> entries;
  double mu_hat = 0.0;
  bool pass = false;
};

PLReport pl_check(const ResidualProblem& p, const std::vector<Vec>& points,
                  const std::vector<std::size_t>& batch_sizes,
                  double threshold = 1e-12, std::uint64_t seed = 0);

// Smallest batch PL constant over every batch size 1..min(m,n), full batch
// included.
double mu_all_batch_sizes(const ResidualProblem& p, const std::vector<Vec>& points,
                          std::uint64_t seed = 0);

double prox_grad_norm(const ResidualProblem& p, const Vec& x, double L_ref,
                      double tau, const BatchHandle& B);

struct BudgetInputs {
  ProblemConstants c;
  double E_g2_0 = 0.0;  // E[ĝ₂(x₀,B₀)]
  double eps = 0.0;
  double r = 0.5;
  double eta = 1.0;
  double gamma = 2.0;
  double L = 1.0;
  std::size_t m = 1;
  std::size_t n = 1;
  // scheme 4 budgets: shares of ε² and the damping range
  double r1 = 1.0 / 3.0, r2 = 1.0 / 3.0, r3 = 1.0 / 3.0;
  double tau_tilde = 1.0;       // lower bound τ̃
  double tau_tilde_max = 1.0;   // upper bound 𝒯̃
  std::optional<double> tauL;   // fixes τ̃L instead of minimizing over c
};

struct Budget {
  long long k = 0;
  long long b = 0;
  double L = 0.0;  // scheme 4 budgets only
};

Budget budget_sublinear_stochastic(const BudgetInputs& in);
Budget budget_linear_stochastic(const BudgetInputs& in);
Budget budget_scheme4(const BudgetInputs& in, bool pl_variant);

enum class StochCertificate { T10, T11, T12, T14 };

struct CertificateReport {
  std::string theorem;
  std::vector<std::size_t> checkpoints;
  std::vector<double> lhs_mean;
  std::vector<double> lhs_se;
  std::vector<double> rhs;
  std::vector<double> slacks;  // rhs − mean
  bool pass = false;  // slack ≥ −3·SE at every checkpoint
};

CertificateReport certificate_check_stoch(const ResidualProblem& p,
                                          const std::vector<RunState>& runs,
                                          const StochSolverConfig& cfg,
                                          const ProblemConstants& c,
                                          StochCertificate which,
                                          const std::vector<std::size_t>& checkpoints);

}  // namespace gnsq
