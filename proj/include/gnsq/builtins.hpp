#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnsq/problem.hpp"
#include "json.hpp"

namespace gnsq {

// F(x) = Ax − c, one row per component.
ResidualProblem linear_from(const Mat& A, const Vec& c, std::string name = "linear");

// Planted SVD with singular values spread log-uniformly over [1, cond].
// Consistent instances set c = Ax*; otherwise c gets an orthogonal kick.
ResidualProblem linear_problem(std::size_t m, std::size_t n, double cond,
                               bool consistent, std::uint64_t seed);
// Pairs F₂ᵢ₋₁ = 10(x₂ᵢ − x₂ᵢ₋₁²), F₂ᵢ = 1 − x₂ᵢ₋₁; n even.
ResidualProblem rosenbrock_system(std::size_t n);
// F_i = sin(aᵢᵀx) − bᵢ with a planted root.
ResidualProblem trig_system(std::size_t n, std::uint64_t seed);
// m ≤ n consistent linear features, singular values in [1,2].
ResidualProblem overparam_features(std::size_t m, std::size_t n, std::uint64_t seed);
// Each row of a random base matrix appears twice.
ResidualProblem duplicated_rows(std::size_t m, std::size_t n);

struct GeneratedProblem {
  ResidualProblem problem;
  Vec x0;
  nlohmann::json spec;
};

// {"builtin": name, ...params, "x0": [...]?} or
// {"kind": "linear", "A": [[...]], "c": [...], "x0": [...]?} or {"path": file}.
GeneratedProblem generate_problem(const nlohmann::json& spec);

// Default start point for a builtin.
Vec default_start(const ResidualProblem& p);

std::vector<std::string> builtin_names();

// Small deterministic instances of every builtin, used by the check suites.
std::vector<GeneratedProblem> builtin_suite(std::uint64_t seed = 0);

}  // namespace gnsq
