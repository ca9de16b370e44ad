#pragma once

#include <cmath>

#include "doctest.h"
#include "gnsq/builtins.hpp"
#include "gnsq/problem.hpp"
#include "gnsq/rng.hpp"

namespace th {

using gnsq::Mat;
using gnsq::ResidualProblem;
using gnsq::Vec;

// F(x) = a·x + c componentwise in 1-D, m = 1
inline ResidualProblem scalar_affine(double a, double c) {
  Mat A(1, 1);
  A(0, 0) = a;
  Vec cc(1);
  cc[0] = -c;
  return gnsq::linear_from(A, cc, "scalar");
}

inline ResidualProblem constant_residual(const Vec& F, std::size_t n = 1) {
  return ResidualProblem(
      n, static_cast<std::size_t>(F.size()),
      [F](std::size_t i, const Vec&) { return F[static_cast<Eigen::Index>(i)]; },
      [](std::size_t, const Vec&, Eigen::Ref<Vec> out) { out.setZero(); }, "const");
}

inline Mat random_matrix(gnsq::Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat M(r, c);
  for (Eigen::Index j = 0; j < c; ++j) M.col(j) = rng.normal_vec(r);
  return M;
}

inline double rel(const Vec& a, const Vec& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace th
