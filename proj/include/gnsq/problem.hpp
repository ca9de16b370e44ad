#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gnsq/error.hpp"

namespace gnsq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Component callbacks take 0-based indices.
using ComponentEval = std::function<double(std::size_t i, const Vec& x)>;
using ComponentGrad =
    std::function<void(std::size_t i, const Vec& x, Eigen::Ref<Vec> out)>;

class ResidualProblem {
 public:
  ResidualProblem(std::size_t n, std::size_t m, ComponentEval eval,
                  ComponentGrad grad = {}, std::string name = "custom");

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  const std::string& name() const { return name_; }
  bool uses_finite_differences() const { return !grad_; }

  double value(std::size_t i, const Vec& x) const;
  void gradient(std::size_t i, const Vec& x, Eigen::Ref<Vec> out) const;

  std::optional<double> lipschitz_hint;  // L_F̂
  std::optional<double> jacobian_bound_hint;  // M
  std::optional<Vec> x_star;
  std::optional<double> mu_exact;  // full-batch PL constant σ_min(F̂′ᵀ)²

 private:
  std::size_t n_;
  std::size_t m_;
  ComponentEval eval_;
  ComponentGrad grad_;
  std::string name_;
};

class BatchHandle {
 public:
  // Indices are 0-based, strictly increasing.
  BatchHandle(std::vector<std::size_t> indices, std::size_t m);
  static BatchHandle full(std::size_t m);
  static BatchHandle from_one_based(const std::vector<std::size_t>& idx,
                                    std::size_t m);

  std::size_t size() const { return idx_.size(); }
  std::size_t m() const { return m_; }
  bool is_full() const { return idx_.size() == m_; }
  const std::vector<std::size_t>& indices() const { return idx_; }
  std::vector<std::size_t> one_based() const;

  bool operator==(const BatchHandle& o) const {
    return m_ == o.m_ && idx_ == o.idx_;
  }

 private:
  std::vector<std::size_t> idx_;
  std::size_t m_;
};

// Ĝ(x,B) = (F_i(x))_{i∈B}/√b
Vec residual_hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B);
Vec residual_full(const ResidualProblem& p, const Vec& x);

double eval_f1hat(const ResidualProblem& p, const Vec& x);
double eval_f2hat(const ResidualProblem& p, const Vec& x);
double eval_g1hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B);
double eval_g2hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B);

Mat jacobian_hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B);
Vec grad_f2hat(const ResidualProblem& p, const Vec& x, const BatchHandle& B);
Vec grad_f2hat(const ResidualProblem& p, const Vec& x);

// Ĝ and Ĝ′ at one point, shared by everything that needs the model there.
struct Linearization {
  Vec x;
  BatchHandle batch;
  Vec residual;  // Ĝ
  Mat jacobian;  // Ĝ′

  static Linearization at(const ResidualProblem& p, const Vec& x,
                          const BatchHandle& B);
  double g2() const { return residual.squaredNorm(); }
  double g1() const { return residual.norm(); }
  Vec half_gradient() const { return jacobian.transpose() * residual; }
};

}  // namespace gnsq
