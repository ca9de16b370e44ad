#include "gnsq/builtins.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "gnsq/linalg.hpp"
#include "gnsq/rng.hpp"

namespace gnsq {

using nlohmann::json;

ResidualProblem linear_from(const Mat& A, const Vec& c, std::string name) {
  if (A.rows() != c.size())
    throw Error(ErrorCode::DimensionMismatch, "A and c disagree in rows");
  auto Ap = std::make_shared<const Mat>(A);
  auto cp = std::make_shared<const Vec>(c);
  ResidualProblem p(
      static_cast<std::size_t>(A.cols()), static_cast<std::size_t>(A.rows()),
      [Ap, cp](std::size_t i, const Vec& x) {
        const auto r = static_cast<Eigen::Index>(i);
        return Ap->row(r).dot(x) - (*cp)[r];
      },
      [Ap](std::size_t i, const Vec&, Eigen::Ref<Vec> out) {
        out = Ap->row(static_cast<Eigen::Index>(i)).transpose();
      },
      std::move(name));
  p.lipschitz_hint = 0.0;
  const double sm = std::sqrt(static_cast<double>(A.rows()));
  const SigmaBounds sb = sigma_bounds(A / sm);
  p.jacobian_bound_hint = sb.sigma_max;
  p.mu_exact = sb.sigma_min * sb.sigma_min;
  return p;
}

namespace {

Mat orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat G(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) G.col(j) = rng.normal_vec(rows);
  Eigen::HouseholderQR<Mat> qr(G);
  return qr.householderQ() * Mat::Identity(rows, cols);
}

Mat planted(Rng& rng, std::size_t m, std::size_t n, double smin, double smax) {
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n);
  const Eigen::Index k = std::min(mi, ni);
  const Mat U = orthonormal(rng, mi, k);
  const Mat V = orthonormal(rng, ni, k);
  Vec s(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    s[i] = smin * std::pow(smax / smin, t);
  }
  return U * s.asDiagonal() * V.transpose();
}

}  // namespace

ResidualProblem linear_problem(std::size_t m, std::size_t n, double cond,
                               bool consistent, std::uint64_t seed) {
  if (m < 1 || n < 1 || !(cond >= 1.0))
    throw Error(ErrorCode::UnknownSpec, "linear needs m,n >= 1 and cond >= 1");
  Rng rng(seed);
  const Mat A = planted(rng, m, n, 1.0, cond);
  const Vec xs = rng.normal_vec(static_cast<Eigen::Index>(n));
  Vec c = A * xs;
  if (!consistent) {
    if (m <= n) throw Error(ErrorCode::UnknownSpec, "inconsistent linear needs m > n");
    // component of a random vector outside range(A)
    Vec z = rng.normal_vec(static_cast<Eigen::Index>(m));
    z -= A * A.completeOrthogonalDecomposition().solve(z);
    c += z;
  }
  ResidualProblem p = linear_from(A, c, "linear");
  p.x_star = xs;
  return p;
}

ResidualProblem rosenbrock_system(std::size_t n) {
  if (n < 2 || n % 2 != 0)
    throw Error(ErrorCode::UnknownSpec, "rosenbrock_system needs even n >= 2");
  ResidualProblem p(
      n, n,
      [](std::size_t i, const Vec& x) {
        const auto a = static_cast<Eigen::Index>(i - i % 2);
        return i % 2 == 0 ? 10.0 * (x[a + 1] - x[a] * x[a]) : 1.0 - x[a];
      },
      [](std::size_t i, const Vec& x, Eigen::Ref<Vec> out) {
        const auto a = static_cast<Eigen::Index>(i - i % 2);
        out.setZero();
        if (i % 2 == 0) {
          out[a] = -20.0 * x[a];
          out[a + 1] = 10.0;
        } else {
          out[a] = -1.0;
        }
      },
      "rosenbrock_system");
  // ‖F′(x)−F′(y)‖_F = 20|x₁−y₁| per pair, scaled by 1/√m
  p.lipschitz_hint = 20.0 / std::sqrt(static_cast<double>(n));
  p.x_star = Vec::Ones(static_cast<Eigen::Index>(n));
  return p;
}

ResidualProblem trig_system(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::UnknownSpec, "trig_system needs n >= 1");
  Rng rng(seed);
  const auto ni = static_cast<Eigen::Index>(n);
  Mat A(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i)
    A.row(i) = rng.normal_vec(ni).transpose() / std::sqrt(static_cast<double>(n));
  const Vec xs = 0.5 * rng.normal_vec(ni) / std::sqrt(static_cast<double>(n));
  const Vec b = (A * xs).array().sin().matrix();
  auto Ap = std::make_shared<const Mat>(A);
  auto bp = std::make_shared<const Vec>(b);
  ResidualProblem p(
      n, n,
      [Ap, bp](std::size_t i, const Vec& x) {
        const auto r = static_cast<Eigen::Index>(i);
        return std::sin(Ap->row(r).dot(x)) - (*bp)[r];
      },
      [Ap](std::size_t i, const Vec& x, Eigen::Ref<Vec> out) {
        const auto r = static_cast<Eigen::Index>(i);
        out = std::cos(Ap->row(r).dot(x)) * Ap->row(r).transpose();
      },
      "trig_system");
  // |cos′| ≤ 1: ‖F′(x)−F′(y)‖_F ≤ (Σ‖aᵢ‖⁴)^{1/2}‖x−y‖
  p.lipschitz_hint = std::sqrt(A.rowwise().squaredNorm().array().square().sum()) /
                     std::sqrt(static_cast<double>(n));
  p.x_star = xs;
  return p;
}

ResidualProblem overparam_features(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m < 1 || m > n) throw Error(ErrorCode::UnknownSpec, "overparam_features needs 1 <= m <= n");
  Rng rng(seed);
  const Mat A = planted(rng, m, n, 1.0, 2.0);
  const Vec xs = rng.normal_vec(static_cast<Eigen::Index>(n));
  ResidualProblem p = linear_from(A, A * xs, "overparam_features");
  p.x_star = xs;
  return p;
}

ResidualProblem duplicated_rows(std::size_t m, std::size_t n) {
  if (m < 2 || n < 1) throw Error(ErrorCode::UnknownSpec, "duplicated_rows needs m >= 2");
  Rng rng(0);
  const std::size_t half = (m + 1) / 2;
  const auto ni = static_cast<Eigen::Index>(n);
  Mat base(static_cast<Eigen::Index>(half), ni);
  for (Eigen::Index i = 0; i < base.rows(); ++i) base.row(i) = rng.normal_vec(ni).transpose();
  const Vec xs = rng.normal_vec(ni);
  Mat A(static_cast<Eigen::Index>(m), ni);
  for (std::size_t i = 0; i < m; ++i)
    A.row(static_cast<Eigen::Index>(i)) = base.row(static_cast<Eigen::Index>(i / 2));
  ResidualProblem p = linear_from(A, A * xs, "duplicated_rows");
  p.x_star = xs;
  return p;
}

Vec default_start(const ResidualProblem& p) {
  const auto n = static_cast<Eigen::Index>(p.n());
  if (p.name() == "rosenbrock_system") {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; i += 2) {
      x[i] = -1.2;
      x[i + 1] = 1.0;
    }
    return x;
  }
  return Vec::Zero(n);
}

std::vector<std::string> builtin_names() {
  return {"linear", "rosenbrock_system", "trig_system", "overparam_features",
          "duplicated_rows"};
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("problem key '") + key + "' has the wrong type");
  }
}

template <class T>
T need(const json& j, const char* key) {
  if (!j.contains(key))
    throw Error(ErrorCode::ConfigError, std::string("problem key '") + key + "' is missing");
  return get_or<T>(j, key, T{});
}

Vec to_vec(const json& j, const char* key) {
  std::vector<double> v;
  try {
    v = j.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("problem key '") + key + "' must be a number array");
  }
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

GeneratedProblem generate_problem(const json& spec) {
  if (!spec.is_object()) throw Error(ErrorCode::UnknownSpec, "problem spec must be an object");
  if (spec.contains("path")) {
    const std::string path = need<std::string>(spec, "path");
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open problem file " + path);
    json inner;
    try {
      in >> inner;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, "problem file " + path + ": " + e.what());
    }
    return generate_problem(inner);
  }
  auto finish = [&](ResidualProblem p) {
    Vec x0 = default_start(p);
    if (spec.contains("x0")) {
      x0 = to_vec(spec, "x0");
      if (static_cast<std::size_t>(x0.size()) != p.n())
        throw Error(ErrorCode::ConfigError, "problem key 'x0' has the wrong length");
    }
    return GeneratedProblem{std::move(p), std::move(x0), spec};
  };
  if (spec.contains("kind")) {
    const std::string kind = need<std::string>(spec, "kind");
    if (kind != "linear") throw Error(ErrorCode::UnknownSpec, "unknown problem kind '" + kind + "'");
    std::vector<std::vector<double>> rows;
    try {
      rows = spec.at("A").get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ConfigError, "problem key 'A' must be a matrix of numbers");
    }
    if (rows.empty() || rows[0].empty()) throw Error(ErrorCode::ConfigError, "problem key 'A' is empty");
    Mat A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw Error(ErrorCode::ConfigError, "problem key 'A' has ragged rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return finish(linear_from(A, to_vec(spec, "c"), get_or<std::string>(spec, "name", "linear")));
  }
  const std::string name = need<std::string>(spec, "builtin");
  const auto seed = get_or<std::uint64_t>(spec, "seed", 0);
  if (name == "linear")
    return finish(linear_problem(need<std::size_t>(spec, "m"), need<std::size_t>(spec, "n"),
                                 get_or<double>(spec, "cond", 10.0),
                                 get_or<bool>(spec, "consistent", true), seed));
  if (name == "rosenbrock_system") return finish(rosenbrock_system(get_or<std::size_t>(spec, "n", 2)));
  if (name == "trig_system") return finish(trig_system(need<std::size_t>(spec, "n"), seed));
  if (name == "overparam_features")
    return finish(overparam_features(need<std::size_t>(spec, "m"), need<std::size_t>(spec, "n"), seed));
  if (name == "duplicated_rows")
    return finish(duplicated_rows(need<std::size_t>(spec, "m"), need<std::size_t>(spec, "n")));
  throw Error(ErrorCode::UnknownSpec, "unknown builtin '" + name + "'");
}

std::vector<GeneratedProblem> builtin_suite(std::uint64_t seed) {
  const std::vector<json> specs = {
      {{"builtin", "linear"}, {"m", 4}, {"n", 10}, {"cond", 10.0}, {"seed", seed + 1}},
      {{"builtin", "linear"}, {"m", 12}, {"n", 5}, {"cond", 5.0}, {"consistent", false}, {"seed", seed + 2}},
      {{"builtin", "rosenbrock_system"}, {"n", 4}},
      {{"builtin", "trig_system"}, {"n", 5}, {"seed", seed + 3}},
      {{"builtin", "overparam_features"}, {"m", 4}, {"n", 10}, {"seed", seed + 4}},
      {{"builtin", "duplicated_rows"}, {"m", 6}, {"n", 4}},
  };
  std::vector<GeneratedProblem> out;
  for (const auto& s : specs) out.push_back(generate_problem(s));
  return out;
}

}  // namespace gnsq
