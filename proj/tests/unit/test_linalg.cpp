#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "helpers.hpp"
#include "gnsq/linalg.hpp"

using namespace gnsq;
using th::v;

namespace {

Vec dense(const Mat& J, double tl, const Vec& rhs) {
  return (J.transpose() * J + tl * Mat::Identity(J.cols(), J.cols())).lu().solve(rhs);
}

}  // namespace

TEST_CASE("jacobi matches the library eigensolver") {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(9));
    const Mat G = th::random_matrix(rng, n, n);
    const Mat S = G + G.transpose();
    const auto e = jacobi_eigen(S);
    Eigen::SelfAdjointEigenSolver<Mat> ref(S);
    Vec want = ref.eigenvalues().reverse();
    CHECK((e.values - want).norm() <= 1e-12 * std::max(1.0, want.norm()));
    CHECK((e.vectors.transpose() * e.vectors - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - S).cwiseAbs().maxCoeff() <=
          1e-8 * S.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("factorize examples") {
  const auto I = SpectralCache::factorize(Mat::Identity(2, 2));
  CHECK(I.side() == GramSide::GramB);
  CHECK(I.lambda()[0] == doctest::Approx(1));
  CHECK(I.lambda()[1] == doctest::Approx(1));
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = 1;
  D(1, 1) = 2;
  const auto c = SpectralCache::factorize(D);
  CHECK(c.lambda()[0] == doctest::Approx(4));
  CHECK(c.lambda()[1] == doctest::Approx(1));
  Rng rng(2);
  const Mat J = th::random_matrix(rng, 5, 3);
  const auto t = SpectralCache::factorize(J);
  CHECK(t.side() == GramSide::GramN);
  const Mat rec = t.Q() * t.lambda().asDiagonal() * t.Q().transpose();
  CHECK((rec - J.transpose() * J).cwiseAbs().maxCoeff() <= 1e-8 * (J.transpose() * J).cwiseAbs().maxCoeff());
}

TEST_CASE("regularized_solve") {
  Mat one(1, 1);
  one(0, 0) = 1;
  CHECK(SpectralCache::factorize(one, v({1})).regularized_solve(1.0)[0] == doctest::Approx(0.5));
  Rng rng(3);
  const Mat J = th::random_matrix(rng, 4, 6);
  const Vec F = rng.normal_vec(4);
  const auto c = SpectralCache::factorize(J, F);
  CHECK(th::rel(c.regularized_solve(0.37), dense(J, 0.37, J.transpose() * F)) <= 1e-8);
  CHECK(c.regularized_solve(1e14).norm() < 1e-12);
}

TEST_CASE("both Gram sides match a dense solve, ties included") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto b = static_cast<Eigen::Index>(1 + rng.below(7));
    const auto n = t % 4 == 0 ? b : static_cast<Eigen::Index>(1 + rng.below(7));
    const Mat J = th::random_matrix(rng, b, n);
    const Vec F = rng.normal_vec(b);
    const double tl = std::exp(2.0 * rng.normal());
    const Vec ref = dense(J, tl, J.transpose() * F);
    const auto c = SpectralCache::factorize(J, F);
    CHECK(th::rel(c.regularized_solve(tl), ref) <= 1e-8);
    // same system through the other Gram: append zero rows to flip the side
    Mat Jz = Mat::Zero(std::max(b, n + 1), n);
    Jz.topRows(b) = J;
    Vec Fz = Vec::Zero(Jz.rows());
    Fz.head(b) = F;
    const auto cz = SpectralCache::factorize(Jz, Fz);
    CHECK(cz.side() == GramSide::GramN);
    CHECK(th::rel(cz.regularized_solve(tl), ref) <= 1e-8);
    const Vec res = (J.transpose() * J + tl * Mat::Identity(n, n)) * c.regularized_solve(tl) -
                    J.transpose() * F;
    CHECK(res.norm() <= 1e-8 * std::max((J.transpose() * F).norm(), 1e-300));
  }
}

TEST_CASE("doubly stochastic solve") {
  Rng rng(5);
  const Mat J = th::random_matrix(rng, 3, 5);
  const Vec F = rng.normal_vec(3);
  const auto c = SpectralCache::factorize(J, F);
  const Vec g = J.transpose() * F;
  CHECK(th::rel(doubly_stochastic_solve(c, 0.8, g), c.regularized_solve(0.8)) <= 1e-12);
  const Vec g2 = rng.normal_vec(5);
  CHECK(th::rel(doubly_stochastic_solve(c, 0.8, g2), dense(J, 0.8, g2)) <= 1e-8);
  const auto z = SpectralCache::factorize(Mat::Zero(3, 5));
  CHECK(th::rel(doubly_stochastic_solve(z, 2.0, g2), g2 / 2.0) <= 1e-15);
}

TEST_CASE("sigma bounds") {
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = 1;
  D(1, 1) = 2;
  auto s = sigma_bounds(D);
  CHECK(s.sigma_min == doctest::Approx(1));
  CHECK(s.sigma_max == doctest::Approx(2));
  Mat row(1, 2);
  row << 1, 0;
  s = sigma_bounds(row);
  CHECK(s.sigma_min == doctest::Approx(1));
  CHECK(s.sigma_max == doctest::Approx(1));
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Mat J = th::random_matrix(rng, 3, 6);
    Eigen::JacobiSVD<Mat> svd(J);
    s = sigma_bounds(J);
    CHECK(s.sigma_max == doctest::Approx(svd.singularValues()[0]).epsilon(1e-8));
    CHECK(s.sigma_min == doctest::Approx(svd.singularValues()[2]).epsilon(1e-8));
  }
}

TEST_CASE("spectrum of the regularized inverse") {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const Mat J = th::random_matrix(rng, 4, 3);
    const double tau = std::exp(rng.normal());
    const double smax = sigma_bounds(J).sigma_max;
    const Mat H = (J.transpose() * J + tau * Mat::Identity(3, 3)).inverse();
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    CHECK(es.eigenvalues().minCoeff() >= 1 / (smax * smax + tau) * (1 - 1e-12));
    CHECK(es.eigenvalues().maxCoeff() <= 1 / tau * (1 + 1e-12));
  }
}

TEST_CASE("factorization reuse across damping values") {
  Rng rng(8);
  const Mat J = th::random_matrix(rng, 6, 9);
  const Vec F = rng.normal_vec(6);
  const auto c = SpectralCache::factorize(J, F);
  for (int i = 0; i < 20; ++i) {
    const double tl = std::pow(10.0, -3 + 0.3 * i);
    CHECK(th::rel(c.regularized_solve(tl), dense(J, tl, J.transpose() * F)) <= 1e-8);
  }
}

TEST_CASE("damped residual and its derivative") {
  Rng rng(9);
  for (const auto shape : {std::pair{3, 5}, std::pair{6, 2}, std::pair{4, 4}}) {
    const Mat J = th::random_matrix(rng, shape.first, shape.second);
    const Vec F = rng.normal_vec(shape.first);
    const auto c = SpectralCache::factorize(J, F);
    for (double t : {1e-3, 0.5, 7.0}) {
      const Vec d = dense(J, t, J.transpose() * F);
      const double want = (F - J * d).squaredNorm() + t * d.squaredNorm();
      CHECK(c.damped_residual(t) == doctest::Approx(want).epsilon(1e-10));
      CHECK(c.damped_residual_derivative(t) == doctest::Approx(d.squaredNorm()).epsilon(1e-10));
    }
  }
}
