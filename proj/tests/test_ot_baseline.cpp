#include <doctest.h>

#include <cmath>

#include "klproj/ot_baseline.hpp"
#include "klproj/projection_oracle.hpp"
#include "test_helpers.hpp"

using namespace klproj;

namespace {

Matrix squared_distance_cost(Eigen::Index M) {
  Matrix cost(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) {
      const double d = double(i - j) / double(M - 1 > 0 ? M - 1 : 1);
      cost(i, j) = d * d;
    }
  return cost;
}

}  // namespace

TEST_CASE("Sinkhorn trivia: single site and huge epsilon") {
  StopRule stop;
  stop.tol = 1e-12;

  Vector one = Vector::Ones(1);
  GibbsKernel k1 = build_dense(Matrix::Zero(1, 1), 1.0);
  SinkhornResult r1 = sinkhorn(one, one, k1, stop);
  CHECK(r1.converged);
  CHECK(r1.plan.entries(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(401);
  Vector mu = testutil::random_simplex_point(rng, 5);
  GibbsKernel khuge = build_dense(squared_distance_cost(5), 1e6);
  SinkhornResult r2 = sinkhorn(mu, mu, khuge, stop);
  REQUIRE(r2.converged);
  Matrix rank_one = mu * mu.transpose();
  CHECK((r2.plan.entries - rank_one).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("Sinkhorn at M = 6 matches marginals and the oracle") {
  const Eigen::Index M = 6;
  std::mt19937_64 rng(409);
  Vector mu = testutil::random_simplex_point(rng, M);
  Vector nu = testutil::random_simplex_point(rng, M);
  GibbsKernel kern = build_dense(squared_distance_cost(M), 0.1);
  StopRule stop;
  stop.tol = 1e-11;
  stop.max_cycles = 200000;
  SinkhornResult r = sinkhorn(mu, nu, kern, stop);
  REQUIRE(r.converged);
  CHECK((marginal_row(r.plan) - mu).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((marginal_col(r.plan) - nu).cwiseAbs().maxCoeff() <= 1e-9);

  Matrix K = kern.to_dense();
  Vector q(M * M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) q(i * M + j) = K(i, j);
  Matrix A_row = Matrix::Zero(M, M * M);
  Matrix A_col = Matrix::Zero(M, M * M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) {
      A_row(i, i * M + j) = 1.0;
      A_col(j, i * M + j) = 1.0;
    }
  AffineBlock rows{A_row, mu, BlockKind::ExplicitScaling, {}};
  AffineBlock cols{A_col, nu, BlockKind::ExplicitScaling, {}};
  Vector pstar = project_intersection(q, {rows, cols}, 1e-13);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      CHECK(std::abs(pstar(i * M + j) - r.plan.entries(i, j)) <= 1e-7);
}

TEST_CASE("stacked multiplicative variant reaches the same plan") {
  const Eigen::Index M = 8;
  std::mt19937_64 rng(419);
  Vector mu = testutil::random_simplex_point(rng, M);
  Vector nu = testutil::random_simplex_point(rng, M);
  GibbsKernel kern = build_dense(squared_distance_cost(M), 0.1);
  StopRule stop;
  stop.tol = 1e-10;
  stop.max_cycles = 400000;
  SinkhornResult a = sinkhorn(mu, nu, kern, stop);
  SinkhornResult b = stacked_gis_sinkhorn(mu, nu, kern, 0.5, stop);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK((a.plan.entries - b.plan.entries).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(b.iterations >= a.iterations);
}

TEST_CASE("stacked variant rejects exponent outside (0, 1)") {
  Vector mu = Vector::Constant(2, 0.5);
  GibbsKernel kern = build_dense(squared_distance_cost(2), 0.1);
  StopRule stop;
  CHECK_THROWS_AS(stacked_gis_sinkhorn(mu, mu, kern, 1.0, stop),
                  InvalidInputError);
  CHECK_THROWS_AS(stacked_gis_sinkhorn(mu, mu, kern, 0.0, stop),
                  InvalidInputError);
}

TEST_CASE("one stacked half-step is the square root of a Sinkhorn double step") {
  const Eigen::Index M = 5;
  Vector mu = Vector::Constant(M, 1.0 / double(M));
  GibbsKernel kern = build_dense(squared_distance_cost(M), 0.2);
  Matrix K = kern.to_dense();  // symmetric

  StopRule one_step;
  one_step.tol = 0.0 + 1e-300;  // force exactly one iteration
  one_step.max_cycles = 1;
  SinkhornResult s = stacked_gis_sinkhorn(mu, mu, kern, 0.5, one_step);

  // The solver iterates on the simplex: it starts from the normalized
  // kernel and renormalizes after the multiplicative step.
  Matrix Kn = K / K.sum();
  Vector row = Kn.rowwise().sum();
  Vector col = Kn.colwise().sum();
  Matrix expect = Kn;
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      expect(i, j) *= std::sqrt((mu(i) / row(i)) * (mu(j) / col(j)));
  expect /= expect.sum();
  CHECK((s.plan.entries - expect).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("per-step improvement dominates half the marginal divergences") {
  const Eigen::Index M = 6;
  std::mt19937_64 rng(431);
  Vector mu = testutil::random_simplex_point(rng, M);
  Vector nu = testutil::random_simplex_point(rng, M);
  GibbsKernel kern = build_dense(squared_distance_cost(M), 0.1);

  StopRule tight;
  tight.tol = 1e-12;
  tight.max_cycles = 500000;
  SinkhornResult limit = stacked_gis_sinkhorn(mu, nu, kern, 0.5, tight);
  REQUIRE(limit.converged);
  const Matrix& pstar = limit.plan.entries;

  auto kl_mat = [](const Matrix& p, const Matrix& q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        if (p(i, j) > 0.0) s += p(i, j) * std::log(p(i, j) / q(i, j));
        s += q(i, j) - p(i, j);
      }
    return s;
  };
  auto kl_vec = [](const Vector& p, const Vector& q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) > 0.0) s += p(i) * std::log(p(i) / q(i));
      s += q(i) - p(i);
    }
    return s;
  };

  Matrix pi = kern.to_dense();
  for (int step = 0; step < 60; ++step) {
    Vector row = pi.rowwise().sum();
    Vector col = pi.colwise().sum();
    Matrix next = pi;
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        next(i, j) *= std::sqrt((mu(i) / row(i)) * (nu(j) / col(j)));
    const double decrease = kl_mat(pstar, pi) - kl_mat(pstar, next);
    const double bound = 0.5 * (kl_vec(mu, row) + kl_vec(nu, col));
    CHECK(decrease >= bound - 1e-10);
    pi = next;
  }
}

TEST_CASE("block study on a degenerate single-site cell") {
  BlockStudyReport rep = block_study({0.1}, {1}, {1e-8}, 3, 99);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.cells[0].mean_sinkhorn_iters >= 1.0);
  CHECK(rep.cells[0].mean_stacked_half_iters >= 1.0);
  CHECK(rep.cells[0].ratio_half_vs_sinkhorn == doctest::Approx(1.0));
}

TEST_CASE("block study serialization is deterministic in the seed") {
  BlockStudyReport a = block_study({0.1}, {8}, {1e-6}, 3, 1234);
  BlockStudyReport b = block_study({0.1}, {8}, {1e-6}, 3, 1234);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_csv().find(',') != std::string::npos);
}
