#include <doctest.h>

#include <cmath>

#include "klproj/kl_core.hpp"
#include "klproj/martingale_ot.hpp"
#include "test_helpers.hpp"

using namespace klproj;

namespace {

Histogram on_grid(std::initializer_list<double> w,
                  std::initializer_list<double> x) {
  Vector wv(Eigen::Index(w.size())), xv(Eigen::Index(x.size()));
  Eigen::Index i = 0;
  for (double v : w) wv(i++) = v;
  i = 0;
  for (double v : x) xv(i++) = v;
  return Histogram(wv, xv);
}

}  // namespace

TEST_CASE("convex order is reflexive") {
  Histogram mu = on_grid({0.2, 0.5, 0.3}, {-1.0, 0.0, 1.0});
  ConvexOrderCert cert = check_convex_order(mu, mu);
  CHECK(cert.holds());
  for (double v : cert.integral) CHECK(std::abs(v) <= 1e-14);
}

TEST_CASE("point mass precedes a symmetric split in convex order") {
  Histogram mu = on_grid({0.0, 1.0, 0.0}, {-0.5, 0.0, 0.5});
  Histogram nu = on_grid({0.5, 0.0, 0.5}, {-0.5, 0.0, 0.5});
  CHECK(check_convex_order(mu, nu).holds());
  // The reverse direction fails: spreading out cannot be undone.
  CHECK_FALSE(check_convex_order(nu, mu).holds());
}

TEST_CASE("a mean shift breaks convex order via the endpoint") {
  Vector grid(41);
  for (int i = 0; i <= 40; ++i) grid(i) = -1.0 + 2.0 * double(i) / 40.0;
  Vector w(41);
  for (int i = 0; i <= 40; ++i)
    w(i) = std::exp(-grid(i) * grid(i) / (2.0 * 0.2 * 0.2));
  w /= w.sum();
  Histogram mu(w, grid);
  // Asymmetric shifts move the mean, so convex order must fail.
  ShiftedMixtureResult shifted = shifted_mixture(mu, 0.0, 0.5);
  ConvexOrderCert cert = check_convex_order(mu, shifted.nu);
  CHECK(std::abs(cert.endpoint) > 1e-6);
  CHECK_FALSE(cert.holds());
}

TEST_CASE("convex order check rejects unequal total masses") {
  Histogram mu = on_grid({0.5, 0.5}, {0.0, 1.0});
  Histogram nu = on_grid({0.5, 0.4}, {0.0, 1.0});
  CHECK_THROWS_AS(check_convex_order(mu, nu), InvalidInputError);
}

TEST_CASE("shifted mixture basics") {
  Histogram mu = on_grid({0.25, 0.5, 0.25}, {-0.5, 0.0, 0.5});
  ShiftedMixtureResult same = shifted_mixture(mu, 0.0, 0.0);
  CHECK_FALSE(same.truncated);
  CHECK((same.nu.weights - mu.weights).cwiseAbs().maxCoeff() <= 1e-14);

  // Off-grid shift rejected.
  CHECK_THROWS_AS(shifted_mixture(mu, 0.3, 0.3), InvalidInputError);

  // Mass pushed over the boundary is truncated and flagged.
  ShiftedMixtureResult trunc = shifted_mixture(mu, 0.5, 0.5);
  CHECK(trunc.truncated);
  CHECK(trunc.nu.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric mixture passes convex order against its source") {
  MartingaleProblem prob = build_curtain_fixture(50);
  CHECK(check_convex_order(prob.mu, prob.nu).holds(1e-10));
}

TEST_CASE("martingale constraint matrix is column-stochastic") {
  Vector x(5);
  x << -1.0, -0.25, 0.0, 0.6, 1.0;
  Matrix A = martingale_constraint_matrix(x);
  REQUIRE(A.rows() == 2);
  REQUIRE(A.cols() == 5);
  CHECK((A.array() >= 0.0).all());
  Vector colsum = A.colwise().sum();
  CHECK((colsum.array() - 1.0).abs().maxCoeff() <= 1e-14);
  // First row is the affinely rescaled grid.
  CHECK(A(0, 0) == doctest::Approx(0.0));
  CHECK(A(0, 4) == doctest::Approx(1.0));
  CHECK(A(0, 3) == doctest::Approx(0.8));
}

TEST_CASE("martingale residual of the diagonal plan vanishes") {
  Vector x(3), mu(3);
  x << -1.0, 0.0, 1.0;
  mu << 0.3, 0.4, 0.3;
  Matrix pi = mu.asDiagonal();
  CHECK(martingale_residual(pi, x, mu).cwiseAbs().maxCoeff() <= 1e-15);

  Matrix skew = Matrix::Zero(3, 3);
  skew(0, 2) = 0.3;
  skew(1, 1) = 0.4;
  skew(2, 0) = 0.3;
  CHECK(martingale_residual(skew, x, mu).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("solver refuses when convex order fails") {
  Vector grid(21);
  for (int i = 0; i <= 20; ++i) grid(i) = -1.0 + 2.0 * double(i) / 20.0;
  Vector w(21);
  for (int i = 0; i <= 20; ++i)
    w(i) = std::exp(-grid(i) * grid(i) / (2.0 * 0.2 * 0.2));
  w /= w.sum();
  MartingaleProblem prob;
  prob.mu = Histogram(w, grid);
  prob.nu = shifted_mixture(prob.mu, 0.2, 0.6).nu;
  Matrix cost(21, 21);
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) cost(i, j) = std::exp(grid(j) - grid(i));
  prob.kernel = build_dense(cost, 0.01);
  StopRule stop;
  CHECK_THROWS_AS(solve(prob, stop), InfeasibleError);
}

TEST_CASE("two-point symmetric problem is solved to tolerance") {
  MartingaleProblem prob;
  prob.mu = on_grid({0.5, 0.5}, {-1.0, 1.0});
  prob.nu = prob.mu;
  Matrix cost(2, 2);
  cost << 0.0, 1.0, 0.7, 0.0;
  prob.kernel = build_dense(cost, 0.5);
  StopRule stop;
  stop.tol = 1e-10;
  stop.max_cycles = 100000;
  MartingaleSolution sol = solve(prob, stop);
  REQUIRE(sol.trace.converged);

  const Matrix& pi = sol.plan.entries;
  const Vector& x = *prob.mu.coords;
  CHECK((pi.rowwise().sum() - prob.mu.weights).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((pi.colwise().sum().transpose() - prob.nu.weights)
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
  CHECK(martingale_residual(pi, x, prob.mu.weights).cwiseAbs().maxCoeff() <=
        1e-10);

  // The diagonal plan is feasible; the solver must not do worse in KL
  // against the Gibbs kernel.
  Matrix diag = prob.mu.weights.asDiagonal();
  Matrix K = prob.kernel.to_dense();
  auto kl_mat = [](const Matrix& p, const Matrix& q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        if (p(i, j) > 0.0) s += p(i, j) * std::log(p(i, j) / q(i, j));
        s += q(i, j) - p(i, j);
      }
    return s;
  };
  CHECK(kl_mat(pi, K) <= kl_mat(diag, K) + 1e-8);
}

TEST_CASE("reduced-size fixture converges with curtain-like support") {
  MartingaleProblem prob = build_curtain_fixture(40, 0.002, 4);
  StopRule stop;
  stop.tol = 1e-5;
  stop.max_cycles = 200000;
  MartingaleSolution sol = solve(prob, stop);
  REQUIRE(sol.trace.converged);
  const Matrix& pi = sol.plan.entries;
  const Vector& x = *prob.mu.coords;
  CHECK((pi.rowwise().sum() - prob.mu.weights).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK((pi.colwise().sum().transpose() - prob.nu.weights)
            .cwiseAbs()
            .maxCoeff() <= 1e-5);
  CHECK(martingale_residual(pi, x, prob.mu.weights).cwiseAbs().maxCoeff() <=
        1e-5);

  std::vector<int> clusters = row_support_clusters(pi, 1e-4);
  for (size_t i = 0; i < clusters.size(); ++i)
    if (prob.mu.weights(Eigen::Index(i)) > 1e-8) CHECK(clusters[i] <= 2);
}

TEST_CASE("row support cluster counting") {
  Matrix pi(2, 6);
  pi << 1.0, 0.9, 0.0, 0.0, 0.8, 0.7, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  std::vector<int> c = row_support_clusters(pi, 0.5);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == 2);
  CHECK(c[1] == 1);
}

TEST_CASE("plan CSV lists only nonzero entries") {
  Matrix pi = Matrix::Zero(2, 2);
  pi(0, 1) = 0.5;
  pi(1, 0) = 0.5;
  std::string csv = plan_csv(pi);
  CHECK(csv.rfind("i,j,mass", 0) == 0);
  CHECK(csv.find("0,1,0.5") != std::string::npos);
  CHECK(csv.find("0,0,") == std::string::npos);
}
