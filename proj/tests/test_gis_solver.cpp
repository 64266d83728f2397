#include <doctest.h>

#include <cmath>

#include "klproj/gis_solver.hpp"
#include "klproj/gibbs_kernel.hpp"
#include "klproj/projection_oracle.hpp"
#include "test_helpers.hpp"

using namespace klproj;

namespace {

BlockSchedule one_row_gis_schedule() {
  Matrix A(1, 3);
  A << 0.1, 0.5, 0.4;
  Vector b(1);
  b << 0.42;
  BlockSchedule s;
  s.blocks = {AffineBlock{A, b, BlockKind::Gis, {}}};
  return s;
}

Vector one_row_start() {
  Vector q(3);
  q << 0.5, 0.1, 0.4;
  return q;
}

}  // namespace

TEST_CASE("single-row GIS run reaches the oracle projection") {
  BlockSchedule sched = one_row_gis_schedule();
  Vector q = one_row_start();
  StopRule stop;
  stop.tol = 1e-12;
  MixedResult res = run_mixed(q, sched, stop);
  REQUIRE(res.trace.converged);

  Vector pstar = project_intersection(q, sched.blocks, 1e-14);
  CHECK((res.p - pstar).cwiseAbs().maxCoeff() <= 1e-8);
  // The raw constraint and the implicit unit-sum constraint both hold.
  CHECK(0.1 * res.p(0) + 0.5 * res.p(1) + 0.4 * res.p(2) ==
        doctest::Approx(0.42).epsilon(1e-10));
  CHECK(res.p.sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("renormalized 100-step trajectory lands on the oracle") {
  BlockSchedule sched = one_row_gis_schedule();
  sched.prepare();
  const NormalizedSystem& n = *sched.blocks[0].normalized;
  Vector p = one_row_start();
  for (int k = 0; k < 100; ++k) p = gis_step(p, n.A, n.b);
  Vector renorm = p / p.sum();
  Vector pstar = project_intersection(one_row_start(), sched.blocks, 1e-14);
  CHECK((renorm - pstar).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("explicit scaling blocks reproduce Sinkhorn cycle by cycle") {
  const Eigen::Index M = 3;
  std::mt19937_64 rng(101);
  Vector mu = testutil::random_simplex_point(rng, M);
  Vector nu = testutil::random_simplex_point(rng, M);
  Matrix cost(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      cost(i, j) = double((i - j) * (i - j)) / double(M * M);
  Matrix K = (-cost / 0.5).array().exp();

  // Flattened plan, row-major: entry i*M + j.
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
  BlockSchedule sched;
  sched.blocks = {AffineBlock{A_row, mu, BlockKind::ExplicitScaling, {}},
                  AffineBlock{A_col, nu, BlockKind::ExplicitScaling, {}}};

  StopRule stop;
  stop.tol = 1e-13;
  stop.max_cycles = 6;
  RunOptions opts;
  opts.record_iterates = true;
  MixedResult res = run_mixed(q, sched, stop, opts);

  // Manual Sinkhorn on the dense kernel, compared after each half-step.
  Matrix plan = K;
  size_t step = 1;  // iterates[0] is q itself
  for (int cycle = 0; cycle < res.trace.cycles_run; ++cycle) {
    Vector row = plan.rowwise().sum();
    plan.array().colwise() *= (mu.array() / row.array());
    REQUIRE(step < res.trace.iterates.size());
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        CHECK(res.trace.iterates[step](i * M + j) ==
              doctest::Approx(plan(i, j)).epsilon(1e-12));
    ++step;
    Vector col = plan.colwise().sum();
    plan.array().rowwise() *= (nu.array() / col.array()).transpose();
    REQUIRE(step < res.trace.iterates.size());
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        CHECK(res.trace.iterates[step](i * M + j) ==
              doctest::Approx(plan(i, j)).epsilon(1e-12));
    ++step;
  }
}

TEST_CASE("mixed random blocks converge to the oracle projection") {
  std::mt19937_64 rng(103);
  int done = 0;
  for (int it = 0; it < 25; ++it) {
    const Eigen::Index n = 4 + Eigen::Index(rng() % 5);
    Vector q = testutil::random_simplex_point(rng, n);
    std::vector<AffineBlock> blocks =
        testutil::random_feasible_blocks(rng, n, 4);
    BlockSchedule sched;
    sched.blocks = blocks;
    StopRule stop;
    stop.tol = 1e-10;
    stop.max_cycles = 200000;
    MixedResult res = run_mixed(q, sched, stop);
    REQUIRE(res.trace.converged);
    Vector pstar = project_intersection(q, blocks, 1e-13);
    CHECK((res.p - pstar).cwiseAbs().maxCoeff() <= 1e-6);
    ++done;
  }
  CHECK(done == 25);
}

TEST_CASE("Fejer audit slack is nonnegative along a recorded run") {
  std::mt19937_64 rng(107);
  Vector q = testutil::random_simplex_point(rng, 6);
  std::vector<AffineBlock> blocks =
      testutil::random_feasible_blocks(rng, 6, 4);
  BlockSchedule sched;
  sched.blocks = blocks;
  sched.prepare();
  StopRule stop;
  stop.tol = 1e-9;
  RunOptions opts;
  opts.record_iterates = true;
  MixedResult res = run_mixed(q, sched, stop, opts);
  REQUIRE(res.trace.converged);

  Vector pstar = project_intersection(q, blocks, 1e-13);
  std::vector<double> slack = fejer_audit(res.trace, sched, pstar);
  for (double s : slack) CHECK(s >= -1e-10);

  std::vector<double> dist = kl_to_reference(res.trace, pstar);
  for (size_t k = 1; k < dist.size(); ++k)
    CHECK(dist[k] <= dist[k - 1] + 1e-10);
}

TEST_CASE("run_mixed stops at the cycle budget without converging") {
  BlockSchedule sched = one_row_gis_schedule();
  StopRule stop;
  stop.tol = 1e-12;
  stop.max_cycles = 1;
  MixedResult res = run_mixed(one_row_start(), sched, stop);
  CHECK_FALSE(res.trace.converged);
  CHECK(res.trace.cycles_run == 1);
}
