#include "klproj/weak_ot.hpp"

#include <cfloat>
#include <cmath>

#include "klproj/martingale_ot.hpp"  // build_curtain_fixture

namespace klproj {

WeakConstraints build_constraints(const Vector& x, const Vector& y) {
  if (x.size() == 0 || y.size() == 0)
    throw InvalidInputError("build_constraints: empty grid");
  if (y.minCoeff() > x.minCoeff() || y.maxCoeff() < x.maxCoeff())
    throw InvalidInputError(
        "build_constraints: conv(X) not contained in conv(Y)");
  WeakConstraints wc;
  wc.xi_x = x.minCoeff();
  wc.xi_y = (-y).minCoeff();
  wc.xi_prime = std::max(x.maxCoeff() - wc.xi_x, (-y).maxCoeff() - wc.xi_y);
  if (wc.xi_prime <= 0.0)
    throw InvalidInputError("build_constraints: degenerate grids");

  wc.b.resize(2);
  wc.b << -(wc.xi_x + wc.xi_y) / wc.xi_prime,
      2.0 + (wc.xi_x + wc.xi_y) / wc.xi_prime;

  wc.A_x.resize(2, x.size());
  wc.A_x.row(0) = ((x.array() - wc.xi_x) / wc.xi_prime).matrix().transpose();
  wc.A_x.row(1) = (1.0 - wc.A_x.row(0).array()).matrix();

  wc.A_y.resize(2, y.size());
  wc.A_y.row(0) = ((-y.array() - wc.xi_y) / wc.xi_prime).matrix().transpose();
  wc.A_y.row(1) = (1.0 - wc.A_y.row(0).array()).matrix();
  return wc;
}

double quadratic_cost(double a, double b) { return (a - b) * (a - b); }

double weak_cost(const Matrix& pi_x, const Vector& mu, const Vector& x,
                 const std::function<double(double, double)>& cost_fn) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu(i) == 0.0) continue;
    const double m_i = pi_x.row(i).dot(x) / mu(i);
    total += mu(i) * cost_fn(x(i), m_i);
  }
  return total;
}

double jensen_gap(const Matrix& pi_y, const Matrix& pi_x, const Vector& mu,
                  const Vector& x, const Vector& y, const Matrix& cost,
                  const std::function<double(double, double)>& cost_fn) {
  // Row-wise Jensen: sum_k pi_y(i,k) c(x_i, y_k) >= (row mass) c(x_i, m_i)
  // with m_i the conditional mean of pi_y's row. Under exact mean
  // consistency m_i coincides with pi_x's conditional mean; evaluating at
  // pi_y's own means keeps the bound valid when the iterates only satisfy
  // the coupling constraint approximately.
  (void)pi_x;
  (void)mu;
  const double relaxed = (pi_y.array() * cost.array()).sum();
  double barycentric = 0.0;
  for (Eigen::Index i = 0; i < pi_y.rows(); ++i) {
    const double mass = pi_y.row(i).sum();
    if (mass <= 0.0) continue;
    const double m_i = pi_y.row(i).dot(y) / mass;
    barycentric += mass * cost_fn(x(i), m_i);
  }
  return relaxed - barycentric;
}

WeakSolution solve(const WeakProblem& problem, const WeakStopRule& stop,
                   const std::function<double(double, double)>& cost_fn) {
  if (!problem.mu.coords)
    throw InvalidInputError("weak solve: mu needs coords");
  const Vector& x = *problem.mu.coords;
  const Vector mu = problem.mu.weights * problem.mass_scale;
  const Vector nu = problem.nu.weights * problem.mass_scale;
  const Vector& y = problem.y;
  const Eigen::Index M = x.size(), N = y.size();
  if (problem.cost.rows() != M || problem.cost.cols() != N)
    throw DimensionError("weak solve: cost shape mismatch");
  if ((mu.array() <= 0.0).any() || (nu.array() <= 0.0).any())
    throw InvalidInputError("weak solve: marginals must be positive");

  WeakConstraints wc = build_constraints(x, y);
  Vector b = wc.b * problem.mass_scale;

  Matrix pi_x = Matrix::Constant(M, M, problem.mass_scale);
  // pi_y = exp(-c/eps), initialized in log space: exponents below the
  // representable floor are clamped to the smallest positive normal value.
  Matrix pi_y(M, N);
  const double log_floor = std::log(DBL_MIN);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index k = 0; k < N; ++k) {
      const double e = -problem.cost(i, k) / problem.epsilon;
      pi_y(i, k) =
          (e < log_floor ? DBL_MIN : std::exp(e)) * problem.mass_scale;
    }

  WeakSolution sol;
  double prev_cost = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < stop.max_cycles; ++it) {
    // nu-scaling of pi_x
    Vector col = pi_x.colwise().sum();
    for (Eigen::Index j = 0; j < M; ++j) pi_x.col(j) *= nu(j) / col(j);

    // joint GIS step for mean consistency
    Matrix denom = wc.A_x * pi_x.transpose() + wc.A_y * pi_y.transpose();
    Matrix z(2, M);
    for (Eigen::Index i = 0; i < M; ++i)
      for (int r = 0; r < 2; ++r) {
        if (denom(r, i) <= 0.0)
          throw InfeasibleError("weak solve: zero mass in GIS denominator");
        z(r, i) = std::log(b(r)) - std::log(denom(r, i));
      }
    pi_x = pi_x.array() * (z.transpose() * wc.A_x).array().exp();
    pi_y = pi_y.array() * (z.transpose() * wc.A_y).array().exp();

    // mu-scaling of both plans
    Vector row_x = pi_x.rowwise().sum();
    Vector row_y = pi_y.rowwise().sum();
    for (Eigen::Index i = 0; i < M; ++i) {
      pi_x.row(i) *= mu(i) / row_x(i);
      pi_y.row(i) *= mu(i) / row_y(i);
    }

    const double cost_now = weak_cost(pi_x, mu, x, cost_fn);
    sol.cost_trace.push_back(cost_now);
    sol.iterations = it + 1;
    if (stop.kind == WeakStopKind::CostChange) {
      if (it > 0 && std::abs(cost_now - prev_cost) < stop.tol) {
        sol.converged = true;
      }
      prev_cost = cost_now;
    } else {
      Vector mean_resid(M);
      for (Eigen::Index i = 0; i < M; ++i)
        mean_resid(i) =
            (pi_x.row(i).dot(x) - pi_y.row(i).dot(y)) / mu(i);
      const double viol = std::max(
          {(pi_x.rowwise().sum() - mu).cwiseAbs().maxCoeff(),
           (pi_x.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff(),
           (pi_y.rowwise().sum() - mu).cwiseAbs().maxCoeff(),
           mean_resid.cwiseAbs().maxCoeff()});
      if (viol <= stop.tol) sol.converged = true;
    }
    if (sol.converged) break;
  }

  sol.pi_x = std::move(pi_x);
  sol.pi_y = std::move(pi_y);
  sol.means.resize(M);
  for (Eigen::Index i = 0; i < M; ++i)
    sol.means(i) = sol.pi_x.row(i).dot(x) / mu(i);
  sol.weak_cost = weak_cost(sol.pi_x, mu, x, cost_fn);
  return sol;
}

WeakProblem refine_aux_grid(
    const WeakProblem& problem, int factor,
    const std::function<double(double, double)>& cost_fn) {
  if (factor < 2) throw InvalidInputError("refine_aux_grid: factor < 2");
  const Vector& y = problem.y;
  const Eigen::Index N = y.size();
  const Eigen::Index N_new = (N - 1) * factor + 1;
  Vector y_new(N_new);
  Eigen::Index at = 0;
  for (Eigen::Index k = 0; k + 1 < N; ++k)
    for (int s = 0; s < factor; ++s)
      y_new(at++) = y(k) + (y(k + 1) - y(k)) * double(s) / factor;
  y_new(at) = y(N - 1);

  WeakProblem out = problem;
  out.y = y_new;
  const Vector& x = *problem.mu.coords;
  out.cost.resize(x.size(), N_new);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index k = 0; k < N_new; ++k)
      out.cost(i, k) = cost_fn(x(i), y_new(k));
  return out;
}

WeakProblem build_weak_curtain_fixture(int M, double epsilon) {
  MartingaleProblem mart = build_curtain_fixture(M);
  WeakProblem prob;
  prob.mu = mart.mu;
  prob.nu = mart.nu;
  prob.y = *prob.mu.coords;
  const Vector& x = *prob.mu.coords;
  prob.cost.resize(M, M);
  for (int i = 0; i < M; ++i)
    for (int k = 0; k < M; ++k)
      prob.cost(i, k) = quadratic_cost(x(i), prob.y(k));
  prob.epsilon = epsilon;
  return prob;
}

}  // namespace klproj
