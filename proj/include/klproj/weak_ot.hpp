#pragma once

#include <functional>
#include <string>

#include "klproj/gibbs_kernel.hpp"
#include "klproj/gis_solver.hpp"

namespace klproj {

struct WeakConstraints {
  Vector b;    // 2-vector, sums to two
  Matrix A_x;  // 2 x M, column-stochastic
  Matrix A_y;  // 2 x N, column-stochastic
  double xi_x = 0.0, xi_y = 0.0, xi_prime = 0.0;
};

/// Constraint matrices of the mean-consistency system linking pi_x and pi_y.
/// Requires conv(X) inside conv(Y).
WeakConstraints build_constraints(const Vector& x, const Vector& y);

enum class WeakStopKind { CostChange, ConstraintViolation };

struct WeakStopRule {
  WeakStopKind kind = WeakStopKind::CostChange;
  double tol = 1e-9;
  int max_cycles = 200000;
};

struct WeakProblem {
  Histogram mu, nu;   // on grid X
  Vector y;           // auxiliary grid Y
  Matrix cost;        // M x N, c(x_i, y_k)
  double epsilon = 1e-10;
  // Optional rescaling of all right-hand sides; iterates scale linearly
  // with it (mass_scale = 0.5 halves every entry).
  double mass_scale = 1.0;
};

struct WeakSolution {
  Matrix pi_x;  // M x M
  Matrix pi_y;  // M x N
  Vector means;
  double weak_cost = 0.0;
  std::vector<double> cost_trace;
  int iterations = 0;
  bool converged = false;
};

WeakSolution solve(const WeakProblem& problem, const WeakStopRule& stop,
                   const std::function<double(double, double)>& cost_fn);

/// sum_i mu_i c(x_i, m_i), m_i the conditional mean of row i of pi_x.
double weak_cost(const Matrix& pi_x, const Vector& mu, const Vector& x,
                 const std::function<double(double, double)>& cost_fn);

/// sum_ik pi_y_ik c_ik - sum_i mu_i c(x_i, m_i); nonnegative when the
/// relaxation is tight up to Jensen.
double jensen_gap(const Matrix& pi_y, const Matrix& pi_x, const Vector& mu,
                  const Vector& x, const Vector& y, const Matrix& cost,
                  const std::function<double(double, double)>& cost_fn);

/// Insert factor - 1 equispaced points into every cell of the auxiliary
/// grid.
WeakProblem refine_aux_grid(const WeakProblem& problem, int factor,
                            const std::function<double(double, double)>& cost_fn);

/// The weak-OT companion of the martingale curtain experiment: same
/// measures, Y = X, quadratic cost, eps = 1e-10.
WeakProblem build_weak_curtain_fixture(int M = 100, double epsilon = 1e-10);

double quadratic_cost(double a, double b);

}  // namespace klproj
