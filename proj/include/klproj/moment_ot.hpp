#pragma once

#include <string>

#include "klproj/gibbs_kernel.hpp"
#include "klproj/gis_solver.hpp"

namespace klproj {

/// min over nu in C(A, b) of entropic OT(mu, nu), in dual scaling form.
struct MomentProblem {
  Histogram mu;          // strictly positive, sums to one
  Matrix A;              // raw moment system
  Vector b;
  GibbsKernel kernel;
  Vector grid;           // support positions
};

struct DualScalings {
  Vector u;
  Vector v;
};

struct MomentTrace {
  std::vector<double> constraint_violation;  // ||A nu - b||_inf, raw system
  std::vector<double> marginal_violation;    // ||u (*) Kv - mu||_inf
  int iterations = 0;
  bool converged = false;
};

struct MomentSolution {
  Histogram nu;
  DualScalings scalings;
  MomentTrace trace;
};

/// Alternates u <- mu/(Kv) with the GIS update of v on the normalized moment
/// system; never materializes the plan.
MomentSolution solve_dual(const MomentProblem& problem, const StopRule& stop);

/// diag(u) K diag(v). Refuses for implicit kernels above max_dense_M.
CouplingPlan reconstruct_plan(const DualScalings& scalings,
                              const GibbsKernel& kernel,
                              Eigen::Index max_dense_M = 2000);

/// Unit-interval fixture: M = 100 grid on [0, 1], mu from the N(0.4, 0.1^2)
/// density, squared distance cost, eps = 0.01, constraints on mean 0.5 and
/// second moment 0.5^2 + 0.15^2.
MomentProblem build_interval_experiment(int M = 100, double epsilon = 0.01,
                                        bool use_fft = false);

/// Torus fixture: M = 500 equidistant grid on [-pi, pi), mu from the
/// von Mises density M(-1, 1/(0.2 pi)^2), circular mean constrained to the
/// quarter-circle rotation of mu's circular mean. The kernel uses squared
/// geodesic distances on the torus (circumference 2 pi).
MomentProblem build_torus_experiment(int M = 500, double epsilon = 0.01,
                                     bool use_fft = true);

/// Gaussian density evaluated on a grid and normalized to sum to one.
Vector gaussian_weights(const Vector& grid, double mean, double sigma);

/// Count strict local maxima of a vector read cyclically.
int cyclic_local_maxima(const Vector& v);

/// JSON dump of a solved fixture (grid, mu, nu, residuals, iterations).
std::string moment_result_json(const MomentProblem& problem,
                               const MomentSolution& sol);

/// CSV dump: index, grid, mu, nu.
std::string moment_result_csv(const MomentProblem& problem,
                              const MomentSolution& sol);

}  // namespace klproj
