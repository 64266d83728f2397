#pragma once

#include <string>
#include <vector>

#include "klproj/gibbs_kernel.hpp"
#include "klproj/gis_solver.hpp"

namespace klproj {

/// Certificate of the quantile characterization of convex order:
/// the running integral of F^-1_mu - F^-1_nu over (0, y], evaluated at every
/// cumulative-mass breakpoint. Order holds iff the minimum is >= -1e-12 and
/// the endpoint (the mean difference) vanishes.
struct ConvexOrderCert {
  std::vector<double> breakpoints;
  std::vector<double> integral;
  double min_value = 0.0;
  double endpoint = 0.0;

  bool holds(double tol = 1e-12) const {
    return min_value >= -tol && std::abs(endpoint) <= tol;
  }
};

ConvexOrderCert check_convex_order(const Histogram& mu, const Histogram& nu);

struct ShiftedMixtureResult {
  Histogram nu;
  bool truncated = false;  // mass fell off the grid boundary
};

/// nu = 1/2 ((T_{-s})# mu + (T_t)# mu) on mu's own grid; s and t must be
/// integer multiples of the grid spacing. Boundary mass is truncated and the
/// result renormalized.
ShiftedMixtureResult shifted_mixture(const Histogram& mu, double s, double t);

struct MartingaleProblem {
  Histogram mu, nu;  // common sorted grid
  GibbsKernel kernel;
  bool skip_convex_order_check = false;  // experimentation override
};

struct MartingaleTrace {
  std::vector<double> row_violation;
  std::vector<double> col_violation;
  std::vector<double> martingale_violation;  // || pi x - mu (*) x ||_inf
  int iterations = 0;
  bool converged = false;
};

struct MartingaleSolution {
  CouplingPlan plan;
  MartingaleTrace trace;
};

/// nu-scaling -> simultaneous row-wise martingale GIS update -> mu-scaling,
/// in the order that lets the diag(mu) factor cancel.
MartingaleSolution solve(const MartingaleProblem& problem,
                         const StopRule& stop);

/// pi x - mu (*) x.
Vector martingale_residual(const Matrix& pi, const Vector& x,
                           const Vector& mu);

/// The normalized 2 x M martingale constraint matrix
/// [(x - xi)/xi' ; 1 - (x - xi)/xi'] with xi = min x, xi' = max x - xi.
Matrix martingale_constraint_matrix(const Vector& x);

/// Number of contiguous runs of entries >= threshold_rel * max(row), per row.
std::vector<int> row_support_clusters(const Matrix& pi, double threshold_rel);

/// Curtain fixture of the martingale experiment: M = 100 uniform grid on
/// [-1, 1], mu from N(0, 0.2^2), nu the +/- 10-cell shifted mixture,
/// c(x, y) = exp(y - x), eps = 0.002.
MartingaleProblem build_curtain_fixture(int M = 100, double epsilon = 0.002,
                                        int shift_cells = 10);

/// CSV dump of plan entries (i, j, mass), skipping exact zeros.
std::string plan_csv(const Matrix& pi);

}  // namespace klproj
