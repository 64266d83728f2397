#pragma once

#include <string>
#include <vector>

#include "klproj/gis_solver.hpp"

namespace klproj {

/// Mass-lifted unbalanced OT problem. mu and nu are already expressed in
/// units of s (i.e. divided by s); mass levels run over k = 1..K_max and
/// l = 1..L_max.
struct LiftedProblem {
  Histogram mu, nu;
  double s = 1.0;
  int K_max = 0, L_max = 0;  // 0 means ceil of the respective total mass
  // Flat 4-index cost c[i][k][j][l]; see ConicCoupling::index for layout.
  std::vector<double> cost;
  double epsilon = 0.05;
  // Dense-array safety cap on M * K * M * L.
  Eigen::Index max_cells = 1000000;
};

/// Nonnegative 4-index coupling over (location i, level k, location j,
/// level l), stored flat with l fastest. The two location sets may differ
/// in size (M source sites, N target sites).
struct ConicCoupling {
  Vector pi;
  Eigen::Index M = 0, N = 0;
  int K = 0, L = 0;

  Eigen::Index cells() const {
    return M * static_cast<Eigen::Index>(K) * N * static_cast<Eigen::Index>(L);
  }
  // k and l are 1-based mass levels.
  Eigen::Index index(Eigen::Index i, int k, Eigen::Index j, int l) const {
    return ((i * K + (k - 1)) * N + j) * L + (l - 1);
  }
  double operator()(Eigen::Index i, int k, Eigen::Index j, int l) const {
    return pi(index(i, k, j, l));
  }
};

struct ConicResiduals {
  Vector mu_resid;  // sum_{jkl} k pi_{ikjl} - mu_i
  Vector nu_resid;  // sum_{ikl} l pi_{ikjl} - nu_j
  double mass_resid = 0.0;  // sum pi - 1
};

/// pi_{ikjl} = (mu_i/||mu||_1) d(||mu||_1, k) (nu_j/||nu||_1) d(||nu||_1, l).
/// Both total masses must land on integer mass levels within 1e-9.
ConicCoupling feasible_init(const Histogram& mu, const Histogram& nu,
                            int K_max = 0, int L_max = 0);

ConicResiduals conic_residuals(const ConicCoupling& pi, const Vector& mu,
                               const Vector& nu);

/// Largest s <= the smallest positive mass such that both total masses are
/// integer multiples of s within 1e-9.
double suggest_unit(double mass_mu, double mass_nu);

/// The stacked raw constraint system: M k-weighted rows, N l-weighted rows
/// and the unit-mass row, over the flat coupling vector.
void conic_constraint_system(Eigen::Index M, Eigen::Index N, int K, int L,
                             const Vector& mu, const Vector& nu, Matrix& A,
                             Vector& b);

struct ConicSolution {
  ConicCoupling coupling;
  ConvergenceTrace trace;
};

/// Entropic solve: KL projection of exp(-cost/epsilon) onto the conic
/// constraints, run through the mixed GIS solver. With split_blocks the two
/// marginal families become separate GIS blocks instead of one stack.
ConicSolution solve(const LiftedProblem& problem, const StopRule& stop,
                    bool split_blocks = false);

/// Default fixture cost c[i][k][j][l] = k * dist(x_i, y_j)^2 + lambda |k - l|.
std::vector<double> default_conic_cost(const Vector& grid_x,
                                       const Vector& grid_y, int K, int L,
                                       double lambda);

/// CSV dump (i,k,j,l,mass) of nonzero coupling entries.
std::string coupling_csv(const ConicCoupling& pi);

/// Parse a problem from JSON: keys mu, nu, s, K, L, epsilon and either
/// cost (flat array, l fastest) or cost_spec {grid, lambda}.
LiftedProblem lifted_problem_from_json(const std::string& text);

}  // namespace klproj
