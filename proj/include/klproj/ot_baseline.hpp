#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klproj/gibbs_kernel.hpp"
#include "klproj/gis_solver.hpp"

namespace klproj {

struct SinkhornResult {
  CouplingPlan plan;
  int iterations = 0;  // full cycles
  bool converged = false;
  std::vector<double> violations;  // marginal sup-norm per cycle
};

/// Classical Sinkhorn: alternating row/column scalings of the Gibbs kernel
/// until both marginals match within stop.tol (sup-norm).
SinkhornResult sinkhorn(const Vector& mu, const Vector& nu,
                        const GibbsKernel& kernel, const StopRule& stop);

/// Stacked-GIS variant: the simultaneous multiplicative update
/// pi <- pi (*) (row_factor * col_factor)^exponent on the simplex. The
/// stacked marginal system corresponds to exponent 1/2; exponent 1
/// oscillates without converging and is rejected.
SinkhornResult stacked_gis_sinkhorn(const Vector& mu, const Vector& nu,
                                    const GibbsKernel& kernel, double exponent,
                                    const StopRule& stop);

struct BlockStudyCell {
  double epsilon = 0.0;
  int M = 0;
  double tol = 0.0;
  double mean_sinkhorn_iters = 0.0;
  double mean_stacked_half_iters = 0.0;
  double mean_stacked_099_iters = 0.0;
  double ratio_half_vs_sinkhorn = 0.0;
  double ratio_half_vs_099 = 0.0;
};

struct BlockStudyReport {
  std::vector<BlockStudyCell> cells;
  uint64_t seed = 0;
  int trials = 0;
  // Instance family: mu, nu uniform-positive renormalized, squared-distance
  // cost on an equidistant unit grid.
  std::string instance_family = "uniform-positive marginals, squared distance";

  std::string to_csv() const;
  std::string to_json() const;
};

/// Mean Sinkhorn / stacked-GIS iteration counts and their ratios over random
/// instances, per (epsilon, M, tol) grid cell.
BlockStudyReport block_study(const std::vector<double>& eps_grid,
                             const std::vector<int>& M_grid,
                             const std::vector<double>& tol_grid, int trials,
                             uint64_t seed = 20240901);

}  // namespace klproj
