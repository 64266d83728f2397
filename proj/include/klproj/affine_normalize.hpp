#pragma once

#include <optional>
#include <vector>

#include "klproj/kl_core.hpp"

namespace klproj {

struct NormalizationParams {
  double xi = 0.0;        // shift applied to A and b
  double xi_prime = 1.0;  // scale applied after the shift
  bool appended_row = false;
};

struct NormalizedSystem {
  Matrix A;
  Vector b;
  NormalizationParams params;
};

enum class BlockKind { ExplicitScaling, Gis };

/// One constraint group A p = b, tagged by how the solver handles it.
struct AffineBlock {
  Matrix A;
  Vector b;
  BlockKind kind = BlockKind::Gis;
  std::optional<NormalizedSystem> normalized;
};

/// Rewrite (A, b) into the nonnegative, column-stochastic, unit-sum form
/// required for GIS convergence, keeping the affine set
/// {x in simplex : Ax = b} unchanged. The complementary row is skipped when
/// it would be identically zero.
NormalizedSystem normalize(const Matrix& A, const Vector& b);

/// Like normalize, but with deliberately oversized shift/scale:
/// xi <- xi - slack, xi' <- xi' * (1 + slack). Slows GIS down; used by the
/// block study to measure that effect.
NormalizedSystem normalize_with_margin(const Matrix& A, const Vector& b,
                                       double slack);

/// True iff every sample (assumed feasible for (A, b)) also satisfies
/// A2 x = b2 to 1e-12.
bool affine_set_equal_sample(const Matrix& A, const Vector& b,
                             const Matrix& A2, const Vector& b2,
                             const std::vector<Vector>& samples);

}  // namespace klproj
