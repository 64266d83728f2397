#pragma once

#include <vector>

#include "klproj/affine_normalize.hpp"

namespace klproj {

// Reference KL projections via damped Newton on the dual. Test-only path;
// never used by the production solvers.

/// KL projection of q onto {p : Ap = b} (no implicit simplex constraint;
/// append a ones-row with b = 1 to pin the total mass).
Vector project_affine(const Vector& q, const Matrix& A, const Vector& b,
                      double tol = 1e-12);

/// KL projection of q onto the intersection of the blocks' affine sets
/// within the simplex: the blocks' raw systems are stacked together with the
/// unit-sum row, rank-reduced, and handed to project_affine.
Vector project_intersection(const Vector& q,
                            const std::vector<AffineBlock>& blocks,
                            double tol = 1e-12);

/// Drop rows that are linearly dependent on earlier ones
/// (pivoted elimination, threshold 1e-10). Checks that dropped rows are
/// consistent with the kept ones.
void deduplicate_rows(Matrix& A, Vector& b);

}  // namespace klproj
