#include "klproj/affine_normalize.hpp"

#include <algorithm>
#include <cmath>

namespace klproj {

namespace {

constexpr double kZeroRowTol = 1e-14;

NormalizedSystem normalize_impl(const Matrix& A, const Vector& b,
                                double slack) {
  if (A.rows() != b.size())
    throw DimensionError("normalize: A rows / b length mismatch");
  if (A.size() == 0 || A.isZero(0.0))
    throw InvalidInputError("normalize: A must be nonzero");

  NormalizationParams params;

  // Step 1: shift by the joint minimum so the smallest entry lands exactly
  // at zero. Normalized outputs therefore always contain a zero, which makes
  // re-normalization a no-op.
  double xi = std::min(A.minCoeff(), b.size() ? b.minCoeff() : 0.0);
  xi -= slack;
  params.xi = xi;
  Matrix A1 = A.array() - xi;
  Vector b1 = b.array() - xi;

  // Step 2: scale so that column sums and the b-sum are at most one.
  Vector colsum = A1.colwise().sum();
  double xi_prime = std::max(colsum.maxCoeff(), b1.sum());
  xi_prime *= (1.0 + slack);
  if (xi_prime <= 0.0) {
    // The shift annihilated every row (all rows were constant, e.g. the
    // all-ones mass row). Skip the scaling; the zero rows are removed below
    // and the complementary row restores the unit-sum constraint.
    xi_prime = 1.0;
  }
  params.xi_prime = xi_prime;
  Matrix A2 = A1 / xi_prime;
  Vector b2 = b1 / xi_prime;

  // Step 3: drop zero rows, then append the complementary row unless it is
  // identically zero.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < A2.rows(); ++i) {
    const bool row_zero = A2.row(i).cwiseAbs().maxCoeff() <= kZeroRowTol;
    if (row_zero && std::abs(b2(i)) > kZeroRowTol)
      throw InfeasibleError("normalize: zero row with nonzero right-hand side");
    if (!row_zero) keep.push_back(i);
  }
  Matrix A3(static_cast<Eigen::Index>(keep.size()), A2.cols());
  Vector b3(static_cast<Eigen::Index>(keep.size()));
  for (size_t r = 0; r < keep.size(); ++r) {
    A3.row(static_cast<Eigen::Index>(r)) = A2.row(keep[r]);
    b3(static_cast<Eigen::Index>(r)) = b2(keep[r]);
  }

  Vector comp_row = Vector::Ones(A3.cols()) - A3.colwise().sum().transpose();
  const double comp_b = 1.0 - b3.sum();
  const bool row_is_zero = comp_row.cwiseAbs().maxCoeff() <= kZeroRowTol;
  if (row_is_zero) {
    if (std::abs(comp_b) > 1e-10)
      throw InfeasibleError(
          "normalize: column-stochastic system with b-sum != 1");
  } else {
    A3.conservativeResize(A3.rows() + 1, Eigen::NoChange);
    A3.row(A3.rows() - 1) = comp_row.transpose();
    b3.conservativeResize(b3.size() + 1);
    b3(b3.size() - 1) = comp_b;
    params.appended_row = true;
  }

  return {std::move(A3), std::move(b3), params};
}

}  // namespace

NormalizedSystem normalize(const Matrix& A, const Vector& b) {
  return normalize_impl(A, b, 0.0);
}

NormalizedSystem normalize_with_margin(const Matrix& A, const Vector& b,
                                       double slack) {
  if (slack < 0.0) throw InvalidInputError("normalize_with_margin: slack < 0");
  return normalize_impl(A, b, slack);
}

bool affine_set_equal_sample(const Matrix& A, const Vector& b,
                             const Matrix& A2, const Vector& b2,
                             const std::vector<Vector>& samples) {
  (void)A;
  (void)b;
  for (const Vector& x : samples) {
    if ((A2 * x - b2).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  return true;
}

}  // namespace klproj
