#include "klproj/projection_oracle.hpp"

#include <cmath>

namespace klproj {

namespace {

constexpr double kRankTol = 1e-10;

Vector primal_point(const Vector& q, const Matrix& A, const Vector& lambda) {
  Vector expo = A.transpose() * lambda;
  Vector p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i)
    p(i) = q(i) * std::exp(std::min(expo(i), 700.0));
  return p;
}

double dual_objective(const Vector& q, const Matrix& A, const Vector& b,
                      const Vector& lambda) {
  Vector expo = A.transpose() * lambda;
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    s += q(i) * std::exp(std::min(expo(i), 700.0));
  return s - b.dot(lambda);
}

}  // namespace

void deduplicate_rows(Matrix& A, Vector& b) {
  const Eigen::Index M = A.cols();
  std::vector<Vector> echelon;      // reduced augmented rows [A | b]
  std::vector<Eigen::Index> pivots; // pivot column per echelon row
  std::vector<Eigen::Index> keep;

  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    Vector row(M + 1);
    row.head(M) = A.row(r).transpose();
    row(M) = b(r);
    for (size_t e = 0; e < echelon.size(); ++e)
      row -= row(pivots[e]) * echelon[e];
    Eigen::Index piv = -1;
    double best = kRankTol;
    for (Eigen::Index j = 0; j < M; ++j)
      if (std::abs(row(j)) > best) {
        best = std::abs(row(j));
        piv = j;
      }
    if (piv >= 0) {
      row /= row(piv);
      echelon.push_back(row);
      pivots.push_back(piv);
      keep.push_back(r);
    } else if (std::abs(row(M)) > 1e-8) {
      throw InfeasibleError("deduplicate_rows: inconsistent dependent row");
    }
  }

  Matrix A_out(static_cast<Eigen::Index>(keep.size()), M);
  Vector b_out(static_cast<Eigen::Index>(keep.size()));
  for (size_t r = 0; r < keep.size(); ++r) {
    A_out.row(static_cast<Eigen::Index>(r)) = A.row(keep[r]);
    b_out(static_cast<Eigen::Index>(r)) = b(keep[r]);
  }
  A = std::move(A_out);
  b = std::move(b_out);
}

Vector project_affine(const Vector& q, const Matrix& A_in, const Vector& b_in,
                      double tol) {
  if (A_in.cols() != q.size())
    throw DimensionError("project_affine: A columns / q length mismatch");
  if ((q.array() <= 0.0).any())
    throw InvalidInputError("project_affine: q must be strictly positive");

  Matrix A = A_in;
  Vector b = b_in;
  deduplicate_rows(A, b);

  Vector lambda = Vector::Zero(A.rows());
  double f = dual_objective(q, A, b, lambda);
  const int max_newton = 300;
  for (int it = 0; it < max_newton; ++it) {
    Vector p = primal_point(q, A, lambda);
    Vector grad = A * p - b;
    if (grad.cwiseAbs().maxCoeff() <= tol) return p;
    Matrix H = A * p.asDiagonal() * A.transpose();
    // Tiny ridge keeps the factorization stable when p nearly vanishes on
    // some constraint's support.
    H.diagonal().array() += 1e-300 + 1e-14 * H.diagonal().maxCoeff();
    Vector d = H.ldlt().solve(-grad);
    const double res_norm = grad.cwiseAbs().maxCoeff();
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      const Vector lam_new = lambda + alpha * d;
      const double f_new = dual_objective(q, A, b, lam_new);
      // Near the optimum the dual improvement is of order residual^2 and
      // falls below floating-point resolution long before the residual
      // meets tol, so also accept steps that shrink the residual itself.
      const double res_new =
          (A * primal_point(q, A, lam_new) - b).cwiseAbs().maxCoeff();
      if (f_new < f - 1e-14 * std::abs(f) ||
          (f_new <= f + 1e-12 * std::abs(f) && res_new < 0.9 * res_norm)) {
        lambda = lam_new;
        f = f_new;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No descent left; accept only if the residual already meets a
      // slightly relaxed tolerance.
      Vector p_fin = primal_point(q, A, lambda);
      if ((A * p_fin - b).cwiseAbs().maxCoeff() <= 10 * tol) return p_fin;
      throw OracleFailure("project_affine: Newton stalled");
    }
  }
  Vector p = primal_point(q, A, lambda);
  if ((A * p - b).cwiseAbs().maxCoeff() <= 10 * tol) return p;
  throw OracleFailure("project_affine: Newton budget exhausted");
}

Vector project_intersection(const Vector& q,
                            const std::vector<AffineBlock>& blocks,
                            double tol) {
  if (blocks.empty())
    throw InvalidInputError("project_intersection: no blocks");
  Eigen::Index rows = 1;  // unit-sum row
  for (const AffineBlock& blk : blocks) rows += blk.A.rows();
  Matrix A(rows, q.size());
  Vector b(rows);
  Eigen::Index at = 0;
  for (const AffineBlock& blk : blocks) {
    A.middleRows(at, blk.A.rows()) = blk.A;
    b.segment(at, blk.b.size()) = blk.b;
    at += blk.A.rows();
  }
  A.row(at).setOnes();
  b(at) = 1.0;
  return project_affine(q, A, b, tol);
}

}  // namespace klproj
