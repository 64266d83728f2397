#pragma once

#include <Eigen/Dense>
#include <optional>

#include "klproj/errors.hpp"

namespace klproj {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A nonnegative weight vector, optionally attached to grid positions.
struct Histogram {
  Vector weights;
  std::optional<Vector> coords;

  Histogram() = default;
  explicit Histogram(Vector w) : weights(std::move(w)) { validate(); }
  Histogram(Vector w, Vector c) : weights(std::move(w)), coords(std::move(c)) {
    validate();
  }

  Eigen::Index size() const { return weights.size(); }
  double total_mass() const { return weights.sum(); }
  double mean() const;

 private:
  void validate() const;
};

/// Dense nonnegative M x N transport plan.
struct CouplingPlan {
  Matrix entries;

  CouplingPlan() = default;
  explicit CouplingPlan(Matrix m) : entries(std::move(m)) {
    if ((entries.array() < 0.0).any())
      throw InvalidInputError("CouplingPlan: negative entry");
  }

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

/// Extended-value KL divergence sum_i p_i log(p_i/q_i) - p_i + q_i.
/// Returns +inf when p is not absolutely continuous w.r.t. q or p has a
/// negative entry. 0 log 0 = 0.
double kl_divergence(const Vector& p, const Vector& q);

/// -sum_ij pi_ij (log pi_ij - 1), with 0 log 0 = 0.
double entropy(const CouplingPlan& pi);

/// Closed-form KL projection onto {p : mask^T p = b} for a zero/one mask:
/// masked entries are rescaled by b / (mask^T p), the rest stay untouched.
Vector scaling_projection(const Vector& p, const Vector& mask, double b);

Vector marginal_row(const CouplingPlan& pi);
Vector marginal_col(const CouplingPlan& pi);

}  // namespace klproj
