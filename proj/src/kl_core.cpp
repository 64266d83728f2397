#include "klproj/kl_core.hpp"

#include <cmath>
#include <limits>

namespace klproj {

void Histogram::validate() const {
  if ((weights.array() < 0.0).any())
    throw InvalidInputError("Histogram: negative weight");
  if (coords) {
    if (coords->size() != weights.size())
      throw DimensionError("Histogram: coords/weights length mismatch");
    for (Eigen::Index i = 1; i < coords->size(); ++i)
      if ((*coords)(i) <= (*coords)(i - 1))
        throw InvalidInputError("Histogram: coords not strictly increasing");
  }
}

double Histogram::mean() const {
  if (!coords) throw InvalidInputError("Histogram: mean() requires coords");
  return coords->dot(weights) / weights.sum();
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.size() != q.size())
    throw DimensionError("kl_divergence: length mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i), qi = q(i);
    if (pi < 0.0 || qi < 0.0) return inf;
    if (pi == 0.0) {
      acc += qi;
      continue;
    }
    if (qi == 0.0) return inf;
    acc += pi * std::log(pi / qi) - pi + qi;
  }
  return acc;
}

double entropy(const CouplingPlan& pi) {
  double acc = 0.0;
  const auto& m = pi.entries;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (v > 0.0) acc -= v * (std::log(v) - 1.0);
    }
  return acc;
}

Vector scaling_projection(const Vector& p, const Vector& mask, double b) {
  if (p.size() != mask.size())
    throw DimensionError("scaling_projection: length mismatch");
  for (Eigen::Index j = 0; j < mask.size(); ++j)
    if (mask(j) != 0.0 && mask(j) != 1.0)
      throw InvalidInputError("scaling_projection: mask must be zero/one");
  const double masked_mass = mask.dot(p);
  if (masked_mass <= 0.0)
    throw InfeasibleError("scaling_projection: zero mass under the mask");
  const double factor = b / masked_mass;
  Vector out = p;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (mask(j) == 1.0) out(j) *= factor;
  return out;
}

Vector marginal_row(const CouplingPlan& pi) { return pi.entries.rowwise().sum(); }

Vector marginal_col(const CouplingPlan& pi) { return pi.entries.colwise().sum(); }

}  // namespace klproj
