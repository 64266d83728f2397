#pragma once

#include <random>

#include "klproj/affine_normalize.hpp"

namespace klproj::testutil {

inline Vector random_simplex_point(std::mt19937_64& rng, Eigen::Index n,
                                   double floor = 0.01) {
  std::uniform_real_distribution<double> uni(floor, 1.0);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = uni(rng);
  return p / p.sum();
}

inline Vector random_positive(std::mt19937_64& rng, Eigen::Index n,
                              double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = uni(rng);
  return p;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r,
                            Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Matrix A(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) A(i, j) = uni(rng);
  return A;
}

/// Random 0/1 mask row with at least one entry set and at least one clear.
inline Vector random_mask(std::mt19937_64& rng, Eigen::Index n) {
  std::bernoulli_distribution coin(0.5);
  Vector m = Vector::Zero(n);
  Eigen::Index on = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (coin(rng)) {
      m(i) = 1.0;
      ++on;
    }
  if (on == 0) m(static_cast<Eigen::Index>(rng() % n)) = 1.0;
  if (on == n) m(static_cast<Eigen::Index>(rng() % n)) = 0.0;
  return m;
}

/// A feasible mixed block system: right-hand sides generated from a hidden
/// interior simplex point, so the intersection is nonempty. At least one
/// GIS block is always present — its normalized form pins the unit-sum
/// constraint, which pure scaling blocks leave free.
inline std::vector<AffineBlock> random_feasible_blocks(std::mt19937_64& rng,
                                                       Eigen::Index n,
                                                       int max_rows_total) {
  const Vector witness = random_simplex_point(rng, n);
  std::vector<AffineBlock> blocks;
  int rows_left = max_rows_total;
  std::uniform_int_distribution<int> nblocks(1, 3);
  const int nb = nblocks(rng);
  for (int k = 0; k < nb && rows_left > 0; ++k) {
    const bool scaling = k > 0 && (rng() % 2 == 0);
    if (scaling) {
      Vector m = random_mask(rng, n);
      AffineBlock blk;
      blk.A = m.transpose();
      blk.b = Vector::Constant(1, m.dot(witness));
      blk.kind = BlockKind::ExplicitScaling;
      blocks.push_back(std::move(blk));
      --rows_left;
    } else {
      std::uniform_int_distribution<int> nrows(1, std::min(2, rows_left));
      const int r = nrows(rng);
      AffineBlock blk;
      blk.A = random_matrix(rng, r, n);
      blk.b = blk.A * witness;
      blk.kind = BlockKind::Gis;
      blocks.push_back(std::move(blk));
      rows_left -= r;
    }
  }
  return blocks;
}

}  // namespace klproj::testutil
