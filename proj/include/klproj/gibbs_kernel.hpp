#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "klproj/kl_core.hpp"

namespace klproj {

enum class KernelVariant { Dense, ToeplitzFFT, CirculantFFT };

/// The Gibbs kernel K = exp(-c/eps), held either densely or implicitly via
/// precomputed FFT spectra for equidistant grids with translation-invariant
/// squared-distance cost. Immutable after construction; concurrent apply
/// calls are fine.
class GibbsKernel {
 public:
  GibbsKernel() = default;  // empty 0 x 0 kernel, to be assigned later

  KernelVariant variant() const { return variant_; }
  double epsilon() const { return epsilon_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  Vector apply(const Vector& a) const;            // K a
  Vector apply_transpose(const Vector& a) const;  // K^T a

  /// Materializes K densely (identity for the Dense variant).
  Matrix to_dense() const;

  const Matrix& dense_entries() const;

  friend GibbsKernel build_dense(const Matrix& cost, double epsilon);
  friend GibbsKernel build_toeplitz_fft(const Vector& grid, double epsilon);
  friend GibbsKernel build_circulant_fft(const Vector& grid, double epsilon);
  friend GibbsKernel build_circulant_from_t(const Vector& t, double epsilon);

 private:
  KernelVariant variant_ = KernelVariant::Dense;
  double epsilon_ = 1.0;
  Eigen::Index rows_ = 0, cols_ = 0;
  Matrix dense_;
  Vector first_column_;  // kernel values generating the implicit variants
  std::vector<std::complex<double>> spectrum_;            // L or L'
  std::vector<std::complex<double>> spectrum_transpose_;  // for K^T a
};

/// K_ij = exp(-c_ij / eps), dense.
GibbsKernel build_dense(const Matrix& cost, double epsilon);

/// Squared-distance kernel on an equidistant line grid, applied by
/// zero-padded FFT convolution of length 2M (Toeplitz embedding).
GibbsKernel build_toeplitz_fft(const Vector& grid, double epsilon);

/// Cyclic kernel on an equidistant torus grid, with the first-row squared
/// distances |x_1 - x_j|^2 taken literally as the t-vector.
GibbsKernel build_circulant_fft(const Vector& grid, double epsilon);

/// Cyclic kernel K_ij = exp(-t[(i-j) mod M]/eps) from a caller-supplied
/// first-column distance vector t (t[0] is the zero-offset cost).
GibbsKernel build_circulant_from_t(const Vector& t, double epsilon);

/// First-row squared distances |x_1 - x_j|^2 of an equidistant torus grid,
/// taken literally (no wrap-around metric).
Vector torus_first_row_sq(const Vector& grid);

/// Squared geodesic distances on the torus of circumference `period`.
Vector torus_geodesic_sq(const Vector& grid, double period);

/// Max deviation from equal spacing must be below 1e-12.
bool is_equidistant(const Vector& grid);

}  // namespace klproj
