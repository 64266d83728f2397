#include "klproj/gibbs_kernel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace klproj {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// One forward/backward plan pair per transform length. Plans are created
// once under the planner lock; fftw_execute_dft on caller-owned buffers is
// thread-safe.
struct FftPlan {
  int n = 0;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  explicit FftPlan(int length) : n(length) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n));
    fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
};

// Cache one plan pair per transform length; lookup is mutex-guarded,
// execution runs lock-free on caller buffers.
std::shared_ptr<FftPlan> plan_for(int n) {
  static std::mutex cache_mutex;
  static std::map<int, std::shared_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<FftPlan>(n);
  cache[n] = plan;
  return plan;
}

using CVec = std::vector<std::complex<double>>;

void fft_inplace(const FftPlan& plan, CVec& data, bool forward) {
  auto* raw = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(forward ? plan.fwd : plan.bwd, raw, raw);
}

CVec spectrum_of(const Vector& values, const FftPlan& plan) {
  CVec data(static_cast<size_t>(plan.n));
  for (int i = 0; i < plan.n; ++i)
    data[static_cast<size_t>(i)] = values(i);
  fft_inplace(plan, data, true);
  return data;
}

// Gaussian kernel tails produce long runs of subnormal products in the
// convolutions and rescue dots, and subnormal arithmetic runs ~100x slower
// than normal arithmetic on x86. Flush them to zero for the duration of a
// kernel application (per-thread, restored on exit); values below ~1e-308
// are orders of magnitude under the rescue floor and carry no information
// the iteration can use.
class ScopedFlushDenormals {
 public:
#if defined(__SSE2__)
  ScopedFlushDenormals() : saved_(_mm_getcsr()) {
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
  }
  ~ScopedFlushDenormals() { _mm_setcsr(saved_); }
 private:
  unsigned int saved_;
#endif
};

}  // namespace

bool is_equidistant(const Vector& grid) {
  if (grid.size() < 2) return true;
  const double h = (grid(grid.size() - 1) - grid(0)) / double(grid.size() - 1);
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (std::abs((grid(i) - grid(i - 1)) - h) > 1e-12) return false;
  return h > 0.0;
}

Vector torus_first_row_sq(const Vector& grid) {
  Vector t(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const double d = grid(0) - grid(j);
    t(j) = d * d;
  }
  return t;
}

Vector torus_geodesic_sq(const Vector& grid, double period) {
  Vector t(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    double d = std::abs(grid(0) - grid(j));
    d = std::min(d, period - d);
    t(j) = d * d;
  }
  return t;
}

GibbsKernel build_dense(const Matrix& cost, double epsilon) {
  if (epsilon <= 0.0) throw InvalidInputError("build_dense: epsilon <= 0");
  GibbsKernel k;
  k.variant_ = KernelVariant::Dense;
  k.epsilon_ = epsilon;
  k.rows_ = cost.rows();
  k.cols_ = cost.cols();
  k.dense_ = (-cost / epsilon).array().exp();
  return k;
}

GibbsKernel build_toeplitz_fft(const Vector& grid, double epsilon) {
  if (epsilon <= 0.0)
    throw InvalidInputError("build_toeplitz_fft: epsilon <= 0");
  if (!is_equidistant(grid))
    throw InvalidInputError("build_toeplitz_fft: grid not equidistant");
  const Eigen::Index M = grid.size();
  GibbsKernel k;
  k.variant_ = KernelVariant::ToeplitzFFT;
  k.epsilon_ = epsilon;
  k.rows_ = k.cols_ = M;

  // s = (0, d_2, ..., d_M, 0, d_M, ..., d_2), d_j = |x_1 - x_j|^2
  Vector s(2 * M);
  s(0) = 0.0;
  for (Eigen::Index j = 1; j < M; ++j) {
    const double d = grid(0) - grid(j);
    s(j) = d * d;
  }
  s(M) = 0.0;
  for (Eigen::Index j = 1; j < M; ++j) s(2 * M - j) = s(j);

  Vector kernel_vals = (-s / epsilon).array().exp();
  k.first_column_ = kernel_vals.head(M);
  auto plan = plan_for(static_cast<int>(2 * M));
  k.spectrum_ = spectrum_of(kernel_vals, *plan);
  k.spectrum_transpose_ = k.spectrum_;  // symmetric by construction
  return k;
}

GibbsKernel build_circulant_from_t(const Vector& t, double epsilon) {
  if (epsilon <= 0.0)
    throw InvalidInputError("build_circulant_fft: epsilon <= 0");
  const Eigen::Index M = t.size();
  GibbsKernel k;
  k.variant_ = KernelVariant::CirculantFFT;
  k.epsilon_ = epsilon;
  k.rows_ = k.cols_ = M;
  Vector c = (-t / epsilon).array().exp();
  k.first_column_ = c;
  Vector c_rev(M);
  for (Eigen::Index j = 0; j < M; ++j) c_rev(j) = c((M - j) % M);
  auto plan = plan_for(static_cast<int>(M));
  k.spectrum_ = spectrum_of(c, *plan);
  k.spectrum_transpose_ = spectrum_of(c_rev, *plan);
  return k;
}

GibbsKernel build_circulant_fft(const Vector& grid, double epsilon) {
  if (!is_equidistant(grid))
    throw InvalidInputError("build_circulant_fft: grid not equidistant");
  return build_circulant_from_t(torus_first_row_sq(grid), epsilon);
}

static Vector convolve(const CVec& spectrum, const Vector& a,
                       Eigen::Index pad_to, Eigen::Index take) {
  const int n = static_cast<int>(pad_to);
  auto plan_ptr = plan_for(n);
  const FftPlan& plan = *plan_ptr;
  CVec data(static_cast<size_t>(n), {0.0, 0.0});
  for (Eigen::Index i = 0; i < a.size(); ++i)
    data[static_cast<size_t>(i)] = a(i);
  fft_inplace(plan, data, true);
  for (int i = 0; i < n; ++i)
    data[static_cast<size_t>(i)] *= spectrum[static_cast<size_t>(i)];
  fft_inplace(plan, data, false);
  Vector out(take);
  for (Eigen::Index i = 0; i < take; ++i)
    out(i) = data[static_cast<size_t>(i)].real() / double(n);
  return out;
}

// The FFT convolution carries an absolute error of order
// machine-eps * max|a|. Entries of the exact product smaller than that floor
// come out as pure roundoff noise (possibly negative), which breaks
// Sinkhorn-type iterations with widely scaled inputs. Recompute those
// entries by direct summation against the generating kernel column; entries
// that survive the floor keep a relative error of at most eps/1e-6 ~ 2e-10.
template <typename RowDot>
static void rescue_small_entries(Vector& out, const Vector& a,
                                 RowDot exact_row) {
  const double floor = 1e-6 * a.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::abs(out(i)) < floor) out(i) = exact_row(i);
}

Vector GibbsKernel::apply(const Vector& a) const {
  if (a.size() != cols_) throw DimensionError("GibbsKernel::apply: length");
  ScopedFlushDenormals ftz;
  if (variant_ == KernelVariant::Dense) return dense_ * a;
  const Eigen::Index M = rows_;
  const Vector& c = first_column_;
  // crev(k) = c(M-1-k): contiguous segments of it give the reversed runs
  // below as plain dots, which Eigen vectorizes (reverse() views do not).
  Vector crev = c.reverse();
  if (variant_ == KernelVariant::ToeplitzFFT) {
    Vector out = convolve(spectrum_, a, 2 * M, M);
    // row i: c(|i-j|) -> reversed head up to i, then tail offsets 1..M-1-i
    rescue_small_entries(out, a, [&](Eigen::Index i) {
      double s = crev.segment(M - 1 - i, i + 1).dot(a.head(i + 1));
      if (i + 1 < M)
        s += c.segment(1, M - 1 - i).dot(a.segment(i + 1, M - 1 - i));
      return s;
    });
    return out;
  }
  Vector out = convolve(spectrum_, a, M, M);
  // row i of the circulant: c((i-j) mod M)
  rescue_small_entries(out, a, [&](Eigen::Index i) {
    double s = crev.segment(M - 1 - i, i + 1).dot(a.head(i + 1));
    if (i + 1 < M)
      s += crev.head(M - 1 - i).dot(a.segment(i + 1, M - 1 - i));
    return s;
  });
  return out;
}

Vector GibbsKernel::apply_transpose(const Vector& a) const {
  if (a.size() != rows_)
    throw DimensionError("GibbsKernel::apply_transpose: length");
  ScopedFlushDenormals ftz;
  if (variant_ == KernelVariant::Dense) return dense_.transpose() * a;
  const Eigen::Index M = rows_;
  const Vector& c = first_column_;
  if (variant_ == KernelVariant::ToeplitzFFT) {
    Vector out = convolve(spectrum_transpose_, a, 2 * M, M);
    rescue_small_entries(out, a, [&](Eigen::Index i) {
      double s = c.head(i + 1).reverse().dot(a.head(i + 1));
      if (i + 1 < M)
        s += c.segment(1, M - 1 - i).dot(a.segment(i + 1, M - 1 - i));
      return s;
    });
    return out;
  }
  Vector out = convolve(spectrum_transpose_, a, M, M);
  // column i of the circulant read as a row: c((j-i) mod M)
  rescue_small_entries(out, a, [&](Eigen::Index i) {
    double s = c.head(M - i).dot(a.segment(i, M - i));
    if (i > 0) s += c.segment(M - i, i).dot(a.head(i));
    return s;
  });
  return out;
}

Matrix GibbsKernel::to_dense() const {
  if (variant_ == KernelVariant::Dense) return dense_;
  const Eigen::Index M = rows_;
  Matrix K(M, M);
  if (variant_ == KernelVariant::CirculantFFT) {
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        K(i, j) = first_column_(((i - j) % M + M) % M);
  } else {
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        K(i, j) = first_column_(std::abs(i - j));
  }
  return K;
}

const Matrix& GibbsKernel::dense_entries() const {
  if (variant_ != KernelVariant::Dense)
    throw InvalidInputError("dense_entries: kernel is not dense");
  return dense_;
}

}  // namespace klproj
