#include "klproj/martingale_ot.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "klproj/moment_ot.hpp"  // gaussian_weights

namespace klproj {

ConvexOrderCert check_convex_order(const Histogram& mu, const Histogram& nu) {
  if (!mu.coords || !nu.coords)
    throw InvalidInputError("check_convex_order: histograms need coords");
  if (mu.coords->size() != nu.coords->size() ||
      (*mu.coords - *nu.coords).cwiseAbs().maxCoeff() > 0.0)
    throw InvalidInputError("check_convex_order: common grid required");
  const double mass_mu = mu.total_mass(), mass_nu = nu.total_mass();
  if (std::abs(mass_mu - mass_nu) > 1e-10)
    throw InvalidInputError("check_convex_order: unequal total masses");

  const Vector& x = *mu.coords;
  const Vector& wm = mu.weights;
  const Vector& wn = nu.weights;
  const Eigen::Index M = x.size();

  // Quantile functions are piecewise constant; the running integral of their
  // difference is piecewise linear, so evaluating at the merged cumulative
  // breakpoints is exact.
  ConvexOrderCert cert;
  Eigen::Index im = 0, in = 0;
  while (im < M && wm(im) == 0.0) ++im;
  while (in < M && wn(in) == 0.0) ++in;
  double cm = (im < M) ? wm(im) : mass_mu;  // cumulative mass up to atom end
  double cn = (in < M) ? wn(in) : mass_nu;
  double y = 0.0, integral = 0.0;
  cert.min_value = 0.0;
  while (im < M && in < M) {
    const double level = std::min(std::min(cm, cn), mass_mu);
    integral += (x(im) - x(in)) * (level - y);
    y = level;
    cert.breakpoints.push_back(y / mass_mu);
    cert.integral.push_back(integral);
    cert.min_value = std::min(cert.min_value, integral);
    if (level >= mass_mu - 1e-15) break;
    if (cm <= level + 1e-18) {
      do {
        ++im;
      } while (im < M && wm(im) == 0.0);
      if (im < M) cm += wm(im);
    }
    if (cn <= level + 1e-18) {
      do {
        ++in;
      } while (in < M && wn(in) == 0.0);
      if (in < M) cn += wn(in);
    }
  }
  cert.endpoint = integral;
  return cert;
}

ShiftedMixtureResult shifted_mixture(const Histogram& mu, double s, double t) {
  if (!mu.coords) throw InvalidInputError("shifted_mixture: coords required");
  if (s < 0.0 || t < 0.0)
    throw InvalidInputError("shifted_mixture: shifts must be nonnegative");
  const Vector& x = *mu.coords;
  const Eigen::Index M = x.size();
  if (M < 2) throw InvalidInputError("shifted_mixture: grid too small");
  const double h = x(1) - x(0);
  const double ks_real = s / h, kt_real = t / h;
  const long ks = std::lround(ks_real), kt = std::lround(kt_real);
  if (std::abs(ks_real - double(ks)) > 1e-9 ||
      std::abs(kt_real - double(kt)) > 1e-9)
    throw InvalidInputError(
        "shifted_mixture: shifts must be integer multiples of the spacing");

  Vector w = Vector::Zero(M);
  bool truncated = false;
  for (Eigen::Index i = 0; i < M; ++i) {
    const Eigen::Index left = i - ks;   // (T_{-s})# mu
    const Eigen::Index right = i + kt;  // (T_t)# mu
    if (left >= 0)
      w(left) += 0.5 * mu.weights(i);
    else if (mu.weights(i) > 0.0)
      truncated = true;
    if (right < M)
      w(right) += 0.5 * mu.weights(i);
    else if (mu.weights(i) > 0.0)
      truncated = true;
  }
  const double total = w.sum();
  if (total <= 0.0)
    throw InfeasibleError("shifted_mixture: all mass truncated");
  w *= mu.total_mass() / total;
  return {Histogram(w, x), truncated};
}

Matrix martingale_constraint_matrix(const Vector& x) {
  const double xi = x.minCoeff();
  const double xi_prime = x.maxCoeff() - xi;
  if (xi_prime <= 0.0)
    throw InvalidInputError("martingale constraint: degenerate grid");
  Matrix A(2, x.size());
  A.row(0) = ((x.array() - xi) / xi_prime).matrix().transpose();
  A.row(1) = (1.0 - A.row(0).array()).matrix();
  return A;
}

Vector martingale_residual(const Matrix& pi, const Vector& x,
                           const Vector& mu) {
  return pi * x - mu.cwiseProduct(x);
}

namespace {

// pi <- pi (*) exp(A^T log(A / (A pi^T)))^T, rows handled simultaneously.
// Zero entries of A force exact zeros in the update (0^a = 0 for a > 0);
// 0/0 columns are already-satisfied degenerate constraints and contribute
// nothing.
void martingale_gis_update(Matrix& pi, const Matrix& A) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const Eigen::Index M = pi.rows();
  Matrix B = A * pi.transpose();  // 2 x M, column k = A pi_{k,:}^T
  Matrix L(2, M);
  for (Eigen::Index k = 0; k < M; ++k)
    for (int r = 0; r < 2; ++r) {
      const double a = A(r, k), bk = B(r, k);
      if (a == 0.0) {
        if (bk == 0.0) {
          L(r, k) = 0.0;
        } else {
          L(r, k) = neg_inf;
        }
      } else {
        if (bk <= 0.0)
          throw InfeasibleError(
              "martingale GIS: zero row mass under an active constraint");
        L(r, k) = std::log(a / bk);
      }
    }
  for (Eigen::Index k = 0; k < M; ++k)
    for (Eigen::Index j = 0; j < M; ++j) {
      double e = 0.0;
      for (int r = 0; r < 2; ++r) {
        const double a = A(r, j);
        if (a > 0.0) e += a * L(r, k);
      }
      pi(k, j) *= std::exp(e);
    }
}

}  // namespace

MartingaleSolution solve(const MartingaleProblem& problem,
                         const StopRule& stop) {
  const Histogram& mu = problem.mu;
  const Histogram& nu = problem.nu;
  if (!mu.coords) throw InvalidInputError("martingale solve: coords required");
  if ((mu.weights.array() <= 0.0).any())
    throw InvalidInputError("martingale solve: mu must be strictly positive");
  if (!problem.skip_convex_order_check) {
    ConvexOrderCert cert = check_convex_order(mu, nu);
    if (!cert.holds(1e-10))
      throw InfeasibleError(
          "martingale solve: mu, nu not in convex order (min integral " +
          std::to_string(cert.min_value) + ", endpoint " +
          std::to_string(cert.endpoint) + ")");
  }

  const Vector& x = *mu.coords;
  const Eigen::Index M = x.size();
  Matrix A = martingale_constraint_matrix(x);
  Matrix pi = problem.kernel.to_dense();

  MartingaleSolution sol;
  MartingaleTrace& trace = sol.trace;
  for (int it = 0; it < stop.max_cycles; ++it) {
    Vector col = pi.colwise().sum();
    for (Eigen::Index j = 0; j < M; ++j) {
      if (col(j) <= 0.0)
        throw InfeasibleError("martingale solve: empty column");
      pi.col(j) *= nu.weights(j) / col(j);
    }
    martingale_gis_update(pi, A);
    Vector row = pi.rowwise().sum();
    for (Eigen::Index i = 0; i < M; ++i) {
      if (row(i) <= 0.0)
        throw InfeasibleError("martingale solve: empty row");
      pi.row(i) *= mu.weights(i) / row(i);
    }

    const double rv = (pi.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff();
    const double cv =
        (pi.colwise().sum().transpose() - nu.weights).cwiseAbs().maxCoeff();
    const double mv =
        martingale_residual(pi, x, mu.weights).cwiseAbs().maxCoeff();
    trace.row_violation.push_back(rv);
    trace.col_violation.push_back(cv);
    trace.martingale_violation.push_back(mv);
    trace.iterations = it + 1;
    if (std::max(std::max(rv, cv), mv) <= stop.tol) {
      trace.converged = true;
      break;
    }
  }
  sol.plan = CouplingPlan(std::move(pi));
  return sol;
}

std::vector<int> row_support_clusters(const Matrix& pi, double threshold_rel) {
  std::vector<int> clusters(static_cast<size_t>(pi.rows()), 0);
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    const double thresh = threshold_rel * pi.row(i).maxCoeff();
    bool inside = false;
    int count = 0;
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      const bool on = pi(i, j) >= thresh && pi(i, j) > 0.0;
      if (on && !inside) ++count;
      inside = on;
    }
    clusters[static_cast<size_t>(i)] = count;
  }
  return clusters;
}

MartingaleProblem build_curtain_fixture(int M, double epsilon,
                                        int shift_cells) {
  Vector grid = Vector::LinSpaced(M, -1.0, 1.0);
  Histogram mu(gaussian_weights(grid, 0.0, 0.2), grid);
  const double h = grid(1) - grid(0);
  ShiftedMixtureResult mix =
      shifted_mixture(mu, shift_cells * h, shift_cells * h);
  Matrix cost(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) cost(i, j) = std::exp(grid(j) - grid(i));
  MartingaleProblem prob;
  prob.mu = std::move(mu);
  prob.nu = std::move(mix.nu);
  prob.kernel = build_dense(cost, epsilon);
  return prob;
}

std::string plan_csv(const Matrix& pi) {
  std::ostringstream os;
  os.precision(15);
  os << "i,j,mass\n";
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    for (Eigen::Index j = 0; j < pi.cols(); ++j)
      if (pi(i, j) != 0.0) os << i << ',' << j << ',' << pi(i, j) << '\n';
  return os.str();
}

}  // namespace klproj
