#include "klproj/moment_ot.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace klproj {

namespace {

Vector normalized_gis_update(const Vector& v, const NormalizedSystem& ns,
                             const Vector& w) {
  // v <- v (*) exp(A'^T log(b' / A'w)), w = v (*) K^T u
  Vector Aw = ns.A * w;
  Vector log_ratio(ns.b.size());
  for (Eigen::Index i = 0; i < ns.b.size(); ++i) {
    if (Aw(i) <= 0.0) {
      if (ns.b(i) > 0.0)
        throw InfeasibleError("solve_dual: (A'w)_i = 0 with b'_i > 0");
      log_ratio(i) = 0.0;
    } else if (ns.b(i) == 0.0) {
      log_ratio(i) = -745.0;
    } else {
      log_ratio(i) = std::log(ns.b(i) / Aw(i));
    }
  }
  return v.array() * (ns.A.transpose() * log_ratio).array().exp();
}

}  // namespace

MomentSolution solve_dual(const MomentProblem& problem, const StopRule& stop) {
  const Vector& mu = problem.mu.weights;
  const Eigen::Index M = mu.size();
  if (problem.kernel.rows() != M)
    throw DimensionError("solve_dual: kernel / mu size mismatch");
  if ((mu.array() < 0.0).any())
    throw InvalidInputError("solve_dual: mu must be nonnegative");

  NormalizedSystem ns = normalize(problem.A, problem.b);

  Vector u = Vector::Ones(M), v = Vector::Ones(problem.kernel.cols());
  MomentSolution sol;
  MomentTrace& trace = sol.trace;
  Vector Kv = problem.kernel.apply(v);
  for (int it = 0; it < stop.max_cycles; ++it) {
    for (Eigen::Index i = 0; i < M; ++i) {
      if (mu(i) == 0.0) {
        u(i) = 0.0;  // dropped row: no mass to place
        continue;
      }
      if (Kv(i) <= 0.0)
        throw InfeasibleError("solve_dual: underflow in Kv; increase epsilon");
      u(i) = mu(i) / Kv(i);
    }
    Vector Ktu = problem.kernel.apply_transpose(u);
    Vector w = v.array() * Ktu.array();
    v = normalized_gis_update(v, ns, w);

    Vector nu = v.array() * Ktu.array();
    const double cviol = (problem.A * nu - problem.b).cwiseAbs().maxCoeff();
    Kv = problem.kernel.apply(v);
    Vector row = u.array() * Kv.array();
    const double mviol = (row - mu).cwiseAbs().maxCoeff();
    trace.constraint_violation.push_back(cviol);
    trace.marginal_violation.push_back(mviol);
    trace.iterations = it + 1;
    if (cviol <= stop.tol && mviol <= stop.tol) {
      trace.converged = true;
      break;
    }
  }
  Vector nu = v.array() * problem.kernel.apply_transpose(u).array();
  sol.nu = Histogram(nu);
  sol.scalings = {std::move(u), std::move(v)};
  return sol;
}

CouplingPlan reconstruct_plan(const DualScalings& scalings,
                              const GibbsKernel& kernel,
                              Eigen::Index max_dense_M) {
  if (kernel.variant() != KernelVariant::Dense &&
      kernel.rows() > max_dense_M)
    throw InvalidInputError(
        "reconstruct_plan: implicit kernel too large to materialize");
  Matrix K = kernel.to_dense();
  return CouplingPlan(scalings.u.asDiagonal() * K * scalings.v.asDiagonal());
}

Vector gaussian_weights(const Vector& grid, double mean, double sigma) {
  Vector w(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double z = (grid(i) - mean) / sigma;
    w(i) = std::exp(-0.5 * z * z);
  }
  return w / w.sum();
}

MomentProblem build_interval_experiment(int M, double epsilon, bool use_fft) {
  MomentProblem prob;
  prob.grid = Vector::LinSpaced(M, 0.0, 1.0);
  prob.mu = Histogram(gaussian_weights(prob.grid, 0.4, 0.1), prob.grid);
  if (use_fft) {
    prob.kernel = build_toeplitz_fft(prob.grid, epsilon);
  } else {
    Matrix cost(M, M);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        const double d = prob.grid(i) - prob.grid(j);
        cost(i, j) = d * d;
      }
    prob.kernel = build_dense(cost, epsilon);
  }
  prob.A.resize(2, M);
  prob.A.row(0) = prob.grid.transpose();
  prob.A.row(1) = prob.grid.array().square().matrix().transpose();
  prob.b.resize(2);
  prob.b << 0.5, 0.5 * 0.5 + 0.15 * 0.15;
  return prob;
}

MomentProblem build_torus_experiment(int M, double epsilon, bool use_fft) {
  const double pi = std::numbers::pi;
  MomentProblem prob;
  prob.grid.resize(M);
  for (int i = 0; i < M; ++i) prob.grid(i) = -pi + 2.0 * pi * i / M;

  const double gamma = -1.0;
  const double kappa = 1.0 / ((0.2 * pi) * (0.2 * pi));
  Vector w(M);
  for (int i = 0; i < M; ++i)
    w(i) = std::exp(kappa * std::cos(prob.grid(i) - gamma));
  w /= w.sum();
  prob.mu = Histogram(w, prob.grid);

  // circular mean of mu, rotated by a quarter circle
  double zr = 0.0, zi = 0.0;
  for (int i = 0; i < M; ++i) {
    zr += w(i) * std::cos(prob.grid(i));
    zi += w(i) * std::sin(prob.grid(i));
  }
  const double zr_rot = -zi, zi_rot = zr;  // multiply by e^{i pi/2}

  // The fixture needs the true torus geometry (wrap-around distances);
  // a kernel built from raw first-row distances cannot move mass across
  // the -pi/pi seam and produces spurious extra modes.
  GibbsKernel circ =
      build_circulant_from_t(torus_geodesic_sq(prob.grid, 2.0 * pi), epsilon);
  prob.kernel = use_fft ? circ : build_dense(
      -epsilon * circ.to_dense().array().log().matrix(), epsilon);

  prob.A.resize(2, M);
  for (int i = 0; i < M; ++i) {
    prob.A(0, i) = std::cos(prob.grid(i));
    prob.A(1, i) = std::sin(prob.grid(i));
  }
  prob.b.resize(2);
  prob.b << zr_rot, zi_rot;
  return prob;
}

int cyclic_local_maxima(const Vector& v) {
  const Eigen::Index M = v.size();
  int count = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    const double prev = v((i - 1 + M) % M);
    const double next = v((i + 1) % M);
    if (v(i) > prev && v(i) > next) ++count;
  }
  return count;
}

std::string moment_result_json(const MomentProblem& problem,
                               const MomentSolution& sol) {
  std::ostringstream os;
  os.precision(15);
  Vector resid = problem.A * sol.nu.weights - problem.b;
  os << "{\n  \"iterations\": " << sol.trace.iterations
     << ",\n  \"converged\": " << (sol.trace.converged ? "true" : "false")
     << ",\n  \"constraint_residual\": [";
  for (Eigen::Index i = 0; i < resid.size(); ++i)
    os << (i ? ", " : "") << resid(i);
  os << "],\n  \"grid\": [";
  for (Eigen::Index i = 0; i < problem.grid.size(); ++i)
    os << (i ? ", " : "") << problem.grid(i);
  os << "],\n  \"mu\": [";
  for (Eigen::Index i = 0; i < problem.mu.weights.size(); ++i)
    os << (i ? ", " : "") << problem.mu.weights(i);
  os << "],\n  \"nu\": [";
  for (Eigen::Index i = 0; i < sol.nu.weights.size(); ++i)
    os << (i ? ", " : "") << sol.nu.weights(i);
  os << "]\n}\n";
  return os.str();
}

std::string moment_result_csv(const MomentProblem& problem,
                              const MomentSolution& sol) {
  std::ostringstream os;
  os.precision(15);
  os << "i,x,mu,nu\n";
  for (Eigen::Index i = 0; i < problem.grid.size(); ++i)
    os << i << ',' << problem.grid(i) << ',' << problem.mu.weights(i) << ','
       << sol.nu.weights(i) << '\n';
  return os.str();
}

}  // namespace klproj
