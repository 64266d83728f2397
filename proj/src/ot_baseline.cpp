#include "klproj/ot_baseline.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace klproj {

namespace {

void check_marginal_inputs(const Vector& mu, const Vector& nu,
                           const GibbsKernel& kernel) {
  if (mu.size() != kernel.rows() || nu.size() != kernel.cols())
    throw DimensionError("sinkhorn: marginal / kernel size mismatch");
  if ((mu.array() <= 0.0).any() || (nu.array() <= 0.0).any())
    throw InvalidInputError("sinkhorn: marginals must be strictly positive");
}

}  // namespace

SinkhornResult sinkhorn(const Vector& mu, const Vector& nu,
                        const GibbsKernel& kernel, const StopRule& stop) {
  check_marginal_inputs(mu, nu, kernel);
  const Eigen::Index M = mu.size(), N = nu.size();
  Vector u = Vector::Ones(M), v = Vector::Ones(N);
  SinkhornResult res;
  for (int it = 0; it < stop.max_cycles; ++it) {
    Vector Kv = kernel.apply(v);
    if ((Kv.array() <= 0.0).any())
      throw InfeasibleError("sinkhorn: underflow in Kv; increase epsilon");
    u = mu.array() / Kv.array();
    Vector Ktu = kernel.apply_transpose(u);
    v = nu.array() / Ktu.array();
    // After the v-update the column marginal is exact; the row marginal
    // carries the remaining violation.
    Vector row = u.array() * kernel.apply(v).array();
    const double viol = (row - mu).cwiseAbs().maxCoeff();
    res.violations.push_back(viol);
    res.iterations = it + 1;
    if (viol <= stop.tol) {
      res.converged = true;
      break;
    }
  }
  Matrix K = kernel.to_dense();
  res.plan = CouplingPlan(u.asDiagonal() * K * v.asDiagonal());
  return res;
}

SinkhornResult stacked_gis_sinkhorn(const Vector& mu, const Vector& nu,
                                    const GibbsKernel& kernel, double exponent,
                                    const StopRule& stop) {
  check_marginal_inputs(mu, nu, kernel);
  if (!(exponent > 0.0 && exponent < 1.0))
    throw InvalidInputError(
        "stacked_gis_sinkhorn: exponent must lie in (0, 1); 1 diverges");
  // The iteration lives on the probability simplex: the reference plan is
  // the normalized Gibbs kernel, and each multiplicative step is followed by
  // renormalization. Without it the total-mass error decays by |1 - 2t| per
  // step, which stalls the iteration for exponents t near 1.
  Matrix pi = kernel.to_dense();
  pi /= pi.sum();
  const Eigen::Index M = mu.size(), N = nu.size();
  const double mass = mu.sum();
  SinkhornResult res;
  for (int it = 0; it < stop.max_cycles; ++it) {
    Vector row = pi.rowwise().sum();
    Vector col = pi.colwise().sum();
    Vector rf = (mu.array() / row.array()).pow(exponent);
    Vector cf = (nu.array() / col.array()).pow(exponent);
    pi = rf.asDiagonal() * pi * cf.asDiagonal();
    pi *= mass / pi.sum();
    row = pi.rowwise().sum();
    col = pi.colwise().sum();
    const double viol = std::max((row - mu).cwiseAbs().maxCoeff(),
                                 (col - nu).cwiseAbs().maxCoeff());
    res.violations.push_back(viol);
    res.iterations = it + 1;
    if (viol <= stop.tol) {
      res.converged = true;
      break;
    }
  }
  res.plan = CouplingPlan(std::move(pi));
  return res;
}

BlockStudyReport block_study(const std::vector<double>& eps_grid,
                             const std::vector<int>& M_grid,
                             const std::vector<double>& tol_grid, int trials,
                             uint64_t seed) {
  if (eps_grid.empty() || M_grid.empty() || tol_grid.empty() || trials < 1)
    throw InvalidInputError("block_study: empty grid");
  BlockStudyReport report;
  report.seed = seed;
  report.trials = trials;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);

  for (double eps : eps_grid)
    for (int M : M_grid)
      for (double tol : tol_grid) {
        BlockStudyCell cell;
        cell.epsilon = eps;
        cell.M = M;
        cell.tol = tol;
        Vector grid = Vector::LinSpaced(M, 0.0, 1.0);
        if (M == 1) grid(0) = 0.0;
        Matrix cost(M, M);
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < M; ++j) {
            const double d = grid(i) - grid(j);
            cost(i, j) = d * d;
          }
        GibbsKernel kernel = build_dense(cost, eps);
        StopRule stop{tol, 200000};
        double s_sum = 0, h_sum = 0, n_sum = 0;
        for (int t = 0; t < trials; ++t) {
          Vector mu(M), nu(M);
          for (int i = 0; i < M; ++i) mu(i) = unif(rng);
          for (int i = 0; i < M; ++i) nu(i) = unif(rng);
          mu /= mu.sum();
          nu /= nu.sum();
          s_sum += sinkhorn(mu, nu, kernel, stop).iterations;
          h_sum += stacked_gis_sinkhorn(mu, nu, kernel, 0.5, stop).iterations;
          n_sum += stacked_gis_sinkhorn(mu, nu, kernel, 0.99, stop).iterations;
        }
        cell.mean_sinkhorn_iters = s_sum / trials;
        cell.mean_stacked_half_iters = h_sum / trials;
        cell.mean_stacked_099_iters = n_sum / trials;
        cell.ratio_half_vs_sinkhorn =
            cell.mean_stacked_half_iters / cell.mean_sinkhorn_iters;
        cell.ratio_half_vs_099 =
            cell.mean_stacked_half_iters / cell.mean_stacked_099_iters;
        report.cells.push_back(cell);
      }
  return report;
}

std::string BlockStudyReport::to_csv() const {
  std::ostringstream os;
  os << "epsilon,M,tol,sinkhorn_iters,stacked_half_iters,stacked_099_iters,"
        "ratio_half_vs_sinkhorn,ratio_half_vs_099\n";
  os.precision(12);
  for (const auto& c : cells)
    os << c.epsilon << ',' << c.M << ',' << c.tol << ','
       << c.mean_sinkhorn_iters << ',' << c.mean_stacked_half_iters << ','
       << c.mean_stacked_099_iters << ',' << c.ratio_half_vs_sinkhorn << ','
       << c.ratio_half_vs_099 << '\n';
  return os.str();
}

std::string BlockStudyReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\n  \"seed\": " << seed << ",\n  \"trials\": " << trials
     << ",\n  \"instance_family\": \"" << instance_family
     << "\",\n  \"cells\": [\n";
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << "    {\"epsilon\": " << c.epsilon << ", \"M\": " << c.M
       << ", \"tol\": " << c.tol
       << ", \"sinkhorn_iters\": " << c.mean_sinkhorn_iters
       << ", \"stacked_half_iters\": " << c.mean_stacked_half_iters
       << ", \"stacked_099_iters\": " << c.mean_stacked_099_iters
       << ", \"ratio_half_vs_sinkhorn\": " << c.ratio_half_vs_sinkhorn
       << ", \"ratio_half_vs_099\": " << c.ratio_half_vs_099 << "}"
       << (i + 1 < cells.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

}  // namespace klproj
