#include "klproj/unbalanced_conic.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace klproj {

namespace {

int default_levels(double total_mass, int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::ceil(total_mass - 1e-12));
}

int integer_level(double total_mass, const char* which) {
  const long k = std::lround(total_mass);
  if (k < 1 || std::abs(total_mass - double(k)) > 1e-9) {
    std::ostringstream os;
    os << "feasible_init: ||" << which << "||_1 = " << total_mass
       << " is not an integer number of mass units; pick s = "
       << suggest_unit(total_mass, total_mass) << " or smaller";
    throw InvalidInputError(os.str());
  }
  return static_cast<int>(k);
}

}  // namespace

double suggest_unit(double mass_mu, double mass_nu) {
  if (mass_mu <= 0.0 || mass_nu <= 0.0)
    throw InvalidInputError("suggest_unit: masses must be positive");
  // Search divisors of the smaller mass from largest down.
  const double lo = std::min(mass_mu, mass_nu);
  for (int d = 1; d <= 1000000; ++d) {
    const double s = lo / d;
    const double ra = mass_mu / s, rb = mass_nu / s;
    if (std::abs(ra - std::round(ra)) < 1e-9 * d &&
        std::abs(rb - std::round(rb)) < 1e-9 * d)
      return s;
  }
  throw InvalidInputError("suggest_unit: no common unit found");
}

ConicCoupling feasible_init(const Histogram& mu, const Histogram& nu,
                            int K_max, int L_max) {
  const double mm = mu.total_mass(), mn = nu.total_mass();
  const int km = integer_level(mm, "mu");
  const int lm = integer_level(mn, "nu");
  const int K = default_levels(mm, K_max);
  const int L = default_levels(mn, L_max);
  if (km > K || lm > L)
    throw InvalidInputError("feasible_init: total mass exceeds level cutoff");

  ConicCoupling out;
  out.M = mu.size();
  out.N = nu.size();
  out.K = K;
  out.L = L;
  out.pi = Vector::Zero(out.cells());
  for (Eigen::Index i = 0; i < out.M; ++i)
    for (Eigen::Index j = 0; j < out.N; ++j)
      out.pi(out.index(i, km, j, lm)) =
          (mu.weights(i) / mm) * (nu.weights(j) / mn);
  return out;
}

ConicResiduals conic_residuals(const ConicCoupling& pi, const Vector& mu,
                               const Vector& nu) {
  ConicResiduals r;
  r.mu_resid = -mu;
  r.nu_resid = -nu;
  r.mass_resid = -1.0;
  for (Eigen::Index i = 0; i < pi.M; ++i)
    for (int k = 1; k <= pi.K; ++k)
      for (Eigen::Index j = 0; j < pi.N; ++j)
        for (int l = 1; l <= pi.L; ++l) {
          const double v = pi(i, k, j, l);
          r.mu_resid(i) += k * v;
          r.nu_resid(j) += l * v;
          r.mass_resid += v;
        }
  return r;
}

void conic_constraint_system(Eigen::Index M, Eigen::Index N, int K, int L,
                             const Vector& mu, const Vector& nu, Matrix& A,
                             Vector& b) {
  const Eigen::Index cells =
      M * static_cast<Eigen::Index>(K) * N * static_cast<Eigen::Index>(L);
  A = Matrix::Zero(M + N + 1, cells);
  b.resize(M + N + 1);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < M; ++i)
    for (int k = 1; k <= K; ++k)
      for (Eigen::Index j = 0; j < N; ++j)
        for (int l = 1; l <= L; ++l) {
          A(i, at) = k;
          A(M + j, at) = l;
          A(M + N, at) = 1.0;
          ++at;
        }
  b.head(M) = mu;
  b.segment(M, N) = nu;
  b(M + N) = 1.0;
}

ConicSolution solve(const LiftedProblem& problem, const StopRule& stop,
                    bool split_blocks) {
  const Eigen::Index M = problem.mu.size();
  const Eigen::Index N = problem.nu.size();
  const int K = default_levels(problem.mu.total_mass(), problem.K_max);
  const int L = default_levels(problem.nu.total_mass(), problem.L_max);
  const Eigen::Index cells =
      M * static_cast<Eigen::Index>(K) * N * static_cast<Eigen::Index>(L);
  if (cells > problem.max_cells)
    throw InvalidInputError("conic solve: M*K*M*L exceeds the dense cap");
  if (static_cast<Eigen::Index>(problem.cost.size()) != cells)
    throw DimensionError("conic solve: cost array has the wrong size");

  Vector q(cells);
  for (Eigen::Index t = 0; t < cells; ++t) {
    const double c = problem.cost[static_cast<size_t>(t)];
    q(t) = std::isfinite(c) ? std::exp(-c / problem.epsilon) : 0.0;
  }
  const double qs = q.sum();
  if (qs <= 0.0)
    throw InfeasibleError("conic solve: kernel vanished; increase epsilon");
  q /= qs;  // harmless for the projection (unit-mass row is a constraint)

  Matrix A;
  Vector b;
  conic_constraint_system(M, N, K, L, problem.mu.weights, problem.nu.weights,
                          A, b);
  BlockSchedule schedule;
  if (split_blocks) {
    AffineBlock mu_block{A.topRows(M), b.head(M), BlockKind::Gis, {}};
    AffineBlock nu_block{A.middleRows(M, N), b.segment(M, N), BlockKind::Gis,
                         {}};
    AffineBlock mass_block{A.bottomRows(1), b.tail(1), BlockKind::Gis, {}};
    schedule.blocks = {mu_block, nu_block, mass_block};
  } else {
    schedule.blocks = {AffineBlock{A, b, BlockKind::Gis, {}}};
  }
  schedule.prepare();

  MixedResult res = run_mixed(q, std::move(schedule), stop);
  ConicSolution sol;
  sol.coupling.pi = std::move(res.p);
  sol.coupling.M = M;
  sol.coupling.N = N;
  sol.coupling.K = K;
  sol.coupling.L = L;
  sol.trace = std::move(res.trace);
  return sol;
}

std::vector<double> default_conic_cost(const Vector& grid_x,
                                       const Vector& grid_y, int K, int L,
                                       double lambda) {
  const Eigen::Index M = grid_x.size();
  const Eigen::Index N = grid_y.size();
  std::vector<double> c(static_cast<size_t>(M) * K * N * L);
  size_t at = 0;
  for (Eigen::Index i = 0; i < M; ++i)
    for (int k = 1; k <= K; ++k)
      for (Eigen::Index j = 0; j < N; ++j) {
        const double d2 = (grid_x(i) - grid_y(j)) * (grid_x(i) - grid_y(j));
        for (int l = 1; l <= L; ++l)
          c[at++] = k * d2 + lambda * std::abs(k - l);
      }
  return c;
}

std::string coupling_csv(const ConicCoupling& pi) {
  std::ostringstream os;
  os.precision(15);
  os << "i,k,j,l,mass\n";
  for (Eigen::Index i = 0; i < pi.M; ++i)
    for (int k = 1; k <= pi.K; ++k)
      for (Eigen::Index j = 0; j < pi.N; ++j)
        for (int l = 1; l <= pi.L; ++l) {
          const double v = pi(i, k, j, l);
          if (v != 0.0)
            os << i << ',' << k << ',' << j << ',' << l << ',' << v << '\n';
        }
  return os.str();
}

LiftedProblem lifted_problem_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LiftedProblem prob;
  std::vector<double> mu = j.at("mu").get<std::vector<double>>();
  std::vector<double> nu = j.at("nu").get<std::vector<double>>();
  prob.s = j.value("s", 1.0);
  if (prob.s <= 0.0)
    throw InvalidInputError("lifted problem: s must be positive");
  Vector muv = Eigen::Map<Vector>(mu.data(), Eigen::Index(mu.size())) / prob.s;
  Vector nuv = Eigen::Map<Vector>(nu.data(), Eigen::Index(nu.size())) / prob.s;
  prob.mu = Histogram(muv);
  prob.nu = Histogram(nuv);
  prob.K_max = j.value("K", 0);
  prob.L_max = j.value("L", 0);
  prob.epsilon = j.value("epsilon", 0.05);
  const int K = default_levels(prob.mu.total_mass(), prob.K_max);
  const int L = default_levels(prob.nu.total_mass(), prob.L_max);
  if (j.contains("cost")) {
    prob.cost = j.at("cost").get<std::vector<double>>();
  } else if (j.contains("cost_spec")) {
    const auto& cs = j.at("cost_spec");
    std::vector<double> g = cs.at("grid").get<std::vector<double>>();
    Vector grid = Eigen::Map<Vector>(g.data(), Eigen::Index(g.size()));
    prob.cost = default_conic_cost(grid, grid, K, L, cs.value("lambda", 1.0));
  } else {
    throw InvalidInputError("lifted problem: missing cost or cost_spec");
  }
  return prob;
}

}  // namespace klproj
