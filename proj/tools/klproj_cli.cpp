// Command-line front end: reruns every experiment and writes plot-ready CSV
// plus a machine-readable summary JSON (schema in schemas/summary.schema.json).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "klproj/gis_solver.hpp"
#include "klproj/martingale_ot.hpp"
#include "klproj/moment_ot.hpp"
#include "klproj/ot_baseline.hpp"
#include "klproj/unbalanced_conic.hpp"
#include "klproj/weak_ot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace klproj;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitInfeasible = 3;

struct CommonOpts {
  std::string fixture;
  std::string spec_path;
  double tol = 1e-9;
  int max_cycles = 200000;
  double epsilon = 0.0;  // 0 keeps the fixture default
  std::string out_dir = ".";
  std::vector<std::string> formats = {"csv", "json"};
  uint64_t seed = 20240901;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--fixture", o.fixture, "Built-in fixture name");
  cmd->add_option("--spec", o.spec_path, "Path to a JSON problem spec");
  cmd->add_option("--tol", o.tol, "Stopping tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-cycles", o.max_cycles, "Cycle budget");
  cmd->add_option("--epsilon", o.epsilon, "Entropic regularization override");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--format", o.formats, "Output formats (csv, json)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", o.seed, "Seed for randomized studies");
}

bool wants(const CommonOpts& o, const std::string& fmt) {
  for (const auto& f : o.formats)
    if (f == fmt) return true;
  return false;
}

void write_file(const CommonOpts& o, const std::string& name,
                const std::string& content) {
  fs::create_directories(o.out_dir);
  std::ofstream out(fs::path(o.out_dir) / name, std::ios::binary);
  if (!out) throw InvalidInputError("cannot write to " + o.out_dir);
  out << content;
}

void write_summary(const CommonOpts& o, const std::string& command,
                   bool converged, int iterations, const json& metrics) {
  json summary = {{"command", command},
                  {"fixture", o.fixture.empty() ? "custom" : o.fixture},
                  {"converged", converged},
                  {"iterations", iterations},
                  {"metrics", metrics}};
  write_file(o, "summary.json", summary.dump(2) + "\n");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Vector to_vector(const json& arr) {
  std::vector<double> v = arr.get<std::vector<double>>();
  return Eigen::Map<Vector>(v.data(), Eigen::Index(v.size()));
}

Matrix to_matrix(const json& arr) {
  const auto rows = arr.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw InvalidInputError("empty matrix in spec");
  Matrix A(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw InvalidInputError("ragged matrix in spec");
    for (size_t j = 0; j < rows[i].size(); ++j)
      A(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  }
  return A;
}

// ---------------------------------------------------------------- project

int cmd_project(CommonOpts o) {
  if (o.fixture.empty() && o.spec_path.empty()) o.fixture = "fig1";
  Vector q;
  BlockSchedule schedule;
  const bool is_fig1 = o.fixture == "fig1" || (o.fixture.empty() && o.spec_path.empty());
  if (!o.spec_path.empty()) {
    json spec = json::parse(slurp(o.spec_path));
    q = to_vector(spec.at("q"));
    for (const auto& blk : spec.at("blocks")) {
      AffineBlock block;
      block.A = to_matrix(blk.at("A"));
      block.b = to_vector(blk.at("b"));
      const std::string kind = blk.value("kind", "gis");
      if (kind == "scaling")
        block.kind = BlockKind::ExplicitScaling;
      else if (kind == "gis")
        block.kind = BlockKind::Gis;
      else
        throw InvalidInputError("unknown block kind: " + kind);
      schedule.blocks.push_back(std::move(block));
    }
  } else if (is_fig1) {
    q.resize(3);
    q << 0.5, 0.1, 0.4;
    AffineBlock block;
    block.A = Matrix(1, 3);
    block.A << 0.1, 0.5, 0.4;
    block.b = Vector::Constant(1, 0.42);
    block.kind = BlockKind::Gis;
    schedule.blocks.push_back(std::move(block));
  } else {
    throw InvalidInputError("unknown fixture: " + o.fixture);
  }
  schedule.prepare();
  BlockSchedule kept = schedule;  // run_mixed consumes its copy

  RunOptions opts;
  opts.record_iterates = true;
  MixedResult res =
      run_mixed(q, std::move(schedule), StopRule{o.tol, o.max_cycles}, opts);

  // Trajectory of raw and L1-renormalized iterates; the fig1 fixture pads
  // with further (numerically stationary) steps to a full 100 points.
  std::vector<Vector> points = res.trace.iterates;
  if (is_fig1 && kept.blocks.size() == 1) {
    const NormalizedSystem& ns = *kept.blocks[0].normalized;
    while (points.size() < 100)
      points.push_back(gis_step(points.back(), ns.A, ns.b));
    points.resize(100);
  }
  if (wants(o, "csv")) {
    std::ostringstream os;
    os.precision(15);
    os << "k";
    for (Eigen::Index i = 0; i < q.size(); ++i) os << ",p" << i;
    for (Eigen::Index i = 0; i < q.size(); ++i) os << ",p_normalized" << i;
    os << '\n';
    for (size_t k = 0; k < points.size(); ++k) {
      os << k;
      const double mass = points[k].sum();
      for (Eigen::Index i = 0; i < q.size(); ++i) os << ',' << points[k](i);
      for (Eigen::Index i = 0; i < q.size(); ++i)
        os << ',' << points[k](i) / mass;
      os << '\n';
    }
    write_file(o, "trajectory.csv", os.str());
  }

  double final_violation = 0.0;
  for (const auto& blk : kept.blocks)
    final_violation = std::max(
        final_violation, (blk.A * res.p - blk.b).cwiseAbs().maxCoeff());
  json metrics = {{"final_violation", final_violation},
                  {"l1_mass", res.p.sum()}};
  json final_p = json::array();
  for (Eigen::Index i = 0; i < res.p.size(); ++i) final_p.push_back(res.p(i));
  metrics["final_p"] = final_p;
  write_summary(o, "project", res.trace.converged, res.trace.cycles_run,
                metrics);
  return res.trace.converged ? kExitOk : kExitNotConverged;
}

// --------------------------------------------------------------- moment-ot

int cmd_moment_ot(CommonOpts o) {
  if (o.fixture.empty()) o.fixture = "interval";
  MomentProblem prob;
  if (o.fixture == "interval" || o.fixture.empty()) {
    prob = build_interval_experiment(100, o.epsilon > 0 ? o.epsilon : 0.01,
                                     false);
  } else if (o.fixture == "torus") {
    prob = build_torus_experiment(500, o.epsilon > 0 ? o.epsilon : 0.01, true);
  } else {
    throw InvalidInputError("unknown fixture: " + o.fixture);
  }
  MomentSolution sol = solve_dual(prob, StopRule{o.tol, o.max_cycles});
  if (wants(o, "csv")) write_file(o, "measures.csv", moment_result_csv(prob, sol));
  if (wants(o, "json")) write_file(o, "result.json", moment_result_json(prob, sol));

  Histogram nu_hist(sol.nu.weights, prob.grid);
  Vector resid = prob.A * sol.nu.weights - prob.b;
  json metrics = {
      {"mean", nu_hist.mean()},
      {"second_moment",
       prob.grid.array().square().matrix().dot(sol.nu.weights) /
           sol.nu.weights.sum()},
      {"constraint_violation", resid.cwiseAbs().maxCoeff()},
      {"local_maxima", cyclic_local_maxima(sol.nu.weights)}};
  write_summary(o, "moment-ot", sol.trace.converged, sol.trace.iterations,
                metrics);
  return sol.trace.converged ? kExitOk : kExitNotConverged;
}

// ----------------------------------------------------------- martingale-ot

int cmd_martingale_ot(CommonOpts o) {
  if (o.fixture.empty()) o.fixture = "curtain";
  if (!(o.fixture == "curtain"))
    throw InvalidInputError("unknown fixture: " + o.fixture);
  MartingaleProblem prob =
      build_curtain_fixture(100, o.epsilon > 0 ? o.epsilon : 0.002);
  MartingaleSolution sol = solve(prob, StopRule{o.tol, o.max_cycles});
  if (wants(o, "csv")) write_file(o, "plan.csv", plan_csv(sol.plan.entries));

  const MartingaleTrace& tr = sol.trace;
  const double rv = tr.row_violation.empty() ? 0.0 : tr.row_violation.back();
  const double cv = tr.col_violation.empty() ? 0.0 : tr.col_violation.back();
  const double mv =
      tr.martingale_violation.empty() ? 0.0 : tr.martingale_violation.back();
  std::vector<int> clusters = row_support_clusters(sol.plan.entries, 1e-3);
  int max_clusters = 0;
  for (int c : clusters) max_clusters = std::max(max_clusters, c);
  json metrics = {{"row_violation", rv},
                  {"col_violation", cv},
                  {"martingale_violation", mv},
                  {"max_violation", std::max({rv, cv, mv})},
                  {"max_support_clusters", max_clusters}};
  write_summary(o, "martingale-ot", tr.converged, tr.iterations, metrics);
  return tr.converged ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------- weak-ot

int cmd_weak_ot(CommonOpts o) {
  if (o.fixture.empty()) o.fixture = "curtain";
  if (!(o.fixture == "curtain"))
    throw InvalidInputError("unknown fixture: " + o.fixture);
  WeakProblem prob =
      build_weak_curtain_fixture(100, o.epsilon > 0 ? o.epsilon : 1e-10);
  WeakStopRule stop;
  stop.tol = o.tol;
  stop.max_cycles = o.max_cycles;
  WeakSolution sol = solve(prob, stop, quadratic_cost);

  if (wants(o, "csv")) {
    std::ostringstream os;
    os.precision(15);
    os << "i,x,mu,mean\n";
    const Vector& x = *prob.mu.coords;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      os << i << ',' << x(i) << ',' << prob.mu.weights(i) << ','
         << sol.means(i) << '\n';
    write_file(o, "means.csv", os.str());
    std::ostringstream ts;
    ts.precision(15);
    ts << "iteration,weak_cost\n";
    for (size_t k = 0; k < sol.cost_trace.size(); ++k)
      ts << k + 1 << ',' << sol.cost_trace[k] << '\n';
    write_file(o, "cost_trace.csv", ts.str());
  }
  const double gap =
      jensen_gap(sol.pi_y, sol.pi_x, prob.mu.weights, *prob.mu.coords, prob.y,
                 prob.cost, quadratic_cost);
  json metrics = {{"weak_cost", sol.weak_cost}, {"jensen_gap", gap}};
  write_summary(o, "weak-ot", sol.converged, sol.iterations, metrics);
  return sol.converged ? kExitOk : kExitNotConverged;
}

// ----------------------------------------------------------- unbalanced-ot

int cmd_unbalanced_ot(CommonOpts o) {
  if (o.fixture.empty() && o.spec_path.empty()) o.fixture = "two-sites";
  LiftedProblem prob;
  if (!o.spec_path.empty()) {
    prob = lifted_problem_from_json(slurp(o.spec_path));
  } else if (o.fixture == "two-sites" || o.fixture.empty()) {
    Vector grid(2), mu(2), nu(2);
    grid << 0.0, 1.0;
    mu << 1.0, 1.0;  // total 2
    nu << 0.6, 0.4;  // total 1: mass must be destroyed
    prob.mu = Histogram(mu);
    prob.nu = Histogram(nu);
    prob.K_max = 2;
    prob.L_max = 2;
    prob.epsilon = o.epsilon > 0 ? o.epsilon : 0.05;
    prob.cost = default_conic_cost(grid, grid, prob.K_max, prob.L_max, 0.5);
  } else {
    throw InvalidInputError("unknown fixture: " + o.fixture);
  }
  if (o.epsilon > 0) prob.epsilon = o.epsilon;
  ConicSolution sol = solve(prob, StopRule{o.tol, o.max_cycles});
  if (wants(o, "csv")) write_file(o, "coupling.csv", coupling_csv(sol.coupling));

  ConicResiduals res = conic_residuals(sol.coupling, prob.mu.weights,
                                       prob.nu.weights);
  double cost_value = 0.0;
  for (Eigen::Index t = 0; t < sol.coupling.pi.size(); ++t)
    cost_value += prob.cost[size_t(t)] * sol.coupling.pi(t);
  json metrics = {
      {"mu_residual", res.mu_resid.cwiseAbs().maxCoeff()},
      {"nu_residual", res.nu_resid.cwiseAbs().maxCoeff()},
      {"mass_residual", std::abs(res.mass_resid)},
      {"cost", cost_value}};
  write_summary(o, "unbalanced-ot", sol.trace.converged,
                sol.trace.cycles_run, metrics);
  return sol.trace.converged ? kExitOk : kExitNotConverged;
}

// ------------------------------------------------------------ block-study

int cmd_block_study(const CommonOpts& o, const std::vector<double>& eps_grid,
                    const std::vector<int>& m_grid, int trials) {
  std::vector<double> eps = eps_grid.empty()
                                ? std::vector<double>{0.05, 0.1}
                                : eps_grid;
  std::vector<int> Ms = m_grid.empty() ? std::vector<int>{32, 64} : m_grid;
  BlockStudyReport report =
      block_study(eps, Ms, {o.tol > 1e-6 ? 1e-6 : o.tol}, trials, o.seed);
  if (wants(o, "csv")) write_file(o, "block_study.csv", report.to_csv());
  if (wants(o, "json")) write_file(o, "block_study.json", report.to_json());

  double mean_ratio = 0.0, mean_ablation = 0.0;
  for (const auto& c : report.cells) {
    mean_ratio += c.ratio_half_vs_sinkhorn;
    mean_ablation += c.ratio_half_vs_099;
  }
  if (!report.cells.empty()) {
    mean_ratio /= double(report.cells.size());
    mean_ablation /= double(report.cells.size());
  }
  json metrics = {{"mean_ratio_half_vs_sinkhorn", mean_ratio},
                  {"mean_ratio_half_vs_099", mean_ablation},
                  {"trials", report.trials}};
  write_summary(o, "block-study", true, report.trials, metrics);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL information projections for optimal transport problems"};
  app.require_subcommand(1);

  CommonOpts o_project, o_moment, o_mart, o_weak, o_conic, o_study;
  std::vector<double> study_eps;
  std::vector<int> study_m;
  int study_trials = 20;

  add_common(app.add_subcommand("project", "Mixed scaling/GIS projection"),
             o_project);
  add_common(app.add_subcommand("moment-ot", "Moment-constrained OT"),
             o_moment);
  add_common(app.add_subcommand("martingale-ot", "Martingale OT"), o_mart);
  add_common(app.add_subcommand("weak-ot", "Barycentric weak OT"), o_weak);
  // The lifted conic system converges sublinearly (O(1/k) residual), so the
  // default budget differs from the other solvers.
  o_conic.tol = 1e-5;
  o_conic.max_cycles = 2000000;
  add_common(app.add_subcommand("unbalanced-ot", "Conic unbalanced OT"),
             o_conic);
  CLI::App* study = app.add_subcommand("block-study",
                                       "Sinkhorn vs stacked-GIS iteration study");
  add_common(study, o_study);
  study->add_option("--eps-grid", study_eps, "Epsilon values");
  study->add_option("--m-grid", study_m, "Grid sizes");
  study->add_option("--trials", study_trials, "Random instances per cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (app.got_subcommand("project")) return cmd_project(o_project);
    if (app.got_subcommand("moment-ot")) return cmd_moment_ot(o_moment);
    if (app.got_subcommand("martingale-ot")) return cmd_martingale_ot(o_mart);
    if (app.got_subcommand("weak-ot")) return cmd_weak_ot(o_weak);
    if (app.got_subcommand("unbalanced-ot")) return cmd_unbalanced_ot(o_conic);
    if (app.got_subcommand("block-study"))
      return cmd_block_study(o_study, study_eps, study_m, study_trials);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const OracleFailure& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
