#include "klproj/gis_solver.hpp"

#include <chrono>
#include <cmath>

namespace klproj {

namespace {

void check_explicit_rows(const Matrix& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (A(i, j) != 0.0 && A(i, j) != 1.0)
        throw InvalidInputError(
            "ExplicitScaling block requires zero/one rows");
}

Vector apply_explicit(const Vector& p, const AffineBlock& block) {
  Vector out = p;
  for (Eigen::Index i = 0; i < block.A.rows(); ++i) {
    const Vector mask = block.A.row(i).transpose();
    const double bi = block.b(i);
    const double mass = mask.dot(out);
    if (bi == 0.0) {
      for (Eigen::Index j = 0; j < out.size(); ++j)
        if (mask(j) == 1.0) out(j) = 0.0;
      continue;
    }
    if (mass <= 0.0)
      throw InfeasibleError("scaling block: zero mass under a mask row");
    out = scaling_projection(out, mask, bi);
  }
  return out;
}

}  // namespace

void BlockSchedule::prepare() {
  for (AffineBlock& block : blocks) {
    if (block.kind == BlockKind::Gis) {
      if (!block.normalized) block.normalized = normalize(block.A, block.b);
    } else {
      check_explicit_rows(block.A);
    }
  }
}

Vector gis_step(const Vector& p, const Matrix& A_norm, const Vector& b_norm) {
  if (p.size() != A_norm.cols())
    throw DimensionError("gis_step: p length / A columns mismatch");
  Vector Ap = A_norm * p;
  Vector log_ratio(b_norm.size());
  for (Eigen::Index i = 0; i < b_norm.size(); ++i) {
    if (Ap(i) <= 0.0) {
      if (b_norm(i) > 0.0)
        throw InfeasibleError("gis_step: (A'p)_i = 0 with b'_i > 0");
      log_ratio(i) = 0.0;  // b'_i = 0 contributes nothing
    } else if (b_norm(i) == 0.0) {
      // exponent would be -inf for rows with A'_ij > 0; those coordinates
      // must go to zero. Use a large negative value to avoid NaN from 0*inf.
      log_ratio(i) = -745.0;
    } else {
      log_ratio(i) = std::log(b_norm(i) / Ap(i));
    }
  }
  Vector p_new = p.array() * (A_norm.transpose() * log_ratio).array().exp();
  return p_new;
}

MixedResult run_mixed(const Vector& q, BlockSchedule schedule,
                      const StopRule& stop, const RunOptions& opts) {
  if ((q.array() < 0.0).any())
    throw InvalidInputError("run_mixed: q must be nonnegative");
  if (stop.tol <= 0.0 || stop.max_cycles < 1)
    throw InvalidInputError("run_mixed: bad stop rule");

  // q_j = 0 forces p_j = 0 in any solution; drop those coordinates and
  // reinsert zeros in the output.
  const Eigen::Index M = q.size();
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < M; ++j)
    if (q(j) > 0.0) active.push_back(j);
  const bool filtered = static_cast<Eigen::Index>(active.size()) != M;
  BlockSchedule work = schedule;
  Vector q_work;
  if (filtered) {
    q_work.resize(static_cast<Eigen::Index>(active.size()));
    for (size_t j = 0; j < active.size(); ++j) q_work(j) = q(active[j]);
    for (AffineBlock& block : work.blocks) {
      Matrix A(block.A.rows(), static_cast<Eigen::Index>(active.size()));
      for (size_t j = 0; j < active.size(); ++j)
        A.col(static_cast<Eigen::Index>(j)) = block.A.col(active[j]);
      block.A = std::move(A);
      block.normalized.reset();
    }
  } else {
    q_work = q;
  }
  work.prepare();

  MixedResult result;
  ConvergenceTrace& trace = result.trace;
  Vector p = q_work;
  if (opts.record_iterates) trace.iterates.push_back(p);

  const int n_blocks = static_cast<int>(work.blocks.size());
  for (int cycle = 0; cycle < stop.max_cycles; ++cycle) {
    const auto t0 = std::chrono::steady_clock::now();
    CycleRecord rec;
    for (int k = 0; k < n_blocks; ++k) {
      const AffineBlock& block = work.blocks[k];
      if (block.kind == BlockKind::Gis) {
        const NormalizedSystem& ns = *block.normalized;
        rec.gis_kl.push_back(kl_divergence(ns.b, ns.A * p));
        p = gis_step(p, ns.A, ns.b);
      } else {
        p = apply_explicit(p, block);
      }
      if (opts.record_iterates) {
        trace.iterates.push_back(p);
        trace.step_block.push_back(k);
      }
    }
    double worst = 0.0;
    for (const AffineBlock& block : work.blocks) {
      const double v = (block.A * p - block.b).cwiseAbs().maxCoeff();
      rec.block_violation.push_back(v);
      worst = std::max(worst, v);
    }
    rec.l1_drift = std::abs(p.lpNorm<1>() - 1.0);
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    trace.cycles.push_back(std::move(rec));
    trace.cycles_run = cycle + 1;
    if (worst <= stop.tol) {
      trace.converged = true;
      break;
    }
  }

  if (filtered) {
    Vector full = Vector::Zero(M);
    for (size_t j = 0; j < active.size(); ++j) full(active[j]) = p(j);
    result.p = std::move(full);
  } else {
    result.p = std::move(p);
  }
  return result;
}

std::vector<double> fejer_audit(const ConvergenceTrace& trace,
                                const BlockSchedule& schedule,
                                const Vector& p_ref) {
  if (trace.iterates.empty())
    throw InvalidInputError("fejer_audit: trace has no stored iterates");
  std::vector<double> slacks;
  for (size_t s = 0; s + 1 < trace.iterates.size(); ++s) {
    const int k = trace.step_block[s];
    const AffineBlock& block = schedule.blocks[k];
    if (block.kind != BlockKind::Gis) continue;
    NormalizedSystem ns =
        block.normalized ? *block.normalized : normalize(block.A, block.b);
    const Vector& before = trace.iterates[s];
    const Vector& after = trace.iterates[s + 1];
    const double drop =
        kl_divergence(p_ref, before) - kl_divergence(p_ref, after);
    slacks.push_back(drop - kl_divergence(ns.b, ns.A * before));
  }
  return slacks;
}

std::vector<double> kl_to_reference(const ConvergenceTrace& trace,
                                    const Vector& p_ref) {
  std::vector<double> out;
  out.reserve(trace.iterates.size());
  for (const Vector& p : trace.iterates)
    out.push_back(kl_divergence(p_ref, p));
  return out;
}

}  // namespace klproj
