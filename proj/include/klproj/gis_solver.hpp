#pragma once

#include <vector>

#include "klproj/affine_normalize.hpp"

namespace klproj {

/// Stopping rule: sup-norm constraint violation across all blocks, checked
/// once per full cycle.
struct StopRule {
  double tol = 1e-9;
  int max_cycles = 50000;
};

struct CycleRecord {
  std::vector<double> block_violation;  // sup-norm of A^k p - b^k, raw system
  std::vector<double> gis_kl;           // KL(b', A'p) per GIS block
  double kl_to_ref = -1.0;              // filled by fejer_audit when asked
  double l1_drift = 0.0;                // | ||p||_1 - 1 |
  double seconds = 0.0;
};

struct ConvergenceTrace {
  std::vector<CycleRecord> cycles;
  // Iterates after every single block step (only kept when requested);
  // iterates[0] is the starting point q.
  std::vector<Vector> iterates;
  // Block index applied to produce iterates[s+1] from iterates[s].
  std::vector<int> step_block;
  bool converged = false;
  int cycles_run = 0;
};

struct BlockSchedule {
  std::vector<AffineBlock> blocks;

  /// Attach normalized systems to every GIS block that lacks one.
  void prepare();
};

/// One GIS update p <- p (*) exp(A'^T log(b'/A'p)) for a normalized system.
Vector gis_step(const Vector& p, const Matrix& A_norm, const Vector& b_norm);

struct RunOptions {
  bool record_iterates = false;
};

struct MixedResult {
  Vector p;
  ConvergenceTrace trace;
};

/// Algorithm: cycle through the blocks, applying closed-form scaling for
/// ExplicitScaling blocks and one GIS iteration for Gis blocks, until every
/// block's raw-system violation drops below stop.tol.
MixedResult run_mixed(const Vector& q, BlockSchedule schedule,
                      const StopRule& stop, const RunOptions& opts = {});

/// Per-GIS-step Fejer slack values along a stored trace:
/// [KL(p_ref, before) - KL(p_ref, after)] - KL(b', A' before).
/// Requires the trace to have been recorded with record_iterates.
std::vector<double> fejer_audit(const ConvergenceTrace& trace,
                                const BlockSchedule& schedule,
                                const Vector& p_ref);

/// KL(p_ref, iterate) along the full stored iterate sequence.
std::vector<double> kl_to_reference(const ConvergenceTrace& trace,
                                    const Vector& p_ref);

}  // namespace klproj
