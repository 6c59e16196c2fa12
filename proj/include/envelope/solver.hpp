#pragma once

// Minimization of L_u over the coordinates A: cyclic row-wise Newton
// descent (default) or a joint quasi-Newton pass over all of A.

#include <optional>
#include <string>
#include <vector>

#include "envelope/init.hpp"

namespace envelope {

enum class SolverMode { RowCyclic, DirectFull };

struct SolverOptions {
  int max_sweeps = 100;
  double rel_tol = 1e-8;  // relative objective decrease per sweep
  int inner_max_iter = 20;
  double inner_grad_tol = 1e-8;
  SolverMode mode = SolverMode::RowCyclic;

  void validate() const;
};

struct DescentResult {
  CoordParam coords;
  std::vector<double> trajectory;  // objective before the first sweep, then after each kept sweep
  int sweeps = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct EnvelopeFit {
  Basis gamma_hat;
  double objective = 0.0;
  std::optional<StartCandidate> start;  // empty for u = 0 and u = r
  int sweeps = 0;
  bool converged = false;
  std::vector<double> trajectory;
  std::vector<std::string> warnings;
};

/// Damped Newton on the row objective. Never returns a point with a larger
/// row objective than `a0`.
Vector newton_row_update(const RowContext& ctx, const Vector& a0, const SolverOptions& opts);

/// Cycles over the rows of A in ascending order until the relative decrease
/// of L_u(A) over a sweep drops below `rel_tol`.
DescentResult coordinate_descent(const EnvelopeProblem& p, const CoordParam& a0,
                                 const SolverOptions& opts);

/// BFGS over vec(A) from the same start.
DescentResult direct_descent(const EnvelopeProblem& p, const CoordParam& a0,
                             const SolverOptions& opts);

/// Full pipeline: best start, row anchoring, descent, orthonormalization.
EnvelopeFit fit_envelope(const EnvelopeProblem& p, const SolverOptions& opts = {});

/// Pipeline from a caller-chosen starting candidate.
EnvelopeFit fit_from_start(const EnvelopeProblem& p, const StartCandidate& start,
                           const SolverOptions& opts = {});

}  // namespace envelope
