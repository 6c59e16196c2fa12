#include "envelope/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace envelope {

namespace {

constexpr int kMaxHalvings = 60;
constexpr double kArmijo = 1e-4;
// A row of A past this size means the anchor rows have gone bad.
constexpr double kAnchorLimit = 50.0;

bool sufficient_decrease(double prev, double cur, double rel_tol) {
  return prev - cur >= rel_tol * std::max(1.0, std::abs(prev));
}

// Gradient of L_u(A) with respect to A, from the gradient in C = C_A.
Vector coords_gradient(const EnvelopeProblem& p, const CoordParam& c) {
  const Matrix cm = c.basis_matrix();
  const Matrix mc = p.m_hat().matrix() * cm;
  const Matrix vc = p.sum_inv() * cm;
  auto inv = [](const Matrix& s) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularProjection, "singular projection");
    return Matrix(llt.solve(Matrix::Identity(s.rows(), s.cols())));
  };
  const Matrix grad_c = -4.0 * cm * inv(cm.transpose() * cm) +
                        2.0 * mc * inv(cm.transpose() * mc) + 2.0 * vc * inv(cm.transpose() * vc);
  const Index rows_a = c.a.rows();
  const Index u = c.u();
  Vector g(rows_a * u);
  for (Index j = 0; j < u; ++j) {
    for (Index i = 0; i < rows_a; ++i) g(j * rows_a + i) = grad_c(c.original_row(i), j);
  }
  return g;
}

// Redoes the partial pivoting on the current span. Empty when the anchor rows
// would not change.
std::optional<CoordParam> reanchor(const CoordParam& c) {
  const Index u = c.u();
  PivotResult piv = pivot_rows(orthonormalize(c.basis_matrix()));
  std::vector<Index> old_rows(c.perm.begin(), c.perm.begin() + u);
  std::vector<Index> new_rows(piv.perm.begin(), piv.perm.begin() + u);
  std::sort(old_rows.begin(), old_rows.end());
  std::sort(new_rows.begin(), new_rows.end());
  if (old_rows == new_rows) return std::nullopt;
  return piv.coords();
}

CoordParam with_vec(const CoordParam& base, const Vector& x) {
  CoordParam out{Eigen::Map<const Matrix>(x.data(), base.a.rows(), base.a.cols()), base.perm};
  return out;
}

Vector to_vec(const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); }

}  // namespace

void SolverOptions::validate() const {
  if (max_sweeps < 1 || inner_max_iter < 1 || !(rel_tol > 0.0) || !(inner_grad_tol > 0.0)) {
    fail(ErrorCode::InvalidInput, "solver iteration limits and tolerances must be positive");
  }
}

Vector newton_row_update(const RowContext& ctx, const Vector& a0, const SolverOptions& opts) {
  Vector a = a0;
  double f = l_row(a, ctx);
  if (!std::isfinite(f)) fail(ErrorCode::NumericalFailure, "row objective is not finite");

  for (int it = 0; it < opts.inner_max_iter; ++it) {
    const RowDerivatives d = l_row_derivatives(a, ctx);
    if (!d.gradient.allFinite() || !d.hessian.allFinite()) {
      fail(ErrorCode::NumericalFailure, "non-finite row derivatives");
    }
    if (d.gradient.norm() < opts.inner_grad_tol) break;

    Vector step;
    Eigen::LLT<Matrix> llt(d.hessian);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      step = -llt.solve(d.gradient);
    } else {
      step = -d.gradient;
    }
    double slope = d.gradient.dot(step);
    if (!(slope < 0.0)) {
      step = -d.gradient;
      slope = -d.gradient.squaredNorm();
    }

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      const Vector trial = a + t * step;
      const double ft = l_row(trial, ctx);
      if (std::isfinite(ft) && ft <= f + kArmijo * t * slope && ft < f) {
        a = trial;
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!a.allFinite()) fail(ErrorCode::NumericalFailure, "non-finite row iterate");
  return a;
}

DescentResult coordinate_descent(const EnvelopeProblem& p, const CoordParam& a0,
                                 const SolverOptions& opts) {
  opts.validate();
  std::optional<CoordState> state(std::in_place, p, a0);
  DescentResult out;
  double prev = state->objective();
  out.trajectory.push_back(prev);

  const Index rows_a = a0.a.rows();
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const CoordParam last = state->coords();
    bool drifted = false;
    for (Index i = 0; i < rows_a && !drifted; ++i) {
      RowContext ctx;
      try {
        ctx = state->context(i);
      } catch (const EnvelopeError& e) {
        if (e.code() != ErrorCode::IllConditionedContext) throw;
        std::ostringstream os;
        os << "sweep " << sweep << ": skipped row " << i << " (" << e.what() << ")";
        out.warnings.push_back(os.str());
        continue;
      }
      const Vector before = state->row(i);
      const Vector after = newton_row_update(ctx, before, opts);
      if (after != before) state->set_row(i, after);
      drifted = after.cwiseAbs().maxCoeff() > kAnchorLimit;
    }
    state->refresh();
    bool reanchored = false;
    if (drifted) {
      if (std::optional<CoordParam> next = reanchor(state->coords())) {
        state.emplace(p, *next);
        reanchored = true;
        std::ostringstream os;
        os << "sweep " << sweep << ": re-anchored on new pivot rows";
        out.warnings.push_back(os.str());
      }
    }
    const double cur = state->objective();
    if (!std::isfinite(cur)) fail(ErrorCode::NumericalFailure, "objective is not finite");
    out.sweeps = sweep;
    if (cur > prev) {
      // Row objectives of an ill-conditioned problem carry rounding error;
      // a sweep that raises the full objective is undone.
      state.emplace(p, last);
      std::ostringstream os;
      os << "sweep " << sweep << ": objective rose by " << cur - prev << "; kept the previous iterate";
      out.warnings.push_back(os.str());
      out.converged = true;
      break;
    }
    out.trajectory.push_back(cur);
    const bool done = !reanchored && !sufficient_decrease(prev, cur, opts.rel_tol);
    prev = cur;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.coords = state->coords();
  return out;
}

DescentResult direct_descent(const EnvelopeProblem& p, const CoordParam& a0,
                             const SolverOptions& opts) {
  opts.validate();
  DescentResult out;
  CoordParam cur = a0;
  double f = l_coords(p, cur);
  Vector x = to_vec(cur.a);
  Vector g = coords_gradient(p, cur);
  const Index n = x.size();
  Matrix h_inv = Matrix::Identity(n, n);
  out.trajectory.push_back(f);

  const int max_iter = 20 * opts.max_sweeps;
  for (int it = 1; it <= max_iter; ++it) {
    if (g.norm() < opts.inner_grad_tol) {
      out.converged = true;
      break;
    }
    Vector step = -h_inv * g;
    double slope = g.dot(step);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      step = -g;
      slope = -g.squaredNorm();
    }
    bool accepted = false;
    double t = 1.0;
    Vector x_new;
    double f_new = f;
    for (int hv = 0; hv < kMaxHalvings; ++hv, t *= 0.5) {
      x_new = x + t * step;
      try {
        f_new = l_coords(p, with_vec(cur, x_new));
      } catch (const EnvelopeError& e) {
        if (e.code() != ErrorCode::SingularProjection) throw;
        continue;
      }
      if (std::isfinite(f_new) && f_new <= f + kArmijo * t * slope && f_new < f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    const CoordParam next = with_vec(cur, x_new);
    const Vector g_new = coords_gradient(p, next);
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix id = Matrix::Identity(n, n);
      h_inv = (id - rho * s * y.transpose()) * h_inv * (id - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    const double prev = f;
    x = x_new;
    g = g_new;
    f = f_new;
    cur = next;
    out.trajectory.push_back(f);
    out.sweeps = it;
    if (!sufficient_decrease(prev, f, opts.rel_tol) &&
        g.norm() <= 1e-4 * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
  }
  out.coords = cur;
  return out;
}

EnvelopeFit fit_from_start(const EnvelopeProblem& p, const StartCandidate& start,
                           const SolverOptions& opts) {
  opts.validate();
  const PivotResult piv = pivot_rows(start.basis);

  EnvelopeFit fit{start.basis, start.score, start, 0, false, {start.score}, {}};
  DescentResult descent;
  try {
    descent = opts.mode == SolverMode::RowCyclic ? coordinate_descent(p, piv.coords(), opts)
                                                 : direct_descent(p, piv.coords(), opts);
  } catch (const EnvelopeError& e) {
    if (e.code() != ErrorCode::NumericalFailure) throw;
    fit.warnings.emplace_back(e.what());
    return fit;
  }

  fit.sweeps = descent.sweeps;
  fit.converged = descent.converged;
  fit.trajectory = std::move(descent.trajectory);
  fit.warnings = std::move(descent.warnings);

  Basis gamma = orthonormalize(descent.coords.basis_matrix());
  const double value = l_basis(p, gamma);
  if (value <= start.score) {
    fit.gamma_hat = std::move(gamma);
    fit.objective = value;
  } else {
    fit.warnings.emplace_back("descent did not improve on the start; keeping the start");
  }
  return fit;
}

EnvelopeFit fit_envelope(const EnvelopeProblem& p, const SolverOptions& opts) {
  opts.validate();
  const Index r = p.dim();
  const Index u = p.u();
  if (u == 0) return EnvelopeFit{Basis::empty(r), 0.0, std::nullopt, 0, true, {0.0}, {}};
  if (u == r) {
    Basis id = Basis::identity(r);
    const double value = l_basis(p, id);
    return EnvelopeFit{std::move(id), value, std::nullopt, 0, true, {value}, {}};
  }
  return fit_from_start(p, select_start(p), opts);
}

}  // namespace envelope
