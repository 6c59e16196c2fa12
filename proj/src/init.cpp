#include "envelope/init.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace envelope {

std::string_view to_string(StartCriterion c) {
  switch (c) {
    case StartCriterion::KM: return "K_M";
    case StartCriterion::KMU: return "K_MU";
    case StartCriterion::KMUnstd: return "K_M_unstd";
    case StartCriterion::KMUUnstd: return "K_MU_unstd";
  }
  return "?";
}

std::optional<StartCriterion> parse_start_criterion(std::string_view name) {
  for (StartCriterion c : kStartOrder) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

bool sourced_from_sum(StartCriterion c) {
  return c == StartCriterion::KMU || c == StartCriterion::KMUUnstd;
}

bool standardized(StartCriterion c) { return c == StartCriterion::KM || c == StartCriterion::KMU; }

StartCandidate candidate(const EnvelopeProblem& p, StartCriterion criterion) {
  const Index u = p.u();
  if (u < 1) fail(ErrorCode::InvalidInput, "starting values need u >= 1");

  const EigenDecomposition& eig = sourced_from_sum(criterion) ? p.eigen_sum() : p.eigen_m();
  const Matrix* weight = &p.u_hat().matrix();
  if (criterion == StartCriterion::KM) weight = &p.u_std_m();
  if (criterion == StartCriterion::KMU) weight = &p.u_std_sum();

  const Matrix& v = eig.vectors.matrix();
  const Index r = v.cols();
  const Vector scores = (v.transpose() * (*weight) * v).diagonal();

  // Scores within rounding of each other count as tied.
  const double tie_tol = 1e-12 * std::max(1.0, scores.cwiseAbs().maxCoeff());
  std::vector<Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    if (std::abs(scores(x) - scores(y)) > tie_tol) return scores(x) > scores(y);
    if (eig.values(x) != eig.values(y)) return eig.values(x) > eig.values(y);
    return x < y;
  });
  order.resize(static_cast<std::size_t>(u));

  Matrix g(v.rows(), u);
  for (Index j = 0; j < u; ++j) g.col(j) = v.col(order[static_cast<std::size_t>(j)]);
  Basis basis(g, 1e-10 * std::max<Index>(1, r / 50));
  const double score = l_basis(p, basis);
  return StartCandidate{criterion, std::move(basis), std::move(order), score};
}

StartCandidate select_start(const EnvelopeProblem& p) {
  std::optional<StartCandidate> best;
  std::optional<EnvelopeError> last_error;
  for (StartCriterion c : kStartOrder) {
    try {
      StartCandidate cand = candidate(p, c);
      if (!best || cand.score < best->score) best = std::move(cand);
    } catch (const EnvelopeError& e) {
      if (e.code() != ErrorCode::SingularProjection) throw;
      last_error = e;
    }
  }
  if (!best) throw *last_error;
  return std::move(*best);
}

PivotResult pivot_rows(const Basis& g) {
  const Index r = g.rows();
  const Index u = g.cols();
  if (u < 1) fail(ErrorCode::InvalidInput, "pivoting needs u >= 1");

  Matrix work = g.matrix();
  std::vector<Index> rows(static_cast<std::size_t>(r));
  std::iota(rows.begin(), rows.end(), Index{0});

  // rows[j] tracks which original row sits at working position j.
  for (Index j = 0; j < u; ++j) {
    Index best = j;
    double best_abs = std::abs(work(j, j));
    for (Index i = j + 1; i < r; ++i) {
      const double v = std::abs(work(i, j));
      if (v > best_abs) {
        best_abs = v;
        best = i;
      }
    }
    if (!(best_abs > 0.0)) fail(ErrorCode::PivotFailure, "zero pivot column");
    if (best != j) {
      work.row(j).swap(work.row(best));
      std::swap(rows[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(best)]);
    }
    for (Index i = j + 1; i < r; ++i) {
      const double factor = work(i, j) / work(j, j);
      if (factor != 0.0) work.row(i).tail(u - j) -= factor * work.row(j).tail(u - j);
    }
  }

  PivotResult out;
  out.perm.assign(rows.begin(), rows.begin() + u);
  std::vector<Index> rest(rows.begin() + u, rows.end());
  std::sort(rest.begin(), rest.end());
  out.perm.insert(out.perm.end(), rest.begin(), rest.end());

  const Matrix& gm = g.matrix();
  out.anchored_block.resize(u, u);
  for (Index j = 0; j < u; ++j) out.anchored_block.row(j) = gm.row(out.perm[static_cast<std::size_t>(j)]);

  Eigen::JacobiSVD<Matrix> svd(out.anchored_block);
  const auto& sv = svd.singularValues();
  const double cond = sv(u - 1) > 0.0 ? sv(0) / sv(u - 1) : INFINITY;
  if (!(cond <= 1e12)) fail(ErrorCode::PivotFailure, "anchored block is numerically singular");

  Matrix rest_rows(r - u, u);
  for (Index i = 0; i < r - u; ++i) rest_rows.row(i) = gm.row(out.perm[static_cast<std::size_t>(u + i)]);
  // A = G₂·G₁⁻¹  ⇔  G₁ᵀ·Aᵀ = G₂ᵀ.
  Eigen::PartialPivLU<Matrix> lu(out.anchored_block.transpose());
  out.a_init = lu.solve(rest_rows.transpose()).transpose();
  return out;
}

}  // namespace envelope
