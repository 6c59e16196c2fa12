#include "envelope/objective.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace envelope {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix spd_inverse(const Matrix& m, ErrorCode on_failure, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
    fail(on_failure, what);
  }
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

Matrix select_columns(const Matrix& m, std::span<const Index> idx) {
  Matrix out(m.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = m.col(idx[j]);
  return out;
}

// Validates an eigenvector index set and returns the complementary indices.
std::vector<Index> complement_indices(const EnvelopeProblem& p, std::span<const Index> idx) {
  const Index r = p.dim();
  if (static_cast<Index>(idx.size()) != p.u()) {
    std::ostringstream os;
    os << "expected " << p.u() << " eigenvector indices, got " << idx.size();
    fail(ErrorCode::InvalidInput, os.str());
  }
  std::vector<bool> used(static_cast<std::size_t>(r), false);
  for (Index i : idx) {
    if (i < 0 || i >= r) fail(ErrorCode::InvalidInput, "eigenvector index out of range");
    if (used[static_cast<std::size_t>(i)]) {
      fail(ErrorCode::InvalidInput, "duplicate eigenvector index");
    }
    used[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> rest;
  for (Index i = 0; i < r; ++i) {
    if (!used[static_cast<std::size_t>(i)]) rest.push_back(i);
  }
  return rest;
}

}  // namespace

// ---------------------------------------------------------------------------
// EnvelopeProblem

std::shared_ptr<const EnvelopeProblem::Cache> EnvelopeProblem::build_cache(SpdMatrix m_hat,
                                                                           SymmetricMatrix u_hat) {
  const Index r = m_hat.dim();
  if (u_hat.dim() != r) {
    std::ostringstream os;
    os << "M is " << r << "x" << r << " but U is " << u_hat.dim() << "x" << u_hat.dim();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> u_eig(u_hat.matrix(), Eigen::EigenvaluesOnly);
  const double u_norm = u_eig.eigenvalues().cwiseAbs().maxCoeff();
  if (u_eig.eigenvalues().minCoeff() < -1e-8 * std::max(u_norm, 1e-300)) {
    fail(ErrorCode::InvalidInput, "U is not positive semi-definite");
  }

  SpdMatrix sum(SymmetricMatrix(m_hat.matrix() + u_hat.matrix()));
  Matrix sum_inv = sum.inverse();
  SpdRoots m_roots = spd_roots(m_hat);
  SpdRoots sum_roots = spd_roots(sum);
  Matrix u_std_m = symmetrize(m_roots.inv_sqrt.matrix() * u_hat.matrix() * m_roots.inv_sqrt.matrix());
  Matrix u_std_sum =
      symmetrize(sum_roots.inv_sqrt.matrix() * u_hat.matrix() * sum_roots.inv_sqrt.matrix());
  EigenDecomposition eigen_m = eigen_sym(m_hat.symmetric());
  EigenDecomposition eigen_sum = eigen_sym(sum.symmetric());

  return std::make_shared<const Cache>(Cache{
      std::move(m_hat), std::move(u_hat), std::move(sum), std::move(sum_inv),
      m_roots.inv_sqrt.matrix(), sum_roots.inv_sqrt.matrix(), std::move(u_std_m),
      std::move(u_std_sum), std::move(eigen_m), std::move(eigen_sum)});
}

EnvelopeProblem::EnvelopeProblem(SpdMatrix m_hat, SymmetricMatrix u_hat, Index u)
    : EnvelopeProblem(build_cache(std::move(m_hat), std::move(u_hat)), u) {}

EnvelopeProblem::EnvelopeProblem(std::shared_ptr<const Cache> cache, Index u)
    : cache_(std::move(cache)), u_(u) {
  if (u_ < 0 || u_ > dim()) {
    std::ostringstream os;
    os << "envelope dimension " << u_ << " outside [0, " << dim() << "]";
    fail(ErrorCode::InvalidInput, os.str());
  }
}

EnvelopeProblem EnvelopeProblem::with_dimension(Index u) const { return EnvelopeProblem(cache_, u); }

// ---------------------------------------------------------------------------
// CoordParam

void CoordParam::validate() const {
  const Index r = dim();
  if (static_cast<Index>(perm.size()) != r) {
    fail(ErrorCode::DimensionMismatch, "permutation length does not match r");
  }
  std::vector<bool> seen(perm.size(), false);
  for (Index k : perm) {
    if (k < 0 || k >= r || seen[static_cast<std::size_t>(k)]) {
      fail(ErrorCode::InvalidInput, "row permutation is not a bijection");
    }
    seen[static_cast<std::size_t>(k)] = true;
  }
  if (!a.allFinite()) fail(ErrorCode::InvalidInput, "coordinates are not finite");
}

Matrix CoordParam::basis_matrix() const {
  const Index u = this->u();
  Matrix c(dim(), u);
  for (Index k = 0; k < u; ++k) {
    c.row(perm[static_cast<std::size_t>(k)]) = Matrix::Identity(u, u).row(k);
  }
  for (Index i = 0; i < a.rows(); ++i) c.row(original_row(i)) = a.row(i);
  return c;
}

// ---------------------------------------------------------------------------
// Objectives

double l_basis(const EnvelopeProblem& p, const Basis& g) {
  if (g.rows() != p.dim() || g.cols() != p.u()) {
    std::ostringstream os;
    os << "basis is " << g.rows() << "x" << g.cols() << ", problem expects " << p.dim() << "x"
       << p.u();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  const Matrix& gm = g.matrix();
  return log_det_spd(gm.transpose() * p.m_hat().matrix() * gm, ErrorCode::SingularProjection) +
         log_det_spd(gm.transpose() * p.sum_inv() * gm, ErrorCode::SingularProjection);
}

double l_coords(const EnvelopeProblem& p, const CoordParam& c) {
  c.validate();
  if (c.dim() != p.dim() || c.u() != p.u()) {
    fail(ErrorCode::DimensionMismatch, "coordinates do not match the problem");
  }
  const Matrix cm = c.basis_matrix();
  return -2.0 * log_det_spd(cm.transpose() * cm, ErrorCode::SingularProjection) +
         log_det_spd(cm.transpose() * p.m_hat().matrix() * cm, ErrorCode::SingularProjection) +
         log_det_spd(cm.transpose() * p.sum_inv() * cm, ErrorCode::SingularProjection);
}

RowContext row_context(const EnvelopeProblem& p, const CoordParam& c, Index i) {
  return CoordState(p, c).context(i);
}

double l_row(const Vector& a, const RowContext& ctx) {
  const double t = 1.0 + a.dot(ctx.gram_inv * a);
  const Vector d1 = a + ctx.offset1;
  const Vector d2 = a + ctx.offset2;
  const double q1 = 1.0 + ctx.m22 * d1.dot(ctx.w1_inv * d1);
  const double q2 = 1.0 + ctx.v22 * d2.dot(ctx.w2_inv * d2);
  return -2.0 * std::log(t) + std::log(q1) + std::log(q2);
}

RowDerivatives l_row_derivatives(const Vector& a, const RowContext& ctx) {
  RowDerivatives out;
  const Index u = a.size();
  out.gradient = Vector::Zero(u);
  out.hessian = Matrix::Zero(u, u);

  // Each term is coef·log(1 + s·dᵀQd) with d = a + offset.
  auto add_term = [&](double coef, double s, const Matrix& q, const Vector& d) {
    const Vector qd = q * d;
    const double arg = 1.0 + s * d.dot(qd);
    out.value += coef * std::log(arg);
    out.gradient += (2.0 * coef * s / arg) * qd;
    out.hessian += (2.0 * coef * s / arg) * q - (4.0 * coef * s * s / (arg * arg)) * (qd * qd.transpose());
  };
  add_term(-2.0, 1.0, ctx.gram_inv, a);
  add_term(1.0, ctx.m22, ctx.w1_inv, a + ctx.offset1);
  add_term(1.0, ctx.v22, ctx.w2_inv, a + ctx.offset2);
  out.hessian = symmetrize(out.hessian);
  return out;
}

double j_objective(const EnvelopeProblem& p, std::span<const Index> idx) {
  const std::vector<Index> rest = complement_indices(p, idx);
  const Matrix g = select_columns(p.eigen_m().vectors.matrix(), idx);
  const Matrix g0 = select_columns(p.eigen_m().vectors.matrix(), rest);
  const Matrix& m = p.m_hat().matrix();
  const double j1 = log_det_spd(g.transpose() * m * g, ErrorCode::SingularProjection) +
                    log_det_spd(g0.transpose() * m * g0, ErrorCode::SingularProjection);
  const Index k = g0.cols();
  const double j2 = log_det_spd(Matrix::Identity(k, k) + g0.transpose() * p.u_std_m() * g0,
                                ErrorCode::SingularProjection);
  return j1 + j2;
}

double j_star_objective(const EnvelopeProblem& p, std::span<const Index> idx) {
  complement_indices(p, idx);
  const Matrix g = select_columns(p.eigen_sum().vectors.matrix(), idx);
  const Matrix& s = p.sum().matrix();
  const double j1 = log_det_spd(g.transpose() * s * g, ErrorCode::SingularProjection) +
                    log_det_spd(g.transpose() * p.sum_inv() * g, ErrorCode::SingularProjection);
  const Index u = g.cols();
  const double j2 = log_det_spd(Matrix::Identity(u, u) - g.transpose() * p.u_std_sum() * g,
                                ErrorCode::SingularProjection);
  return j1 + j2;
}

// ---------------------------------------------------------------------------
// CoordState

CoordState::CoordState(const EnvelopeProblem& p, const CoordParam& c)
    : problem_(&p), perm_(c.perm), u_(c.u()) {
  c.validate();
  if (c.dim() != p.dim() || c.u() != p.u()) {
    fail(ErrorCode::DimensionMismatch, "coordinates do not match the problem");
  }
  c_ = c.basis_matrix();
  refresh();
}

void CoordState::refresh() {
  mc_ = problem_->m_hat().matrix() * c_;
  vc_ = problem_->sum_inv() * c_;
  ctc_ = symmetrize(c_.transpose() * c_);
  ctmc_ = symmetrize(c_.transpose() * mc_);
  ctvc_ = symmetrize(c_.transpose() * vc_);
}

Vector CoordState::row(Index i) const {
  return c_.row(perm_[static_cast<std::size_t>(u_ + i)]).transpose();
}

RowContext CoordState::context(Index i) const {
  const Index rows_a = c_.rows() - u_;
  if (i < 0 || i >= rows_a) {
    std::ostringstream os;
    os << "row " << i << " outside [0, " << rows_a << ")";
    fail(ErrorCode::InvalidInput, os.str());
  }
  const Index k = perm_[static_cast<std::size_t>(u_ + i)];
  const Vector a = c_.row(k).transpose();

  RowContext ctx;
  ctx.row = i;

  // With C₀ = C_A with row k zeroed: C₀ᵀXC₀ = CᵀXC − a·xᵀ − x·aᵀ + X_kk·aaᵀ,
  // where x = (XC)_k, and C₀ᵀX_{·k} = x − X_kk·a.
  auto reduce = [&](const Matrix& xc, const Matrix& ctxc, double xkk, Matrix& w, Vector& offset) {
    const Vector xk = xc.row(k).transpose();
    const Vector cross = xk - xkk * a;
    const Matrix c0xc0 = ctxc - a * xk.transpose() - xk * a.transpose() + xkk * a * a.transpose();
    w = symmetrize(c0xc0 - cross * cross.transpose() / xkk);
    offset = cross / xkk;
  };

  ctx.m22 = problem_->m_hat().matrix()(k, k);
  ctx.v22 = problem_->sum_inv()(k, k);
  if (!(ctx.m22 > 0.0) || !(ctx.v22 > 0.0)) {
    fail(ErrorCode::IllConditionedContext, "non-positive diagonal element");
  }
  reduce(mc_, ctmc_, ctx.m22, ctx.w1, ctx.offset1);
  reduce(vc_, ctvc_, ctx.v22, ctx.w2, ctx.offset2);
  ctx.w1_inv = spd_inverse(ctx.w1, ErrorCode::IllConditionedContext, "W1 is not positive definite");
  ctx.w2_inv = spd_inverse(ctx.w2, ErrorCode::IllConditionedContext, "W2 is not positive definite");
  ctx.gram_inv = spd_inverse(symmetrize(ctc_ - a * a.transpose()), ErrorCode::IllConditionedContext,
                             "C_A1^T C_A1 is not positive definite");
  return ctx;
}

void CoordState::set_row(Index i, const Vector& a_new) {
  const Index k = perm_[static_cast<std::size_t>(u_ + i)];
  const Vector a_old = c_.row(k).transpose();
  const Vector delta = a_new - a_old;
  const double mkk = problem_->m_hat().matrix()(k, k);
  const double vkk = problem_->sum_inv()(k, k);

  // C' = C + e_k·δᵀ.
  const Vector mk = mc_.row(k).transpose();
  const Vector vk = vc_.row(k).transpose();
  ctmc_ += mk * delta.transpose() + delta * mk.transpose() + mkk * delta * delta.transpose();
  ctvc_ += vk * delta.transpose() + delta * vk.transpose() + vkk * delta * delta.transpose();
  ctc_ += a_old * delta.transpose() + delta * a_old.transpose() + delta * delta.transpose();
  mc_.noalias() += problem_->m_hat().matrix().col(k) * delta.transpose();
  vc_.noalias() += problem_->sum_inv().col(k) * delta.transpose();
  c_.row(k) = a_new.transpose();
}

double CoordState::objective() const {
  return -2.0 * log_det_spd(ctc_, ErrorCode::SingularProjection) +
         log_det_spd(ctmc_, ErrorCode::SingularProjection) +
         log_det_spd(ctvc_, ErrorCode::SingularProjection);
}

CoordParam CoordState::coords() const {
  CoordParam out;
  out.perm = perm_;
  out.a.resize(c_.rows() - u_, u_);
  for (Index i = 0; i < out.a.rows(); ++i) out.a.row(i) = c_.row(perm_[static_cast<std::size_t>(u_ + i)]);
  return out;
}

}  // namespace envelope
