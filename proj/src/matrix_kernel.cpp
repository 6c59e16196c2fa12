#include "envelope/matrix_kernel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace envelope {

namespace {

constexpr double kSymmetryTolerance = 1e-8;

double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

SymmetricMatrix::SymmetricMatrix(const Matrix& entries) {
  if (entries.rows() < 1 || entries.rows() != entries.cols()) {
    std::ostringstream os;
    os << "symmetric matrix must be square and non-empty, got " << entries.rows() << "x"
       << entries.cols();
    fail(ErrorCode::InvalidInput, os.str());
  }
  if (!entries.allFinite()) fail(ErrorCode::InvalidInput, "matrix has non-finite entries");
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    std::ostringstream os;
    os << "matrix is not symmetric (max |S - S^T| = " << asym << ")";
    fail(ErrorCode::InvalidInput, os.str());
  }
  entries_ = 0.5 * (entries + entries.transpose());
}

SpdMatrix::SpdMatrix(SymmetricMatrix base) : base_(std::move(base)), llt_(base_.matrix()) {
  if (llt_.info() != Eigen::Success) {
    fail(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  const auto diag = llt_.matrixLLT().diagonal();
  if (!diag.allFinite() || diag.minCoeff() <= 0.0) {
    fail(ErrorCode::NotPositiveDefinite, "Cholesky factor has a non-positive pivot");
  }
}

double SpdMatrix::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix SpdMatrix::inverse() const {
  Matrix inv = llt_.solve(Matrix::Identity(dim(), dim()));
  return 0.5 * (inv + inv.transpose());
}

Basis::Basis(const Matrix& entries, double tol) : entries_(entries) {
  if (entries_.cols() > entries_.rows()) {
    fail(ErrorCode::InvalidInput, "basis has more columns than rows");
  }
  if (!entries_.allFinite()) fail(ErrorCode::InvalidInput, "basis has non-finite entries");
  if (entries_.cols() > 0) {
    const Index u = entries_.cols();
    const double err =
        (entries_.transpose() * entries_ - Matrix::Identity(u, u)).cwiseAbs().maxCoeff();
    if (err > tol) {
      std::ostringstream os;
      os << "columns are not orthonormal (max |G^T G - I| = " << err << ")";
      fail(ErrorCode::InvalidInput, os.str());
    }
  }
}

Basis Basis::empty(Index rows) { return Basis(Matrix(rows, 0)); }

Basis Basis::identity(Index rows) { return Basis(Matrix::Identity(rows, rows)); }

EigenDecomposition eigen_sym(const SymmetricMatrix& s) {
  const Index r = s.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s.matrix());
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order.
  Vector values = solver.eigenvalues().reverse();
  Matrix vectors = solver.eigenvectors().rowwise().reverse();
  for (Index k = 0; k < r; ++k) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < r; ++i) {
      const double mag = std::abs(vectors(i, k));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (vectors(arg, k) < 0.0) vectors.col(k) *= -1.0;
  }
  // The solver's vectors are orthonormal to ~r·eps; allow for that at large r.
  return EigenDecomposition{std::move(values), Basis(vectors, 1e-10 * std::max<Index>(1, r / 50))};
}

SpdRoots spd_roots(const SpdMatrix& s) {
  const EigenDecomposition eig = eigen_sym(s.symmetric());
  if (eig.values.minCoeff() <= 0.0) {
    fail(ErrorCode::NotPositiveDefinite, "eigenvalue is not positive");
  }
  const Matrix& v = eig.vectors.matrix();
  const Vector root = eig.values.array().sqrt();
  Matrix sqrt_m = v * root.asDiagonal() * v.transpose();
  Matrix inv_sqrt_m = v * root.cwiseInverse().asDiagonal() * v.transpose();
  return SpdRoots{SpdMatrix(SymmetricMatrix(0.5 * (sqrt_m + sqrt_m.transpose()))),
                  SpdMatrix(SymmetricMatrix(0.5 * (inv_sqrt_m + inv_sqrt_m.transpose())))};
}

double subspace_angle_deg(const Basis& a, const Basis& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "angle between " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x"
       << b.cols() << " bases";
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  if (a.cols() == 0) fail(ErrorCode::InvalidInput, "angle between empty subspaces");

  const Matrix cross = a.matrix().transpose() * b.matrix();
  Eigen::JacobiSVD<Matrix> svd(cross);
  const double sigma_min = std::clamp(svd.singularValues().minCoeff(), 0.0, 1.0);
  if (sigma_min * sigma_min < 0.5) return rad_to_deg(std::acos(sigma_min));

  // Small angles: arccos loses all precision near 1, so take the same angle
  // from the sine side, sin(theta_max) = ||(I - A A^T) B||_2.
  const Matrix residual = b.matrix() - a.matrix() * cross;
  Eigen::SelfAdjointEigenSolver<Matrix> gram(residual.transpose() * residual,
                                             Eigen::EigenvaluesOnly);
  const double sin_max = std::sqrt(std::max(0.0, gram.eigenvalues().maxCoeff()));
  return rad_to_deg(std::asin(std::clamp(sin_max, 0.0, 1.0)));
}

Basis orthonormalize(const Matrix& m) {
  const Index r = m.rows();
  const Index k = m.cols();
  if (k > r) fail(ErrorCode::RankDeficient, "more columns than rows");
  if (!m.allFinite()) fail(ErrorCode::InvalidInput, "matrix has non-finite entries");
  if (k == 0) return Basis::empty(r);

  Eigen::HouseholderQR<Matrix> qr(m);
  const Matrix rfac = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Matrix q = qr.householderQ() * Matrix::Identity(r, k);

  const double scale = m.colwise().norm().maxCoeff();
  for (Index j = 0; j < k; ++j) {
    const double d = rfac(j, j);
    if (!(std::abs(d) > 1e-12 * scale)) {
      fail(ErrorCode::RankDeficient, "columns are linearly dependent");
    }
    if (d < 0.0) q.col(j) *= -1.0;
  }
  return Basis(q, 1e-10 * std::max<Index>(1, r / 50));
}

Basis orthogonal_complement(const Basis& g) {
  const Index r = g.rows();
  const Index u = g.cols();
  if (u == 0) return Basis::identity(r);
  if (u == r) return Basis::empty(r);
  Eigen::HouseholderQR<Matrix> qr(g.matrix());
  Matrix q = qr.householderQ();
  return Basis(q.rightCols(r - u), 1e-10 * std::max<Index>(1, r / 50));
}

double log_det_spd(const Matrix& s, ErrorCode on_failure) {
  if (s.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) fail(on_failure, "matrix is not positive definite");
  const auto diag = llt.matrixLLT().diagonal();
  if (!diag.allFinite() || diag.minCoeff() <= 0.0) {
    fail(on_failure, "matrix is not positive definite");
  }
  return 2.0 * diag.array().log().sum();
}

}  // namespace envelope
