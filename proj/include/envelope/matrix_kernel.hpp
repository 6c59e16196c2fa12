#pragma once

// Dense symmetric linear algebra used throughout the envelope estimators:
// validated symmetric / SPD matrix types, semi-orthogonal bases, symmetric
// eigendecomposition, SPD square roots, Cholesky log-determinants and
// principal angles between subspaces.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "envelope/error.hpp"

namespace envelope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Square matrix whose storage is exactly symmetric.
///
/// Construction accepts inputs that are symmetric up to rounding
/// (relative asymmetry below 1e-8) and replaces them by (S + Sᵀ)/2.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& entries);

  Index dim() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Symmetric matrix verified positive definite by a successful Cholesky
/// factorization. The factor is kept for solves and log-determinants.
class SpdMatrix {
 public:
  explicit SpdMatrix(SymmetricMatrix base);
  explicit SpdMatrix(const Matrix& entries) : SpdMatrix(SymmetricMatrix(entries)) {}

  Index dim() const { return base_.dim(); }
  const Matrix& matrix() const { return base_.matrix(); }
  const SymmetricMatrix& symmetric() const { return base_; }
  const Eigen::LLT<Matrix>& cholesky() const { return llt_; }

  double log_det() const;
  Matrix inverse() const;

 private:
  SymmetricMatrix base_;
  Eigen::LLT<Matrix> llt_;
};

/// r×u matrix with orthonormal columns (GᵀG = I_u within `tol`). u may be 0.
class Basis {
 public:
  static constexpr double kDefaultTolerance = 1e-10;

  explicit Basis(const Matrix& entries, double tol = kDefaultTolerance);

  static Basis empty(Index rows);
  static Basis identity(Index rows);

  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  const Matrix& matrix() const { return entries_; }

  /// Projection G·Gᵀ onto the spanned subspace.
  Matrix projection() const { return entries_ * entries_.transpose(); }

 private:
  Matrix entries_;
};

struct EigenDecomposition {
  Vector values;  // descending
  Basis vectors;  // column k pairs with values(k)
};

struct SpdRoots {
  SpdMatrix sqrt;
  SpdMatrix inv_sqrt;
};

/// Symmetric eigendecomposition with eigenvalues in descending order.
/// Each eigenvector is signed so that its largest-magnitude entry is
/// positive (first such entry on ties).
EigenDecomposition eigen_sym(const SymmetricMatrix& s);

/// S^{1/2} and S^{-1/2} built from the eigendecomposition of S.
SpdRoots spd_roots(const SpdMatrix& s);

/// Largest principal angle between span(a) and span(b), in degrees.
double subspace_angle_deg(const Basis& a, const Basis& b);

/// Thin QR orthonormalization with a positive triangular diagonal.
/// Throws RankDeficient when the columns are (numerically) dependent.
Basis orthonormalize(const Matrix& m);

/// Orthonormal basis of the orthogonal complement of span(g), r×(r−u).
Basis orthogonal_complement(const Basis& g);

/// log|S| from a Cholesky factor. Throws `on_failure` when S is not PD.
double log_det_spd(const Matrix& s, ErrorCode on_failure = ErrorCode::NotPositiveDefinite);

/// Element-wise finiteness.
bool all_finite(const Matrix& m);

}  // namespace envelope
