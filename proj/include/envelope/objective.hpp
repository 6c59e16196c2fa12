#pragma once

// Envelope objective L_u(G) = log|GᵀMG| + log|Gᵀ(M+U)⁻¹G| in its three
// forms: on semi-orthogonal bases, on the unconstrained coordinates A with
// G ∝ [I_u; A], and restricted to a single row of A. Also the J / J*
// criteria that characterize the best eigenvector subsets.

#include <memory>
#include <span>
#include <vector>

#include "envelope/matrix_kernel.hpp"

namespace envelope {

/// The pair (M̂, Û) and the target dimension u. Derived matrices are
/// computed once and shared between copies (see `with_dimension`).
class EnvelopeProblem {
 public:
  EnvelopeProblem(SpdMatrix m_hat, SymmetricMatrix u_hat, Index u);

  Index dim() const { return cache_->m_hat.dim(); }
  Index u() const { return u_; }

  const SpdMatrix& m_hat() const { return cache_->m_hat; }
  const SymmetricMatrix& u_hat() const { return cache_->u_hat; }
  /// M̂ + Û.
  const SpdMatrix& sum() const { return cache_->sum; }
  /// (M̂ + Û)⁻¹.
  const Matrix& sum_inv() const { return cache_->sum_inv; }
  const Matrix& m_inv_sqrt() const { return cache_->m_inv_sqrt; }
  const Matrix& sum_inv_sqrt() const { return cache_->sum_inv_sqrt; }
  /// Û standardized by M̂^{-1/2} on both sides.
  const Matrix& u_std_m() const { return cache_->u_std_m; }
  /// Û standardized by (M̂+Û)^{-1/2} on both sides.
  const Matrix& u_std_sum() const { return cache_->u_std_sum; }
  const EigenDecomposition& eigen_m() const { return cache_->eigen_m; }
  const EigenDecomposition& eigen_sum() const { return cache_->eigen_sum; }

  /// Same matrices, different target dimension; shares the cache.
  EnvelopeProblem with_dimension(Index u) const;

 private:
  struct Cache {
    SpdMatrix m_hat;
    SymmetricMatrix u_hat;
    SpdMatrix sum;
    Matrix sum_inv;
    Matrix m_inv_sqrt;
    Matrix sum_inv_sqrt;
    Matrix u_std_m;
    Matrix u_std_sum;
    EigenDecomposition eigen_m;
    EigenDecomposition eigen_sum;
  };

  EnvelopeProblem(std::shared_ptr<const Cache> cache, Index u);
  static std::shared_ptr<const Cache> build_cache(SpdMatrix m_hat, SymmetricMatrix u_hat);

  std::shared_ptr<const Cache> cache_;
  Index u_;
};

/// Coordinates A of a u-dimensional subspace. Row perm[k] of the original
/// ordering holds row k of C_A = [I_u; A]; the first u entries of perm are
/// the anchored rows.
struct CoordParam {
  Matrix a;                 // (r−u)×u
  std::vector<Index> perm;  // bijection on {0..r−1}

  Index dim() const { return a.rows() + a.cols(); }
  Index u() const { return a.cols(); }
  /// Original row index of coordinate row i of A.
  Index original_row(Index i) const { return perm[static_cast<std::size_t>(a.cols() + i)]; }

  /// Throws InvalidInput unless perm is a bijection matching the shape of a.
  void validate() const;
  /// C_A laid out in the original row order (r×u, not orthonormal).
  Matrix basis_matrix() const;
};

/// Quantities that make L_u(a | A₁) cheap to evaluate for one row of A
/// with all other rows fixed. W1, W2 are held by their Cholesky factors.
struct RowContext {
  Index row = 0;  // coordinate row of A (0-based)
  Matrix w1;
  Matrix w2;
  Vector offset1;  // M̂₂₂⁻¹·C_{A₁}ᵀM̂₁₂
  Vector offset2;  // V̂₂₂⁻¹·C_{A₁}ᵀV̂₁₂ with V̂ = (M̂+Û)⁻¹
  double m22 = 0.0;
  double v22 = 0.0;
  Matrix gram_inv;  // (C_{A₁}ᵀC_{A₁})⁻¹
  Matrix w1_inv;
  Matrix w2_inv;
};

struct RowDerivatives {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

double l_basis(const EnvelopeProblem& p, const Basis& g);
double l_coords(const EnvelopeProblem& p, const CoordParam& c);

/// Context for coordinate row i (0-based) of A, built from scratch.
RowContext row_context(const EnvelopeProblem& p, const CoordParam& c, Index i);

/// Conditional row objective, up to an additive constant in a.
double l_row(const Vector& a, const RowContext& ctx);
RowDerivatives l_row_derivatives(const Vector& a, const RowContext& ctx);

/// J = J₁ + J₂ over the eigenvectors of M̂ with the given indices.
double j_objective(const EnvelopeProblem& p, std::span<const Index> idx);
/// J* = J₁* + J₂* over the eigenvectors of M̂ + Û with the given indices.
double j_star_objective(const EnvelopeProblem& p, std::span<const Index> idx);

/// Running products C, M̂C, V̂C, CᵀC, CᵀM̂C, CᵀV̂C for C = C_A in original
/// row order. Row updates are rank-one, so each costs O(r·u) instead of the
/// O(r²·u) of rebuilding.
class CoordState {
 public:
  CoordState(const EnvelopeProblem& p, const CoordParam& c);

  /// Recompute every product from C (clears accumulated rounding).
  void refresh();
  RowContext context(Index i) const;
  void set_row(Index i, const Vector& a);
  Vector row(Index i) const;
  /// L_u(A) from the maintained products.
  double objective() const;
  CoordParam coords() const;

 private:
  const EnvelopeProblem* problem_;
  std::vector<Index> perm_;
  Index u_;
  Matrix c_;
  Matrix mc_;
  Matrix vc_;
  Matrix ctc_;
  Matrix ctmc_;
  Matrix ctvc_;
};

}  // namespace envelope
