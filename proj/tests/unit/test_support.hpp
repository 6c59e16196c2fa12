#pragma once

// Random fixtures and independent oracles shared by the unit tests.

#include <Eigen/LU>
#include <Eigen/QR>
#include <random>

#include "envelope/objective.hpp"

namespace envelope::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

inline Matrix random_spd(Index r, std::mt19937_64& rng, double ridge = 0.5) {
  const Matrix f = random_matrix(r, r, rng);
  return f * f.transpose() / static_cast<double>(r) + ridge * Matrix::Identity(r, r);
}

inline Matrix random_psd(Index r, Index rank, std::mt19937_64& rng) {
  const Matrix f = random_matrix(r, rank, rng);
  return f * f.transpose();
}

// Orthonormal columns via Gram–Schmidt, independent of the library's QR.
inline Matrix gram_schmidt(const Matrix& m) {
  Matrix q = m;
  for (Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    }
    q.col(j).normalize();
  }
  return q;
}

inline Matrix random_semi_orthogonal(Index r, Index u, std::mt19937_64& rng) {
  return gram_schmidt(random_matrix(r, u, rng));
}

inline Matrix random_orthogonal(Index u, std::mt19937_64& rng) {
  return gram_schmidt(random_matrix(u, u, rng));
}

inline EnvelopeProblem random_problem(Index r, Index u, std::mt19937_64& rng, Index u_rank = -1) {
  return EnvelopeProblem(SpdMatrix(random_spd(r, rng)),
                         SymmetricMatrix(random_psd(r, u_rank < 0 ? r : u_rank, rng)), u);
}

// log|S| by partial-pivot LU, independent of the Cholesky route.
inline double log_det_lu(const Matrix& s) {
  return std::log(std::abs(s.partialPivLu().determinant()));
}

// L_u straight from its definition, with LU determinants and an explicit inverse.
inline double l_basis_oracle(const Matrix& m, const Matrix& u_hat, const Matrix& g) {
  const Matrix v = (m + u_hat).inverse();
  return log_det_lu(g.transpose() * m * g) + log_det_lu(g.transpose() * v * g);
}

}  // namespace envelope::testing
