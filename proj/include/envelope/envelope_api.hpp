#pragma once

// Response envelopes for the multivariate linear model Y = α + βX + ε, the
// generic (M̂, Û) entry point, and cross-validated choice of u.

#include <cstdint>
#include <span>
#include <vector>

#include "envelope/solver.hpp"

namespace envelope {

/// n observations of p predictors (X) and r responses (Y), one per row.
class RegressionData {
 public:
  RegressionData(Matrix x, Matrix y);

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  Index r() const { return y_.cols(); }
  const Matrix& x() const { return x_; }
  const Matrix& y() const { return y_; }

  /// Rows `idx` of both X and Y.
  RegressionData subset(std::span<const Index> idx) const;

 private:
  Matrix x_;
  Matrix y_;
};

/// Sample moments with divisor n.
struct ResponseMoments {
  Vector x_mean;
  Vector y_mean;
  Matrix b;            // r×p OLS coefficients S_YX·S_X⁻¹
  Matrix s_x;          // p×p
  Matrix s_y;          // r×r
  Matrix s_y_given_x;  // r×r, S_Y − B·S_X·Bᵀ
};

struct ResponseEnvelopeFit {
  Basis gamma_hat;
  Matrix beta_hat;   // r×p
  Vector alpha_hat;  // r
  Matrix omega_hat;   // u×u
  Matrix omega0_hat;  // (r−u)×(r−u)
  Matrix sigma_hat;   // r×r
  Matrix ols_beta;    // r×p
  EnvelopeFit fit;

  /// α̂ + β̂·x for each row of `x`.
  Matrix predict(const Matrix& x) const;
};

struct CvEntry {
  Index u = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
};

struct CvReport {
  std::vector<CvEntry> per_u;
  Index selected_u = 0;
  int folds = 0;
  int reps = 0;
};

/// Throws SingularDesign when S_X is not invertible.
ResponseMoments response_moments(const RegressionData& d);

/// The envelope problem of a response regression: M̂ = S_{Y|X}, Û = B·S_X·Bᵀ.
EnvelopeProblem response_problem(const ResponseMoments& m, Index u);

ResponseEnvelopeFit fit_response_envelope(const RegressionData& d, Index u,
                                          const SolverOptions& opts = {});
ResponseEnvelopeFit fit_response_envelope(const ResponseMoments& m, Index u,
                                          const SolverOptions& opts = {});

/// Response-envelope quantities for a basis chosen elsewhere (a starting
/// value, say). `fit` is left default apart from gamma_hat.
ResponseEnvelopeFit response_fit_from_basis(const ResponseMoments& m, const Basis& gamma);

EnvelopeFit generic_envelope(const SpdMatrix& m_hat, const SymmetricMatrix& u_hat, Index u,
                             const SolverOptions& opts = {});

/// Repeated k-fold cross-validation of the prediction error
/// mean over held-out rows of ‖Y_i − Ŷ_i‖²/r, for every u in `u_range`.
/// Ties in the mean error go to the smaller u.
CvReport cv_select_u(const RegressionData& d, std::span<const Index> u_range, int folds, int reps,
                     std::uint64_t seed, const SolverOptions& opts = {}, int threads = 1);

}  // namespace envelope
