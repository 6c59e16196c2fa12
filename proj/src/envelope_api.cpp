#include "envelope/envelope_api.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "envelope/parallel.hpp"

namespace envelope {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_training_size(Index n, Index p, Index r) {
  if (n <= std::max(p, r)) {
    std::ostringstream os;
    os << "need more than max(p, r) = " << std::max(p, r) << " observations, got " << n;
    fail(ErrorCode::InvalidInput, os.str());
  }
}

}  // namespace

RegressionData::RegressionData(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.rows()) {
    std::ostringstream os;
    os << "X has " << x_.rows() << " rows but Y has " << y_.rows();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  if (x_.cols() < 1 || y_.cols() < 1) fail(ErrorCode::InvalidInput, "X and Y need columns");
  if (!x_.allFinite() || !y_.allFinite()) fail(ErrorCode::InvalidInput, "data are not finite");
  require_training_size(n(), p(), r());
}

RegressionData RegressionData::subset(std::span<const Index> idx) const {
  Matrix xs(static_cast<Index>(idx.size()), p());
  Matrix ys(static_cast<Index>(idx.size()), r());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    xs.row(static_cast<Index>(i)) = x_.row(idx[i]);
    ys.row(static_cast<Index>(i)) = y_.row(idx[i]);
  }
  return RegressionData(std::move(xs), std::move(ys));
}

Matrix ResponseEnvelopeFit::predict(const Matrix& x) const {
  Matrix out = x * beta_hat.transpose();
  out.rowwise() += alpha_hat.transpose();
  return out;
}

ResponseMoments response_moments(const RegressionData& d) {
  const double n = static_cast<double>(d.n());
  ResponseMoments m;
  m.x_mean = d.x().colwise().mean().transpose();
  m.y_mean = d.y().colwise().mean().transpose();
  const Matrix xc = d.x().rowwise() - m.x_mean.transpose();
  const Matrix yc = d.y().rowwise() - m.y_mean.transpose();

  m.s_x = symmetrize(xc.transpose() * xc / n);
  m.s_y = symmetrize(yc.transpose() * yc / n);
  const Matrix s_yx = yc.transpose() * xc / n;

  Eigen::LLT<Matrix> llt(m.s_x);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
    fail(ErrorCode::SingularDesign, "predictor covariance S_X is singular");
  }
  m.b = llt.solve(s_yx.transpose()).transpose();
  // From the residuals rather than S_Y − B·S_X·Bᵀ: the subtraction loses small
  // eigenvalues and leaves rounding-level mass behind after an exact fit.
  const Matrix resid = yc - xc * m.b.transpose();
  m.s_y_given_x = symmetrize(resid.transpose() * resid / n);
  return m;
}

EnvelopeProblem response_problem(const ResponseMoments& m, Index u) {
  // Cholesky alone accepts rounding-level residual covariance from an exact fit,
  // so measure the smallest eigenvalue against the scale of S_Y. An exact fit
  // leaves ratios near 1e-30; near-singular error covariances sit far above.
  const double floor = 1e-20 * std::max(m.s_y.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  const Vector lambda = Eigen::SelfAdjointEigenSolver<Matrix>(m.s_y_given_x, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(lambda.minCoeff() > floor)) {
    fail(ErrorCode::NotPositiveDefinite, "residual covariance S_{Y|X} is singular (responses fitted exactly?)");
  }
  SpdMatrix m_hat(m.s_y_given_x);
  SymmetricMatrix u_hat(symmetrize(m.b * m.s_x * m.b.transpose()));
  return EnvelopeProblem(std::move(m_hat), std::move(u_hat), u);
}

ResponseEnvelopeFit response_fit_from_basis(const ResponseMoments& m, const Basis& gamma) {
  const Index r = m.s_y.rows();
  const Index u = gamma.cols();
  if (gamma.rows() != r) fail(ErrorCode::DimensionMismatch, "basis rows do not match r");

  const Basis gamma0 = orthogonal_complement(gamma);
  const Matrix& g = gamma.matrix();
  const Matrix& g0 = gamma0.matrix();

  ResponseEnvelopeFit out{gamma, Matrix(), Vector(), Matrix(), Matrix(), Matrix(), m.b, EnvelopeFit{gamma, 0.0, std::nullopt, 0, false, {}, {}}};
  if (u == r) {
    out.beta_hat = m.b;
  } else if (u == 0) {
    out.beta_hat = Matrix::Zero(r, m.b.cols());
  } else {
    out.beta_hat = g * (g.transpose() * m.b);
  }
  out.alpha_hat = m.y_mean - out.beta_hat * m.x_mean;
  out.omega_hat = symmetrize(g.transpose() * m.s_y_given_x * g);
  out.omega0_hat = symmetrize(g0.transpose() * m.s_y * g0);
  out.sigma_hat = symmetrize(g * out.omega_hat * g.transpose() + g0 * out.omega0_hat * g0.transpose());
  return out;
}

ResponseEnvelopeFit fit_response_envelope(const ResponseMoments& m, Index u,
                                          const SolverOptions& opts) {
  EnvelopeFit fit = fit_envelope(response_problem(m, u), opts);
  ResponseEnvelopeFit out = response_fit_from_basis(m, fit.gamma_hat);
  out.fit = std::move(fit);
  return out;
}

ResponseEnvelopeFit fit_response_envelope(const RegressionData& d, Index u,
                                          const SolverOptions& opts) {
  return fit_response_envelope(response_moments(d), u, opts);
}

EnvelopeFit generic_envelope(const SpdMatrix& m_hat, const SymmetricMatrix& u_hat, Index u,
                             const SolverOptions& opts) {
  return fit_envelope(EnvelopeProblem(m_hat, u_hat, u), opts);
}

CvReport cv_select_u(const RegressionData& d, std::span<const Index> u_range, int folds, int reps,
                     std::uint64_t seed, const SolverOptions& opts, int threads) {
  if (folds < 2) fail(ErrorCode::InvalidInput, "cross-validation needs at least 2 folds");
  if (reps < 1) fail(ErrorCode::InvalidInput, "cross-validation needs at least 1 replication");
  if (u_range.empty()) fail(ErrorCode::InvalidInput, "empty range of envelope dimensions");
  for (Index u : u_range) {
    if (u < 0 || u > d.r()) fail(ErrorCode::InvalidInput, "envelope dimension outside [0, r]");
  }
  opts.validate();

  const Index n = d.n();
  if (n < folds) fail(ErrorCode::FoldTooSmall, "fewer observations than folds");

  // Partitions are drawn up front so results do not depend on scheduling.
  std::vector<std::vector<Index>> assignment(static_cast<std::size_t>(reps));
  for (int rep = 0; rep < reps; ++rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep)};
    std::mt19937_64 rng(seq);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto& fold_of = assignment[static_cast<std::size_t>(rep)];
    fold_of.assign(static_cast<std::size_t>(n), 0);
    for (Index j = 0; j < n; ++j) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = j % folds;
  }

  const std::size_t n_u = u_range.size();
  const std::size_t tasks = static_cast<std::size_t>(reps) * static_cast<std::size_t>(folds);
  std::vector<std::vector<double>> errors(tasks, std::vector<double>(n_u, 0.0));

  parallel_for(tasks, resolve_threads(threads), [&](std::size_t task) {
    const int rep = static_cast<int>(task / static_cast<std::size_t>(folds));
    const int fold = static_cast<int>(task % static_cast<std::size_t>(folds));
    const auto& fold_of = assignment[static_cast<std::size_t>(rep)];
    std::vector<Index> train;
    std::vector<Index> test;
    for (Index i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == fold ? test : train).push_back(i);
    }
    if (static_cast<Index>(train.size()) <= std::max(d.p(), d.r()) || test.empty()) {
      std::ostringstream os;
      os << "fold " << fold << " leaves " << train.size() << " training rows for p = " << d.p()
         << ", r = " << d.r();
      fail(ErrorCode::FoldTooSmall, os.str());
    }
    const ResponseMoments moments = response_moments(d.subset(train));
    const EnvelopeProblem base = response_problem(moments, 0);

    Matrix x_test(static_cast<Index>(test.size()), d.p());
    Matrix y_test(static_cast<Index>(test.size()), d.r());
    for (std::size_t i = 0; i < test.size(); ++i) {
      x_test.row(static_cast<Index>(i)) = d.x().row(test[i]);
      y_test.row(static_cast<Index>(i)) = d.y().row(test[i]);
    }
    for (std::size_t k = 0; k < n_u; ++k) {
      const EnvelopeFit fit = fit_envelope(base.with_dimension(u_range[k]), opts);
      const ResponseEnvelopeFit rf = response_fit_from_basis(moments, fit.gamma_hat);
      const Matrix resid = y_test - rf.predict(x_test);
      errors[task][k] = resid.rowwise().squaredNorm().mean() / static_cast<double>(d.r());
    }
  });

  CvReport report;
  report.folds = folds;
  report.reps = reps;
  const double count = static_cast<double>(tasks);
  for (std::size_t k = 0; k < n_u; ++k) {
    double sum = 0.0;
    for (const auto& e : errors) sum += e[k];
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& e : errors) ss += (e[k] - mean) * (e[k] - mean);
    const double sd = tasks > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    report.per_u.push_back(CvEntry{u_range[k], mean, sd / std::sqrt(count)});
  }
  const CvEntry* best = &report.per_u.front();
  for (const CvEntry& e : report.per_u) {
    if (e.mean_error < best->mean_error || (e.mean_error == best->mean_error && e.u < best->u)) {
      best = &e;
    }
  }
  report.selected_u = best->u;
  return report;
}

}  // namespace envelope
