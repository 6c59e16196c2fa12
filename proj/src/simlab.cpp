#include "envelope/simlab.hpp"

#include <Eigen/SVD>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "envelope/parallel.hpp"

namespace envelope {

namespace {

using Clock = std::chrono::steady_clock;

Matrix draw_block(const CovarianceRule& rule, Index size, Index offset, std::mt19937_64& rng) {
  Matrix out = Matrix::Zero(size, size);
  switch (rule.kind) {
    case CovarianceRule::Kind::DiagonalUniform: {
      std::uniform_real_distribution<double> unif(rule.a, rule.b);
      for (Index i = 0; i < size; ++i) out(i, i) = unif(rng);
      break;
    }
    case CovarianceRule::Kind::IdentityScaled:
      out.diagonal().setConstant(rule.a);
      break;
    case CovarianceRule::Kind::PowerSequence:
      for (Index i = 0; i < size; ++i) out(i, i) = std::pow(rule.a, static_cast<double>(offset + i + 1));
      break;
    case CovarianceRule::Kind::FactorProduct: {
      std::normal_distribution<double> normal(0.0, rule.a);
      Matrix f(size, size);
      for (Index j = 0; j < size; ++j) {
        for (Index i = 0; i < size; ++i) f(i, j) = normal(rng);
      }
      out = f * f.transpose();
      break;
    }
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr const char* kColumns[] = {"label",  "angle_start",    "angle_final",    "l_start",
                                    "l_final", "beta_err_start", "beta_err_final", "time_seconds"};

}  // namespace

std::string_view to_string(ScenarioId id) {
  static constexpr std::string_view names[] = {"I", "II", "III", "IV", "V", "VI", "VII"};
  return names[static_cast<int>(id) - 1];
}

std::optional<ScenarioId> parse_scenario(std::string_view text) {
  for (int k = 1; k <= 7; ++k) {
    const auto id = static_cast<ScenarioId>(k);
    if (text == to_string(id) || text == std::to_string(k)) return id;
  }
  return std::nullopt;
}

ScenarioSpec ScenarioSpec::standard(ScenarioId id, std::uint64_t seed) {
  using K = CovarianceRule::Kind;
  ScenarioSpec s;
  s.id = id;
  s.seed = seed;
  switch (id) {
    case ScenarioId::I:
      s.r = 100, s.p = 100, s.n = 500, s.u = 20;
      s.omega = {K::DiagonalUniform, 49.0, 51.0};
      s.omega0 = {K::DiagonalUniform, 49.0, 51.0};
      s.x_variance_scale = 400.0;
      break;
    case ScenarioId::II:
      s.r = 100, s.p = 100, s.n = 500, s.u = 5;
      s.omega = {K::IdentityScaled, 1.0};
      s.omega0 = {K::IdentityScaled, 100.0};
      s.x_variance_scale = 25.0;
      // A modest signal: with η up to 10 the envelope directions dominate S_Y and
      // both start sources agree.
      s.eta_max = 1.0;
      break;
    case ScenarioId::III:
      s.r = 30, s.p = 30, s.n = 200, s.u = 5;
      s.omega = {K::PowerSequence, 1.5};
      s.omega0 = {K::PowerSequence, 1.5};
      s.x_variance_scale = 100.0;
      s.gamma_rule = GammaRule::Identity;
      break;
    case ScenarioId::IV:
      s.r = 30, s.p = 30, s.n = 200, s.u = 5;
      s.omega = {K::PowerSequence, 1.05};
      s.omega0 = {K::PowerSequence, 1.05};
      s.x_variance_scale = 100.0;
      break;
    case ScenarioId::V:
      s.r = 100, s.p = 100, s.n = 250, s.u = 10;
      s.omega = {K::FactorProduct, 1.0};
      s.omega0 = {K::FactorProduct, 5.0};
      s.x_variance_scale = 400.0;
      break;
    case ScenarioId::VI:
      s.r = 100, s.p = 100, s.n = 250, s.u = 10;
      s.omega = {K::FactorProduct, 5.0};
      s.omega0 = {K::FactorProduct, 1.0};
      s.x_variance_scale = 400.0;
      break;
    case ScenarioId::VII:
      s.r = 150, s.p = 100, s.n = 500, s.u = 20;
      s.omega = {K::IdentityScaled, 1.0};
      s.omega0 = {K::IdentityScaled, 25.0};
      s.x_variance_scale = 400.0;
      break;
  }
  return s;
}

void ScenarioSpec::validate() const {
  if (r < 1 || p < 1 || u < 0 || u > r) fail(ErrorCode::InvalidInput, "invalid scenario dimensions");
  if (n <= std::max(p, r)) fail(ErrorCode::InvalidInput, "scenario needs n > max(p, r)");
  if (!(x_variance_scale > 0.0)) fail(ErrorCode::InvalidInput, "predictor variance must be positive");
  if (!(eta_max > 0.0)) fail(ErrorCode::InvalidInput, "eta_max must be positive");
}

SimReplicate gen_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const Index r = spec.r;
  const Index u = spec.u;
  std::mt19937_64 rng(spec.seed);

  // Draw order is fixed: (Γ, Γ₀), Ω, Ω₀, η, X, ε.
  Matrix full;
  if (spec.gamma_rule == GammaRule::Identity) {
    full = Matrix::Identity(r, r);
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix raw(r, r);
    for (Index j = 0; j < r; ++j) {
      for (Index i = 0; i < r; ++i) raw(i, j) = unif(rng);
    }
    full = orthonormalize(raw).matrix();
  }
  const Matrix gamma = full.leftCols(u);
  const Matrix gamma0 = full.rightCols(r - u);

  const Matrix omega = draw_block(spec.omega, u, 0, rng);
  const Matrix omega0 = draw_block(spec.omega0, r - u, u, rng);
  Matrix sigma = gamma * omega * gamma.transpose() + gamma0 * omega0 * gamma0.transpose();
  sigma = 0.5 * (sigma + sigma.transpose());
  SpdMatrix true_sigma(sigma);

  std::uniform_real_distribution<double> eta_dist(0.0, spec.eta_max);
  Matrix eta(u, spec.p);
  for (Index j = 0; j < spec.p; ++j) {
    for (Index i = 0; i < u; ++i) eta(i, j) = eta_dist(rng);
  }
  const Matrix beta = gamma * eta;

  std::normal_distribution<double> normal(0.0, 1.0);
  const double x_sd = std::sqrt(spec.x_variance_scale);
  Matrix x(spec.n, spec.p);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < spec.p; ++j) x(i, j) = x_sd * normal(rng);
  }
  Matrix z(spec.n, r);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < r; ++j) z(i, j) = normal(rng);
  }
  const Matrix lower = true_sigma.cholesky().matrixL();
  Matrix y = x * beta.transpose() + z * lower.transpose();

  return SimReplicate{RegressionData(std::move(x), std::move(y)), Basis(gamma, 1e-9), beta,
                      std::move(true_sigma)};
}

std::vector<RunConfiguration> criterion_configurations() {
  return {{"K_MU", StartCriterion::KMU},
          {"K_M", StartCriterion::KM},
          {"K_MU_unstd", StartCriterion::KMUUnstd},
          {"K_M_unstd", StartCriterion::KMUnstd}};
}

std::vector<RunConfiguration> selected_configuration() { return {{"selected", std::nullopt}}; }

std::vector<RunConfiguration> default_configurations(ScenarioId id) {
  return static_cast<int>(id) <= 4 ? criterion_configurations() : selected_configuration();
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

ReplicationReport run_replications(const ScenarioSpec& spec, int reps, const RunOptions& opts) {
  if (reps < 1) fail(ErrorCode::InvalidInput, "need at least one replication");
  spec.validate();
  if (spec.u < 1 || spec.u >= spec.r) {
    fail(ErrorCode::InvalidInput, "replications need 1 <= u < r");
  }
  opts.solver.validate();
  const std::vector<RunConfiguration> configs =
      opts.configurations.empty() ? default_configurations(spec.id) : opts.configurations;
  const std::size_t n_cfg = configs.size();
  const std::size_t n_rep = static_cast<std::size_t>(reps);

  std::vector<std::vector<SummaryRow>> raw(n_rep, std::vector<SummaryRow>(n_cfg));
  std::vector<std::string> errors(n_rep);

  parallel_for(n_rep, resolve_threads(opts.threads), [&](std::size_t i) {
    try {
      ScenarioSpec s = spec;
      s.seed = spec.seed + i;
      const SimReplicate rep = gen_scenario(s);
      const ResponseMoments moments = response_moments(rep.data);
      const EnvelopeProblem problem = response_problem(moments, s.u);
      for (std::size_t c = 0; c < n_cfg; ++c) {
        const auto t0 = Clock::now();
        const StartCandidate start =
            configs[c].forced ? candidate(problem, *configs[c].forced) : select_start(problem);
        const EnvelopeFit fit = fit_from_start(problem, start, opts.solver);
        const auto t1 = Clock::now();

        const Matrix beta_start = start.basis.projection() * moments.b;
        const Matrix beta_final = fit.gamma_hat.projection() * moments.b;
        SummaryRow& row = raw[i][c];
        row.label = configs[c].label;
        row.angle_start = subspace_angle_deg(start.basis, rep.true_gamma);
        row.angle_final = subspace_angle_deg(fit.gamma_hat, rep.true_gamma);
        row.l_start = start.score;
        row.l_final = fit.objective;
        row.beta_err_start = spectral_norm(beta_start - rep.true_beta);
        row.beta_err_final = spectral_norm(beta_final - rep.true_beta);
        row.beta_err_start_frobenius = (beta_start - rep.true_beta).norm();
        row.beta_err_final_frobenius = (beta_final - rep.true_beta).norm();
        row.time_seconds = std::chrono::duration<double>(t1 - t0).count();
        row.sweeps = fit.sweeps;
      }
    } catch (const EnvelopeError& e) {
      errors[i] = e.what();
    }
  });

  ReplicationReport report;
  report.per_replicate.assign(n_cfg, {});
  for (std::size_t i = 0; i < n_rep; ++i) {
    if (!errors[i].empty()) {
      ++report.failures;
      report.failure_messages.push_back("replicate " + std::to_string(i) + ": " + errors[i]);
      continue;
    }
    report.seeds.push_back(spec.seed + i);
    for (std::size_t c = 0; c < n_cfg; ++c) report.per_replicate[c].push_back(raw[i][c]);
  }
  for (std::size_t c = 0; c < n_cfg; ++c) {
    SummaryRow avg;
    avg.label = configs[c].label;
    const auto& rows = report.per_replicate[c];
    if (!rows.empty()) {
      for (const SummaryRow& r : rows) {
        avg.angle_start += r.angle_start;
        avg.angle_final += r.angle_final;
        avg.l_start += r.l_start;
        avg.l_final += r.l_final;
        avg.beta_err_start += r.beta_err_start;
        avg.beta_err_final += r.beta_err_final;
        avg.time_seconds += r.time_seconds;
        avg.beta_err_start_frobenius += r.beta_err_start_frobenius;
        avg.beta_err_final_frobenius += r.beta_err_final_frobenius;
        avg.sweeps += r.sweeps;
      }
      const double k = static_cast<double>(rows.size());
      avg.angle_start /= k;
      avg.angle_final /= k;
      avg.l_start /= k;
      avg.l_final /= k;
      avg.beta_err_start /= k;
      avg.beta_err_final /= k;
      avg.time_seconds /= k;
      avg.beta_err_start_frobenius /= k;
      avg.beta_err_final_frobenius /= k;
      avg.sweeps = static_cast<int>(std::lround(avg.sweeps / k));
    }
    report.rows.push_back(std::move(avg));
  }
  return report;
}

std::string emit_table(const std::vector<SummaryRow>& rows, TableFormat format) {
  std::ostringstream os;
  auto values = [](const SummaryRow& r) {
    return std::array<double, 7>{r.angle_start, r.angle_final,    r.l_start,       r.l_final,
                                 r.beta_err_start, r.beta_err_final, r.time_seconds};
  };
  if (format == TableFormat::Csv) {
    for (std::size_t k = 0; k < std::size(kColumns); ++k) os << (k ? "," : "") << kColumns[k];
    os << '\n';
    for (const SummaryRow& r : rows) {
      if (r.label.find_first_of(",\"\n") != std::string::npos) {
        fail(ErrorCode::InvalidInput, "table label contains a CSV delimiter");
      }
      os << r.label;
      for (double v : values(r)) os << ',' << format_number(v);
      os << '\n';
    }
  } else {
    os << '|';
    for (const char* c : kColumns) os << ' ' << c << " |";
    os << "\n|";
    for (std::size_t k = 0; k < std::size(kColumns); ++k) os << (k ? "---:|" : "---|");
    os << '\n';
    for (const SummaryRow& r : rows) {
      std::string label;
      for (char ch : r.label) {
        if (ch == '|') label += '\\';
        label += ch;
      }
      os << "| " << label << " |";
      for (double v : values(r)) os << ' ' << format_fixed2(v) << " |";
      os << '\n';
    }
  }
  return os.str();
}

std::vector<SummaryRow> parse_table_csv(std::string_view text) {
  std::vector<SummaryRow> rows;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1 || line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != std::size(kColumns)) {
      fail(ErrorCode::InvalidInput, "table line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " fields");
    }
    double v[7];
    for (int k = 0; k < 7; ++k) {
      const std::string_view f = fields[static_cast<std::size_t>(k + 1)];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v[k]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        fail(ErrorCode::InvalidInput, "table line " + std::to_string(line_no) + ": bad number");
      }
    }
    SummaryRow row;
    row.label = std::string(fields[0]);
    row.angle_start = v[0];
    row.angle_final = v[1];
    row.l_start = v[2];
    row.l_final = v[3];
    row.beta_err_start = v[4];
    row.beta_err_final = v[5];
    row.time_seconds = v[6];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace envelope
