#pragma once

// Simulated response-envelope regressions (Scenarios I–VII), a replication
// runner that summarizes starting values and fits against the truth, and
// table output.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envelope/envelope_api.hpp"

namespace envelope {

enum class ScenarioId { I = 1, II, III, IV, V, VI, VII };

std::string_view to_string(ScenarioId id);
/// Accepts roman numerals ("III") or integers ("3").
std::optional<ScenarioId> parse_scenario(std::string_view text);

/// How a diagonal block of Σ (Ω for the envelope, Ω₀ for its complement)
/// is drawn.
struct CovarianceRule {
  enum class Kind {
    DiagonalUniform,  // diag of independent uniform(lo, hi)
    IdentityScaled,   // scale·I
    PowerSequence,    // diag(base^(k+1)) with k the global eigen-position
    FactorProduct,    // F·Fᵀ with F square, entries normal(0, sd²)
  };
  Kind kind = Kind::IdentityScaled;
  double a = 1.0;  // lo | scale | base | sd
  double b = 0.0;  // hi
};

enum class GammaRule { RandomOrthonormalized, Identity };

struct ScenarioSpec {
  ScenarioId id = ScenarioId::I;
  Index r = 0;
  Index p = 0;
  Index n = 0;
  Index u = 0;
  CovarianceRule omega;
  CovarianceRule omega0;
  GammaRule gamma_rule = GammaRule::RandomOrthonormalized;
  double x_variance_scale = 1.0;
  double eta_max = 10.0;  // η entries ~ uniform(0, eta_max)
  std::uint64_t seed = 0;

  /// Parameters of scenario `id` at the published sizes.
  static ScenarioSpec standard(ScenarioId id, std::uint64_t seed = 0);
  void validate() const;
};

struct SimReplicate {
  RegressionData data;
  Basis true_gamma;
  Matrix true_beta;  // r×p
  SpdMatrix true_sigma;
};

/// One configuration's statistics, averaged over replicates (or raw for a
/// single replicate). Angles in degrees against span(true Γ).
struct SummaryRow {
  std::string label;
  double angle_start = 0.0;
  double angle_final = 0.0;
  double l_start = 0.0;
  double l_final = 0.0;
  double beta_err_start = 0.0;  // spectral norm ‖β̂ − β‖₂
  double beta_err_final = 0.0;
  double time_seconds = 0.0;
  double beta_err_start_frobenius = 0.0;
  double beta_err_final_frobenius = 0.0;
  int sweeps = 0;
};

/// Which starting value a configuration uses: forced criterion, or the
/// L_u-minimizing one.
struct RunConfiguration {
  std::string label;
  std::optional<StartCriterion> forced;
};

/// The four forced-criterion columns of the starting-value tables.
std::vector<RunConfiguration> criterion_configurations();
/// The single "selected start" configuration.
std::vector<RunConfiguration> selected_configuration();
/// criterion_configurations() for Scenarios I–IV, selected_configuration() otherwise.
std::vector<RunConfiguration> default_configurations(ScenarioId id);

struct RunOptions {
  SolverOptions solver;
  std::vector<RunConfiguration> configurations;  // empty → default_configurations
  int threads = 1;
};

struct ReplicationReport {
  std::vector<SummaryRow> rows;                        // per configuration, averaged
  std::vector<std::vector<SummaryRow>> per_replicate;  // [configuration][replicate]
  std::vector<std::uint64_t> seeds;                    // seeds of the replicates kept
  int failures = 0;
  std::vector<std::string> failure_messages;
};

/// Draws one replicate; deterministic in spec.seed.
SimReplicate gen_scenario(const ScenarioSpec& spec);

/// Replicate i uses seed spec.seed + i. Failed replicates are excluded
/// from the averages and counted in `failures`.
ReplicationReport run_replications(const ScenarioSpec& spec, int reps, const RunOptions& opts = {});

enum class TableFormat { Csv, Markdown };

/// Columns: label, angle_start, angle_final, l_start, l_final,
/// beta_err_start, beta_err_final, time_seconds.
std::string emit_table(const std::vector<SummaryRow>& rows, TableFormat format);

/// Parses emit_table's CSV output.
std::vector<SummaryRow> parse_table_csv(std::string_view text);

/// Spectral norm (largest singular value).
double spectral_norm(const Matrix& m);

}  // namespace envelope
