#pragma once

// Starting values: the u eigenvectors of M̂ or M̂+Û that carry the most
// (optionally standardized) Û mass, the best of the four by L_u, and the
// row anchoring that turns a starting basis into coordinates A.

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "envelope/objective.hpp"

namespace envelope {

enum class StartCriterion {
  KM,        // eigenvectors of M̂ scored by gᵀ M̂^{-1/2} Û M̂^{-1/2} g
  KMU,       // eigenvectors of M̂+Û scored by gᵀ (M̂+Û)^{-1/2} Û (M̂+Û)^{-1/2} g
  KMUnstd,   // eigenvectors of M̂ scored by gᵀ Û g
  KMUUnstd,  // eigenvectors of M̂+Û scored by gᵀ Û g
};

/// Selection order; earlier entries win ties in `select_start`.
inline constexpr std::array<StartCriterion, 4> kStartOrder = {
    StartCriterion::KMU, StartCriterion::KM, StartCriterion::KMUUnstd, StartCriterion::KMUnstd};

std::string_view to_string(StartCriterion c);
std::optional<StartCriterion> parse_start_criterion(std::string_view name);
/// True for criteria that draw eigenvectors from M̂ + Û.
bool sourced_from_sum(StartCriterion c);
bool standardized(StartCriterion c);

struct StartCandidate {
  StartCriterion criterion;
  Basis basis;                       // r×u eigenvectors
  std::vector<Index> eigen_indices;  // into the descending eigendecomposition
  double score;                      // L_u(basis)
};

/// Top-u eigenvectors under one criterion, scored by L_u. Ties in the
/// per-vector score go to the larger eigenvalue, then the lower index.
StartCandidate candidate(const EnvelopeProblem& p, StartCriterion criterion);

/// The candidate with the smallest L_u among the four criteria.
StartCandidate select_start(const EnvelopeProblem& p);

struct PivotResult {
  std::vector<Index> perm;  // pivot rows in pivot order, then the rest ascending
  Matrix anchored_block;    // u×u rows of the original G at perm[0..u)
  Matrix a_init;            // G₂·G₁⁻¹

  CoordParam coords() const { return CoordParam{a_init, perm}; }
};

/// Gaussian elimination with partial pivoting over the columns of G.
/// Throws PivotFailure when the anchored block has condition number > 1e12.
PivotResult pivot_rows(const Basis& g);

}  // namespace envelope
