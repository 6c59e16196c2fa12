#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "envelope/init.hpp"
#include "test_support.hpp"

using namespace envelope;
using namespace envelope::testing;

namespace {

EnvelopeProblem diag123_problem() {
  Matrix m = Matrix::Zero(3, 3);
  m.diagonal() << 1.0, 2.0, 3.0;
  Matrix u = Matrix::Zero(3, 3);
  u(1, 1) = 0.5;
  return EnvelopeProblem(SpdMatrix(m), SymmetricMatrix(u), 1);
}

bool is_axis(const Basis& b, Index axis) {
  return b.cols() == 1 && std::abs(std::abs(b.matrix()(axis, 0)) - 1.0) < 1e-12;
}

Matrix rows_of(const Matrix& g, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), g.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = g.row(idx[i]);
  return out;
}

}  // namespace

TEST_CASE("criterion names round-trip") {
  for (StartCriterion c : kStartOrder) {
    const auto parsed = parse_start_criterion(to_string(c));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == c);
  }
  CHECK(to_string(StartCriterion::KMU) == "K_MU");
  CHECK_FALSE(parse_start_criterion("K_X").has_value());
  CHECK(sourced_from_sum(StartCriterion::KMUUnstd));
  CHECK_FALSE(sourced_from_sum(StartCriterion::KM));
  CHECK(standardized(StartCriterion::KM));
  CHECK_FALSE(standardized(StartCriterion::KMUnstd));
}

TEST_CASE("candidate: single informative axis") {
  const EnvelopeProblem p = diag123_problem();
  CHECK(is_axis(candidate(p, StartCriterion::KMUnstd).basis, 1));
  const StartCandidate km = candidate(p, StartCriterion::KM);
  CHECK(is_axis(km.basis, 1));
  // Standardized scores are (0, 0.5/2, 0); the chosen score is the L_u value.
  CHECK(p.u_std_m()(1, 1) == doctest::Approx(0.25));
  CHECK(km.score == doctest::Approx(l_basis(p, km.basis)));
  CHECK(is_axis(candidate(p, StartCriterion::KMU).basis, 1));
  CHECK(is_axis(candidate(p, StartCriterion::KMUUnstd).basis, 1));
}

TEST_CASE("candidate: Û = 0 falls back to the largest eigenvalues") {
  std::mt19937_64 rng(41);
  const Matrix m = random_spd(6, rng);
  const EnvelopeProblem p(SpdMatrix(m), SymmetricMatrix(Matrix::Zero(6, 6)), 2);
  for (StartCriterion c : kStartOrder) {
    const StartCandidate cand = candidate(p, c);
    CHECK(cand.eigen_indices == std::vector<Index>{0, 1});
  }
  Matrix d = Matrix::Zero(4, 4);
  d.diagonal() << 1.0, 4.0, 2.0, 3.0;
  const EnvelopeProblem q(SpdMatrix(d), SymmetricMatrix(Matrix::Zero(4, 4)), 1);
  CHECK(is_axis(candidate(q, StartCriterion::KM).basis, 1));
}

TEST_CASE("candidate bases are semi-orthogonal and select_start is the minimum") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const Index r = 8;
    const Index u = 1 + trial % 4;
    const EnvelopeProblem p = random_problem(r, u, rng, 1 + trial % 3);
    double lowest = std::numeric_limits<double>::infinity();
    for (StartCriterion c : kStartOrder) {
      const StartCandidate cand = candidate(p, c);
      const Matrix& g = cand.basis.matrix();
      CHECK((g.transpose() * g - Matrix::Identity(u, u)).cwiseAbs().maxCoeff() < 1e-10);
      lowest = std::min(lowest, cand.score);
    }
    const StartCandidate best = select_start(p);
    CHECK(best.score <= lowest);
    CHECK(best.score == lowest);
  }
}

TEST_CASE("select_start recovers an exact eigenvector envelope") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const Index r = 7;
    const Index u = 1 + trial % 3;
    const Matrix q = random_orthogonal(r, rng);
    Vector lambda(r);
    for (Index k = 0; k < r; ++k) lambda(k) = 1.0 + 0.7 * static_cast<double>(k);
    const Matrix m = q * lambda.asDiagonal() * q.transpose();
    const Matrix gamma = q.leftCols(u);
    const Matrix uh = 4.0 * gamma * gamma.transpose();
    const EnvelopeProblem p(SpdMatrix(m), SymmetricMatrix(uh), u);
    const StartCandidate s = select_start(p);
    CHECK(subspace_angle_deg(s.basis, Basis(gamma)) < 1e-8);
  }
}

TEST_CASE("pivot_rows: worked cases") {
  SUBCASE("axis-aligned") {
    Matrix g = Matrix::Zero(3, 2);
    g(0, 0) = g(1, 1) = 1.0;
    const PivotResult pr = pivot_rows(Basis(g));
    CHECK(pr.perm == std::vector<Index>{0, 1, 2});
    CHECK((pr.anchored_block - Matrix::Identity(2, 2)).norm() == 0.0);
    CHECK(pr.a_init.norm() == 0.0);
  }
  SUBCASE("tie in the first column goes to the lowest row") {
    Matrix g(3, 2);
    const double h = 1.0 / std::sqrt(2.0);
    g << h, h, h, -h, 0.0, 0.0;
    const PivotResult pr = pivot_rows(Basis(g));
    CHECK(pr.perm == std::vector<Index>{0, 1, 2});
    CHECK(std::abs(pr.anchored_block.determinant()) == doctest::Approx(1.0));
  }
  SUBCASE("pivot order follows the column maxima") {
    Matrix g = Matrix::Zero(4, 2);
    g(3, 0) = 1.0;
    g(1, 1) = 1.0;
    const PivotResult pr = pivot_rows(Basis(g));
    CHECK(pr.perm == std::vector<Index>{3, 1, 0, 2});
    CHECK((pr.anchored_block - Matrix::Identity(2, 2)).norm() == 0.0);
  }
}

TEST_CASE("pivot_rows reconstructs the span") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 12;
    const Index u = 1 + trial % 6;
    const Basis g(random_semi_orthogonal(r, u, rng));
    const PivotResult pr = pivot_rows(g);
    std::vector<Index> sorted = pr.perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Index> expect(static_cast<std::size_t>(r));
    std::iota(expect.begin(), expect.end(), Index{0});
    CHECK(sorted == expect);
    const std::vector<Index> head(pr.perm.begin(), pr.perm.begin() + u);
    CHECK((rows_of(g.matrix(), head) - pr.anchored_block).norm() == 0.0);
    const Matrix c = pr.coords().basis_matrix();
    CHECK(subspace_angle_deg(orthonormalize(c), g) < 1e-8);
  }
}

TEST_CASE("pivot_rows picks a well-conditioned block") {
  // Compare the anchored determinant with a random 3-row subset, pooled over trials.
  std::mt19937_64 rng(45);
  int wins = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    const Basis g(random_semi_orthogonal(10, 3, rng));
    const double pivot_det = std::abs(pivot_rows(g).anchored_block.determinant());
    std::vector<Index> rows(10);
    std::iota(rows.begin(), rows.end(), Index{0});
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(3);
    const double subset_det = std::abs(rows_of(g.matrix(), rows).determinant());
    if (pivot_det >= subset_det) ++wins;
  }
  CHECK(wins >= 950);
}

TEST_CASE("pivot_rows rejects a rank-deficient start") {
  Matrix bad = Matrix::Zero(3, 2);
  bad(0, 0) = bad(0, 1) = 1.0;  // two identical columns, admitted by a loose tolerance
  try {
    pivot_rows(Basis(bad, 10.0));
    FAIL("expected PivotFailure");
  } catch (const EnvelopeError& e) {
    CHECK(e.code() == ErrorCode::PivotFailure);
  }
}
