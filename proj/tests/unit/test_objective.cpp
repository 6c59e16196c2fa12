#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "envelope/objective.hpp"
#include "test_support.hpp"

using namespace envelope;
using namespace envelope::testing;

namespace {

EnvelopeProblem diag_problem(std::initializer_list<double> m_diag, Index u) {
  const Index r = static_cast<Index>(m_diag.size());
  Matrix m = Matrix::Zero(r, r);
  Index i = 0;
  for (double v : m_diag) {
    m(i, i) = v;
    ++i;
  }
  return EnvelopeProblem(SpdMatrix(m), SymmetricMatrix(Matrix::Zero(r, r)), u);
}

std::vector<Index> identity_perm(Index r) {
  std::vector<Index> p(static_cast<std::size_t>(r));
  std::iota(p.begin(), p.end(), Index{0});
  return p;
}

std::vector<Index> random_perm(Index r, std::mt19937_64& rng) {
  std::vector<Index> p = identity_perm(r);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// All u-subsets of {0..r-1} in lexicographic order.
std::vector<std::vector<Index>> subsets(Index r, Index u) {
  std::vector<std::vector<Index>> out;
  std::vector<Index> cur;
  auto rec = [&](auto&& self, Index start) -> void {
    if (static_cast<Index>(cur.size()) == u) {
      out.push_back(cur);
      return;
    }
    for (Index i = start; i < r; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

Matrix columns(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(m.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = m.col(idx[j]);
  return out;
}

}  // namespace

TEST_CASE("l_basis: worked values") {
  const EnvelopeProblem p = diag_problem({1.0, 4.0}, 1);
  Matrix e2 = Matrix::Zero(2, 1);
  e2(1, 0) = 1.0;
  CHECK(std::abs(l_basis(p, Basis(e2))) < 1e-15);

  Matrix diag = Matrix::Constant(2, 1, 1.0 / std::sqrt(2.0));
  const double expected = std::log(2.5) + std::log(0.625);
  CHECK(expected == doctest::Approx(std::log(1.5625)));
  CHECK(l_basis(p, Basis(diag)) == doctest::Approx(0.44628710262841953).epsilon(1e-12));
  CHECK(l_basis(p, Basis(diag)) > 0.0);

  std::mt19937_64 rng(21);
  const EnvelopeProblem full = random_problem(5, 5, rng);
  const double want = full.m_hat().log_det() - full.sum().log_det();
  CHECK(l_basis(full, Basis::identity(5)) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(l_basis(p, Basis::identity(2)), EnvelopeError);
}

TEST_CASE("l_basis matches the LU oracle and is rotation invariant") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const Index r = 6;
    const Index u = 1 + trial % 4;
    const EnvelopeProblem p = random_problem(r, u, rng, 1 + trial % 3);
    const Matrix g = random_semi_orthogonal(r, u, rng);
    const double value = l_basis(p, Basis(g));
    CHECK(value == doctest::Approx(l_basis_oracle(p.m_hat().matrix(), p.u_hat().matrix(), g)).epsilon(1e-10));
    const Matrix go = g * random_orthogonal(u, rng);
    CHECK(std::abs(l_basis(p, Basis(go)) - value) < 1e-10);
  }
}

TEST_CASE("Û must be positive semi-definite") {
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = -1.0;
  CHECK_THROWS_AS(EnvelopeProblem(SpdMatrix(Matrix::Identity(2, 2)), SymmetricMatrix(u), 1),
                  EnvelopeError);
  CHECK_THROWS_AS(EnvelopeProblem(SpdMatrix(Matrix::Identity(2, 2)),
                                  SymmetricMatrix(Matrix::Zero(2, 2)), 3),
                  EnvelopeError);
}

TEST_CASE("EnvelopeProblem caches satisfy their identities") {
  std::mt19937_64 rng(23);
  const EnvelopeProblem p = random_problem(6, 2, rng, 2);
  const Matrix& m = p.m_hat().matrix();
  const Matrix s = m + p.u_hat().matrix();
  const Matrix id = Matrix::Identity(6, 6);
  CHECK((p.sum_inv() * s - id).norm() < 1e-8 * s.norm());
  CHECK((p.m_inv_sqrt() * m * p.m_inv_sqrt() - id).norm() < 1e-8 * m.norm());
  CHECK((p.sum_inv_sqrt() * s * p.sum_inv_sqrt() - id).norm() < 1e-8 * s.norm());
  CHECK((p.u_std_m() - p.m_inv_sqrt() * p.u_hat().matrix() * p.m_inv_sqrt()).norm() < 1e-10);
  const EnvelopeProblem q = p.with_dimension(4);
  CHECK(q.u() == 4);
  CHECK(&q.m_hat() == &p.m_hat());
}

TEST_CASE("l_coords equals l_basis on the same span") {
  SUBCASE("A = 0 gives the anchored axis") {
    std::mt19937_64 rng(24);
    const EnvelopeProblem p = random_problem(2, 1, rng);
    const CoordParam c{Matrix::Zero(1, 1), identity_perm(2)};
    Matrix e1 = Matrix::Zero(2, 1);
    e1(0, 0) = 1.0;
    CHECK(l_coords(p, c) == doctest::Approx(l_basis(p, Basis(e1))).epsilon(1e-12));
  }
  SUBCASE("r = 3, u = 1 against normalized C_A") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 20; ++trial) {
      const EnvelopeProblem p = random_problem(3, 1, rng);
      const CoordParam c{random_matrix(2, 1, rng), identity_perm(3)};
      const Matrix cm = c.basis_matrix();
      const Basis g(cm / cm.norm());
      CHECK(std::abs(l_coords(p, c) - l_basis(p, g)) < 1e-10);
    }
  }
  SUBCASE("random permutations, Gram–Schmidt oracle") {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 50; ++trial) {
      const Index r = 7;
      const Index u = 1 + trial % 5;
      const EnvelopeProblem p = random_problem(r, u, rng, 2);
      const CoordParam c{random_matrix(r - u, u, rng), random_perm(r, rng)};
      const Matrix g = gram_schmidt(c.basis_matrix());
      CHECK(std::abs(l_coords(p, c) - l_basis_oracle(p.m_hat().matrix(), p.u_hat().matrix(), g)) < 1e-9);
    }
  }
  SUBCASE("column scaling leaves the value unchanged") {
    std::mt19937_64 rng(27);
    const EnvelopeProblem p = random_problem(5, 2, rng);
    const Matrix g = random_semi_orthogonal(5, 2, rng);
    Matrix scaled = g;
    scaled.col(0) *= 3.0;
    scaled.col(1) *= -0.25;
    CHECK(std::abs(l_basis(p, Basis(gram_schmidt(scaled))) - l_basis(p, Basis(g))) < 1e-10);
  }
}

TEST_CASE("CoordParam validation") {
  CoordParam bad{Matrix::Zero(2, 1), {0, 0, 1}};
  CHECK_THROWS_AS(bad.validate(), EnvelopeError);
  CoordParam short_perm{Matrix::Zero(2, 1), {0, 1}};
  CHECK_THROWS_AS(short_perm.validate(), EnvelopeError);
}

TEST_CASE("row_context: smallest case is a scalar Schur complement") {
  Matrix m(2, 2);
  m << 3.0, 1.0, 1.0, 2.0;
  const EnvelopeProblem p(SpdMatrix(m), SymmetricMatrix(Matrix::Zero(2, 2)), 1);
  const CoordParam c{Matrix::Constant(1, 1, 0.7), identity_perm(2)};
  const RowContext ctx = row_context(p, c, 0);
  CHECK(ctx.w1(0, 0) == doctest::Approx(3.0 - 1.0 * 1.0 / 2.0));
  CHECK(ctx.m22 == doctest::Approx(2.0));
  CHECK(ctx.offset1(0) == doctest::Approx(0.5));
  CHECK(ctx.gram_inv(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(row_context(p, c, 1), EnvelopeError);
}

TEST_CASE("row_context: zero cross block gives zero offset") {
  std::mt19937_64 rng(28);
  Matrix m = Matrix::Zero(5, 5);
  m.topLeftCorner(4, 4) = random_spd(4, rng);
  m(4, 4) = 2.5;
  const EnvelopeProblem p(SpdMatrix(m), SymmetricMatrix(random_psd(5, 2, rng)), 2);
  const CoordParam c{random_matrix(3, 2, rng), identity_perm(5)};
  const RowContext ctx = row_context(p, c, 2);  // original row 4
  CHECK(ctx.offset1.norm() < 1e-14);
}

TEST_CASE("l_row differences equal l_coords differences") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 5;
    const Index u = 2;
    const EnvelopeProblem p = random_problem(r, u, rng, 2);
    CoordParam c{random_matrix(r - u, u, rng), random_perm(r, rng)};
    const Index row = trial % (r - u);
    const RowContext ctx = row_context(p, c, row);
    const Vector a1 = random_matrix(u, 1, rng).col(0);
    const Vector a2 = random_matrix(u, 1, rng).col(0);
    CoordParam c1 = c;
    CoordParam c2 = c;
    c1.a.row(row) = a1.transpose();
    c2.a.row(row) = a2.transpose();
    const double lhs = l_row(a1, ctx) - l_row(a2, ctx);
    const double rhs = l_coords(p, c1) - l_coords(p, c2);
    CHECK(std::abs(lhs - rhs) < 1e-9);
  }
}

TEST_CASE("CoordState rank-one updates track a rebuilt state") {
  std::mt19937_64 rng(30);
  const Index r = 9;
  const Index u = 3;
  const EnvelopeProblem p = random_problem(r, u, rng);
  CoordParam c{random_matrix(r - u, u, rng), random_perm(r, rng)};
  CoordState state(p, c);
  for (int step = 0; step < 30; ++step) {
    const Index row = step % (r - u);
    const Vector a = random_matrix(u, 1, rng).col(0);
    state.set_row(row, a);
    c.a.row(row) = a.transpose();
  }
  CHECK(std::abs(state.objective() - l_coords(p, c)) < 1e-9);
  const RowContext inc = state.context(1);
  const RowContext fresh = row_context(p, c, 1);
  CHECK((inc.w1 - fresh.w1).norm() < 1e-9 * fresh.w1.norm());
  CHECK((inc.w2 - fresh.w2).norm() < 1e-9 * fresh.w2.norm());
  CHECK((inc.offset1 - fresh.offset1).norm() < 1e-9);
  CHECK((state.coords().a - c.a).norm() == 0.0);
}

TEST_CASE("l_row: coinciding quadratic minimizers") {
  RowContext ctx;
  ctx.w1 = ctx.w1_inv = Matrix::Identity(2, 2);
  ctx.w2 = ctx.w2_inv = Matrix::Identity(2, 2);
  ctx.gram_inv = Matrix::Identity(2, 2);
  ctx.offset1 = ctx.offset2 = Vector::Constant(2, 0.3);
  ctx.m22 = 1.5;
  ctx.v22 = 0.5;
  const Vector a = -ctx.offset1;
  CHECK(l_row(a, ctx) == doctest::Approx(-2.0 * std::log(1.0 + a.squaredNorm())));
}

TEST_CASE("l_row derivatives match central finite differences") {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index r = 6;
    const Index u = 1 + trial % 4;
    const EnvelopeProblem p = random_problem(r, u, rng, 1 + trial % 3);
    const CoordParam c{random_matrix(r - u, u, rng), random_perm(r, rng)};
    const RowContext ctx = row_context(p, c, trial % (r - u));
    const Vector a = random_matrix(u, 1, rng).col(0);
    const RowDerivatives d = l_row_derivatives(a, ctx);
    CHECK(d.value == doctest::Approx(l_row(a, ctx)).epsilon(1e-12));

    const double h = 1e-5;
    Vector fd_grad(u);
    Matrix fd_hess(u, u);
    for (Index k = 0; k < u; ++k) {
      Vector ap = a, am = a;
      ap(k) += h;
      am(k) -= h;
      fd_grad(k) = (l_row(ap, ctx) - l_row(am, ctx)) / (2 * h);
      fd_hess.col(k) = (l_row_derivatives(ap, ctx).gradient - l_row_derivatives(am, ctx).gradient) / (2 * h);
    }
    CHECK((fd_grad - d.gradient).norm() <= 1e-5 * std::max(1.0, d.gradient.norm()));
    CHECK((fd_hess - d.hessian).norm() <= 1e-4 * std::max(1.0, d.hessian.norm()));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("J objectives") {
  SUBCASE("Û = 0: J is the same for every subset") {
    std::mt19937_64 rng(32);
    const EnvelopeProblem p(SpdMatrix(random_spd(6, rng)), SymmetricMatrix(Matrix::Zero(6, 6)), 2);
    const auto all = subsets(6, 2);
    const double first = j_objective(p, all.front());
    for (const auto& s : all) CHECK(std::abs(j_objective(p, s) - first) < 1e-9);
    CHECK(first == doctest::Approx(p.m_hat().log_det()).epsilon(1e-10));
  }
  SUBCASE("argmin J = argmin l_basis over eigenvector subsets (r = 6, u = 2)") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
      const EnvelopeProblem p = random_problem(6, 2, rng);
      const auto all = subsets(6, 2);
      std::size_t arg_l = 0, arg_j = 0, arg_ls = 0, arg_js = 0;
      std::vector<double> l(all.size()), j(all.size()), ls(all.size()), js(all.size());
      for (std::size_t k = 0; k < all.size(); ++k) {
        l[k] = l_basis(p, Basis(columns(p.eigen_m().vectors.matrix(), all[k])));
        j[k] = j_objective(p, all[k]);
        ls[k] = l_basis(p, Basis(columns(p.eigen_sum().vectors.matrix(), all[k])));
        js[k] = j_star_objective(p, all[k]);
        if (l[k] < l[arg_l]) arg_l = k;
        if (j[k] < j[arg_j]) arg_j = k;
        if (ls[k] < ls[arg_ls]) arg_ls = k;
        if (js[k] < js[arg_js]) arg_js = k;
        // Over eigenvectors of M̂, L − J = −log|M̂+Û|; over eigenvectors of M̂+Û, L = J*.
        CHECK(l[k] - j[k] == doctest::Approx(-p.sum().log_det()).epsilon(1e-9));
        CHECK(std::abs(ls[k] - js[k]) < 1e-9);
      }
      CHECK(arg_l == arg_j);
      CHECK(arg_ls == arg_js);
    }
  }
  SUBCASE("duplicate indices are rejected") {
    std::mt19937_64 rng(34);
    const EnvelopeProblem p = random_problem(4, 2, rng);
    const std::vector<Index> dup{1, 1};
    try {
      j_objective(p, dup);
      FAIL("expected InvalidInput");
    } catch (const EnvelopeError& e) {
      CHECK(e.code() == ErrorCode::InvalidInput);
    }
    CHECK_THROWS_AS(j_star_objective(p, dup), EnvelopeError);
  }
}

TEST_CASE("log-determinant split inequality and its equality case") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const Index r = 6;
    const Index u = 1 + trial % 5;
    const Matrix m = random_spd(r, rng);
    const Matrix full = random_orthogonal(r, rng);
    const Matrix g = full.leftCols(u);
    const Matrix g0 = full.rightCols(r - u);
    const double log_m = log_det_spd(m);
    const double split = log_det_spd(g.transpose() * m * g) + log_det_spd(g0.transpose() * m * g0);
    CHECK(split >= log_m - 1e-9);
    CHECK(log_det_spd(g.transpose() * m * g) + log_det_spd(g.transpose() * m.inverse() * g) >= -1e-9);

    const EigenDecomposition e = eigen_sym(SymmetricMatrix(m));
    const Matrix& v = e.vectors.matrix();
    const Matrix ge = v.leftCols(u);
    const Matrix ge0 = v.rightCols(r - u);
    const double eq = log_det_spd(ge.transpose() * m * ge) + log_det_spd(ge0.transpose() * m * ge0);
    CHECK(std::abs(eq - log_m) < 1e-8);
  }
}
