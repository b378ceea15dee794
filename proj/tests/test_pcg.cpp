#include <gtest/gtest.h>

#include <cstring>

#include "bregman_precond/pcg.hpp"
#include "support.hpp"

using namespace bprec;
using namespace testing_support;

namespace {

Matrix with_spectrum(const Vector& eigs, std::uint64_t seed) {
  const Matrix v = random_orthogonal(eigs.size(), eigs.size(), seed);
  return v * eigs.asDiagonal() * v.transpose();
}

double s_norm(const Matrix& s, const Vector& e) { return std::sqrt(e.dot(s * e)); }

Preconditioner dense_preconditioner(const Matrix& p) {
  auto inv = std::make_shared<const Matrix>(p.inverse());
  auto fwd = std::make_shared<const Matrix>(p);
  return Preconditioner(
      p.rows(), PreconditionerKind::sgs, [inv](const Vector& x) -> Vector { return (*inv) * x; },
      [fwd](const Vector& x) -> Vector { return (*fwd) * x; });
}

}  // namespace

TEST(Pcg, IdentityConvergesInOne) {
  const Vector b = random_vector(9, 1);
  const SolveReport rep = pcg_solve(identity_operator(9), b, identity_preconditioner(9), 1e-12, 10);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_EQ(rep.termination, Termination::converged);
  EXPECT_LE((rep.solution - b).norm(), 1e-14);
}

TEST(Pcg, DistinctEigenvaluesBoundIterations) {
  Vector eigs(20);
  for (Index i = 0; i < 20; ++i) eigs(i) = 1.0 + static_cast<double>(i % 5);
  const Matrix s = with_spectrum(eigs, 2);
  const SolveReport rep =
      pcg_solve(dense_operator(DenseSym(s)), random_vector(20, 3), identity_preconditioner(20), 1e-10, 100);
  EXPECT_EQ(rep.termination, Termination::converged);
  EXPECT_LE(rep.iterations, 5);
}

TEST(Pcg, DiagonalExampleStepBound) {
  const Vector a = example_a(), b = example_b();
  const FactoredSpd q = diagonal_factor(a);
  const Preconditioner p = build_scaled(q, truncated_evd(Matrix(b.cwiseQuotient(a).asDiagonal()), 2));
  const SolveReport rep =
      pcg_solve(diagonal_operator(a + b), random_vector(6, 4), p, 1e-10, 100);
  EXPECT_EQ(rep.termination, Termination::converged);
  EXPECT_LE(rep.iterations, 3);
}

TEST(Pcg, HistoryShape) {
  const Matrix s = random_spd(15, 5);
  const Vector b = random_vector(15, 6);
  const SolveReport rep = pcg_solve(dense_operator(DenseSym(s)), b, identity_preconditioner(15), 1e-9, 200);
  ASSERT_EQ(rep.residual_history.size(), static_cast<std::size_t>(rep.iterations + 1));
  EXPECT_DOUBLE_EQ(rep.residual_history.front(), 1.0);
  EXPECT_LE(rep.final_residual(), 1e-9);
  EXPECT_LE((s * rep.solution - b).norm() / b.norm(), 1e-8);
}

TEST(Pcg, MaxIterAndZeroRhs) {
  const Matrix s = random_spd(30, 7);
  const SolveReport rep =
      pcg_solve(dense_operator(DenseSym(s)), random_vector(30, 8), identity_preconditioner(30), 1e-14, 3);
  EXPECT_EQ(rep.termination, Termination::max_iter);
  EXPECT_EQ(rep.iterations, 3);
  const SolveReport zero =
      pcg_solve(dense_operator(DenseSym(s)), Vector::Zero(30), identity_preconditioner(30), 1e-8, 10);
  EXPECT_EQ(zero.termination, Termination::converged);
  EXPECT_EQ(zero.solution, Vector::Zero(30));
}

TEST(Pcg, InitialGuessUsed) {
  const Matrix s = random_spd(10, 9);
  const Vector x = random_vector(10, 10);
  const Vector b = s * x;
  const SolveReport rep = pcg_solve(dense_operator(DenseSym(s)), b, identity_preconditioner(10), 1e-8, 50, x);
  EXPECT_EQ(rep.iterations, 0);
}

TEST(Pcg, BreakdownOnIndefinite) {
  Vector d(2);
  d << 1, -1;
  const SolveReport rep = pcg_solve(diagonal_operator(d), Vector::Ones(2), identity_preconditioner(2), 1e-10, 10);
  EXPECT_EQ(rep.termination, Termination::breakdown);
}

TEST(Pcg, DimensionMismatch) {
  EXPECT_THROW(pcg_solve(identity_operator(3), Vector::Ones(4), identity_preconditioner(3), 1e-8, 5),
               DimensionMismatch);
  EXPECT_THROW(pcg_solve(identity_operator(3), Vector::Ones(3), identity_preconditioner(4), 1e-8, 5),
               DimensionMismatch);
}

TEST(Pcg, MonotoneEnergyErrorAndKappaBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix s = random_spd(40, 20 + seed);
    const Matrix pm = Matrix(s.diagonal().asDiagonal()) + 0.1 * random_psd(40, 3, 30 + seed);
    const Preconditioner p = dense_preconditioner(pm);
    const Vector b = random_vector(40, 40 + seed);
    const Vector x = s.llt().solve(b);
    const Vector ge = oracle_gen_eigs(pm, s);
    const double kappa = ge(0) / ge(ge.size() - 1);
    const double rate = (std::sqrt(kappa) - 1) / (std::sqrt(kappa) + 1);
    const double e0 = s_norm(s, x);
    std::vector<double> errors;
    PcgOptions opts;
    opts.tol = 1e-12;
    opts.maxit = 200;
    opts.observer = [&](int, const Vector& xk) { errors.push_back(s_norm(s, Vector(x - xk))); };
    pcg_solve(dense_operator(DenseSym(s)), b, p, opts);
    ASSERT_GE(errors.size(), 2u);
    for (std::size_t k = 1; k < errors.size(); ++k) {
      EXPECT_LE(errors[k], errors[k - 1] + 1e-10 * e0);
      EXPECT_LE(errors[k], 2.0 * std::pow(rate, static_cast<double>(k)) * e0 + 1e-10 * e0);
    }
  }
}

TEST(Pcg, Deterministic) {
  const Matrix s = random_spd(25, 11);
  const Vector b = random_vector(25, 12);
  const Preconditioner p = build_jacobi(DenseSym(s));
  const SolveReport a = pcg_solve(dense_operator(DenseSym(s)), b, p, 1e-10, 100);
  const SolveReport c = pcg_solve(dense_operator(DenseSym(s)), b, p, 1e-10, 100);
  EXPECT_EQ(a.iterations, c.iterations);
  EXPECT_EQ(0, std::memcmp(a.solution.data(), c.solution.data(), sizeof(double) * 25));
  EXPECT_EQ(a.residual_history, c.residual_history);
}

TEST(GeneralizedEigs, PreconditionerEqualToS) {
  const Matrix s = random_spd(8, 13);
  const Vector ge = generalized_eigs(dense_preconditioner(s), DenseSym(s));
  EXPECT_LE((ge - Vector::Ones(8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GeneralizedEigs, DiagonalExample) {
  const Vector a = example_a(), b = example_b();
  const Preconditioner p =
      build_scaled(diagonal_factor(a), truncated_evd(Matrix(b.cwiseQuotient(a).asDiagonal()), 2));
  const Vector ge = generalized_eigs(p, DenseSym::diagonal(a + b));
  Vector want(6);
  want << 1 + 0.25 / 0.375, 1 + 0.5 / 1.05, 1, 1, 1, 1;
  EXPECT_LE((ge - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(ge(0), 1.6667, 5e-5);
  EXPECT_NEAR(ge(1), 1.4762, 5e-5);
}

TEST(GeneralizedEigs, RandomAgainstOracle) {
  const Matrix s = random_spd(14, 14), pm = random_spd(14, 15);
  const Vector ge = generalized_eigs(dense_preconditioner(pm), DenseSym(s));
  const Vector want = oracle_gen_eigs(pm, s);
  EXPECT_LE((ge - want).cwiseAbs().maxCoeff(), 1e-8 * want(0));
  EXPECT_GT(ge.minCoeff(), 0.0);
}

TEST(GeneralizedEigs, CapEnforced) {
  EXPECT_THROW(generalized_eigs(identity_preconditioner(5), DenseSym::identity(5), 4), InvalidArgument);
}

TEST(ExtremeEigenvalues, MatchesDenseOracle) {
  const Matrix s = with_spectrum(Vector::LinSpaced(60, 0.01, 50.0), 16);
  const ExtremeEigs e = extreme_eigenvalues(dense_operator(DenseSym(s)), 60, 17);
  EXPECT_NEAR(e.largest, 50.0, 1e-8);
  EXPECT_NEAR(e.smallest, 0.01, 1e-8);
}

TEST(OneNormEstimate, LowerBoundAndClose) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix m = random_spd(30, 50 + seed);
    const double exact = m.cwiseAbs().colwise().sum().maxCoeff();
    const double est =
        one_norm_estimate([&m](const Vector& x) -> Vector { return m * x; }, 30, 2, 5, seed);
    EXPECT_LE(est, exact * (1 + 1e-12));
    EXPECT_GE(est, exact / 3.0);
  }
  const Vector d = Vector::LinSpaced(10, 1, 7);
  EXPECT_NEAR(one_norm_estimate([&d](const Vector& x) -> Vector { return d.cwiseProduct(x); }, 10), 7.0,
              1e-12);
}
