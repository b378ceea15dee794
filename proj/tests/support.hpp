#pragma once

// Shared fixtures and independent oracles for the test suite. Randomness here
// comes from std::mt19937_64 so oracles never share a generator with the code
// under test.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>

#include "bregman_precond/linop.hpp"

namespace testing_support {

using bprec::Index;
using bprec::Matrix;
using bprec::Vector;

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  return m;
}

inline Vector random_vector(Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

inline Matrix random_orthogonal(Index n, Index k, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, k, seed));
  return qr.householderQ() * Matrix::Identity(n, k);
}

/// M^T M + I
inline Matrix random_spd(Index n, std::uint64_t seed) {
  const Matrix m = random_matrix(n, n, seed);
  return m.transpose() * m + Matrix::Identity(n, n);
}

/// Orthonormal basis times spectrum, PSD with the given rank.
inline Matrix random_psd(Index n, Index rank, std::uint64_t seed, double scale = 1.0) {
  const Matrix u = random_orthogonal(n, rank, seed);
  std::mt19937_64 gen(seed ^ 0xabcdefull);
  std::uniform_real_distribution<double> dist(0.1, 2.0);
  Vector d(rank);
  for (Index i = 0; i < rank; ++i) d(i) = scale * dist(gen);
  return u * d.asDiagonal() * u.transpose();
}

/// Descending eigenvalues via Eigen's tridiagonal QR.
inline Vector oracle_eigs(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

/// Descending eigenvalues of P^{-1} S from the pencil S v = lambda P v.
inline Vector oracle_gen_eigs(const Matrix& p, const Matrix& s) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()),
                                                     0.5 * (p + p.transpose()),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

/// D_LD(X, Y) straight from the definition with Eigen's LU.
inline double oracle_divergence(const Matrix& x, const Matrix& y) {
  const Matrix xyi = x * y.inverse();
  const Eigen::PartialPivLU<Matrix> lu(xyi);
  double logdet = 0.0;
  for (Index i = 0; i < xyi.rows(); ++i) logdet += std::log(std::abs(lu.matrixLU()(i, i)));
  return xyi.trace() - logdet - static_cast<double>(x.rows());
}

inline double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// Probe an action column by column.
inline Matrix densify(Index n, const std::function<Vector(const Vector&)>& f) {
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) out.col(j) = f(Vector::Unit(n, j));
  return out;
}

// The worked 6 x 6 diagonal example.
inline Vector example_a() {
  Vector a(6);
  a << 1.1, 1.05, 0.375, 0.05, 0.05, 0.05;
  return a;
}
inline Vector example_b() {
  Vector b(6);
  b << 1, 0.5, 0.25, 0.1, 0, 0;
  return b;
}

}  // namespace testing_support
