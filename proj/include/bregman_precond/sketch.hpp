#pragma once

// Low-rank PSD approximations in eigen-form U diag(values) U^T:
// deterministic truncation, randomized EVD with optional power iterations,
// Nystrom (plain and with a QR'd range), and the single-view variant.

#include <algorithm>
#include <cstdint>
#include <string>

#include "linop.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace bprec {

/// Rank-r PSD matrix U diag(values) U^T with orthonormal U and descending,
/// nonnegative values.
struct LowRankEig {
  Matrix basis;   // n x r
  Vector values;  // r
  /// Number of slightly negative eigenvalues that were clamped to zero.
  int clamped = 0;

  static LowRankEig zero(Index n) { return {Matrix(n, 0), Vector(0), 0}; }

  Index dim() const { return basis.rows(); }
  Index rank() const { return values.size(); }

  Matrix dense() const { return basis * values.asDiagonal() * basis.transpose(); }
  Vector apply(const Vector& x) const { return basis * values.cwiseProduct(basis.transpose() * x); }
};

struct SketchConfig {
  Index rank = 1;
  Index oversampling = 0;
  int power = 0;
  std::uint64_t seed = 0;

  Index sketch_size() const { return rank + oversampling; }

  void validate(Index n) const {
    if (rank < 1) throw InvalidArgument("SketchConfig: rank must be >= 1");
    if (oversampling < 0) throw InvalidArgument("SketchConfig: oversampling must be >= 0");
    if (power < 0) throw InvalidArgument("SketchConfig: power iterations must be >= 0");
    if (rank + oversampling > n)
      throw InvalidArgument("SketchConfig: rank + oversampling (" +
                            std::to_string(rank + oversampling) + ") exceeds dimension " +
                            std::to_string(n));
  }
};

enum class NystromRange { raw, qr_of_sketch };

namespace detail {

inline constexpr double kNegativeEigTolerance = 1e-10;
inline constexpr double kPinvThreshold = 1e-12;
inline constexpr double kRankDeficientThreshold = 1e-14;
inline constexpr double kCoreConditionLimit = 1e12;

/// Clamp values in (-tol * lambda_max, 0) to zero; anything more negative is an error.
inline int clamp_psd(Vector& values, const char* where) {
  if (values.size() == 0) return 0;
  const double top = std::max(values.maxCoeff(), 0.0);
  int clamped = 0;
  for (Index i = 0; i < values.size(); ++i) {
    if (values(i) >= 0.0) continue;
    if (values(i) < -kNegativeEigTolerance * top)
      throw IndefiniteInput(std::string(where) + ": eigenvalue " + std::to_string(values(i)) +
                            " below PSD tolerance");
    values(i) = 0.0;
    ++clamped;
  }
  return clamped;
}

/// Leading r eigenpairs of a small symmetric matrix, mapped through `range`.
inline LowRankEig project_leading(const Matrix& range, const Matrix& core, Index r,
                                  const char* where) {
  const SymEig eig = dense_eig_sym(core);
  const Index keep = std::min<Index>(r, eig.values.size());
  LowRankEig out;
  out.values = eig.values.head(keep);
  out.clamped = clamp_psd(out.values, where);
  out.basis = range * eig.vectors.leftCols(keep);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Best rank-r PSD approximation (Eckart-Young) from a full eigendecomposition.
inline LowRankEig truncated_evd(const Matrix& g, Index r) {
  const Index n = g.rows();
  if (r < 0 || r > n) throw InvalidArgument("truncated_evd: rank out of range");
  const SymEig eig = dense_eig_sym(g);
  const double top = n > 0 ? std::max(eig.values(0), 0.0) : 0.0;
  if (n > 0 && eig.values(n - 1) < -detail::kNegativeEigTolerance * top)
    throw IndefiniteInput("truncated_evd: input is indefinite (lambda_min = " +
                          std::to_string(eig.values(n - 1)) + ")");
  LowRankEig out;
  out.values = eig.values.head(r);
  out.clamped = detail::clamp_psd(out.values, "truncated_evd");
  out.basis = eig.vectors.leftCols(r);
  return out;
}

inline LowRankEig truncated_evd(const DenseSym& g, Index r) { return truncated_evd(g.matrix(), r); }

inline LowRankEig truncated_evd(const LinearOperator& g, Index r) {
  const Matrix dense = g.to_dense();
  return truncated_evd(Matrix(0.5 * (dense + dense.transpose())), r);
}

/// n x k matrix of i.i.d. standard normals; entry (i, j) depends only on
/// (seed, stream, i, j).
inline Matrix gaussian_test_matrix(Index n, Index k, std::uint64_t seed, std::uint64_t stream = 0) {
  if (k > n) throw InvalidArgument("gaussian_test_matrix: k > n");
  if (k < 0 || n < 0) throw InvalidArgument("gaussian_test_matrix: negative size");
  return GaussianStream(seed, stream).matrix(n, k);
}

enum class RankPolicy { strict, tolerate };

/// Orthonormal basis of range(G^(2q+1) Omega), consuming exactly (2q+1) k
/// products with G. Intermediate blocks are re-orthonormalized, which leaves
/// the range unchanged.
inline Matrix range_finder(const LinearOperator& g, Index k, int q, std::uint64_t seed,
                           RankPolicy policy = RankPolicy::strict) {
  const Index n = g.dim();
  if (k < 1 || k > n) throw InvalidArgument("range_finder: need 1 <= k <= n");
  if (q < 0) throw InvalidArgument("range_finder: q must be >= 0");
  Matrix y = g.apply(gaussian_test_matrix(n, k, seed));
  for (int it = 0; it < q; ++it) {
    y = g.apply(thin_qr(y).q);
    y = g.apply(thin_qr(y).q);
  }
  ThinQr qr = thin_qr(y);
  if (policy == RankPolicy::strict) {
    const Vector diag = qr.r.diagonal().cwiseAbs();
    const double top = diag.maxCoeff();
    if (!(top > 0.0) || diag.minCoeff() < detail::kRankDeficientThreshold * top)
      throw RankDeficientSketch("range_finder: sketch is numerically rank deficient");
  }
  return std::move(qr.q);
}

/// Randomized EVD: Theta from the (power) range finder with r + p columns,
/// C = Theta^T G Theta, keep the r leading eigenpairs of C.
/// Products with G: (2q + 1)(r + p) + (r + p).
inline LowRankEig randomized_evd(const LinearOperator& g, const SketchConfig& cfg) {
  cfg.validate(g.dim());
  // A rank-deficient sketch still yields an orthonormal Householder basis, and
  // Theta Theta^T G Theta Theta^T stays a valid approximation.
  const Matrix theta =
      range_finder(g, cfg.sketch_size(), cfg.power, cfg.seed, RankPolicy::tolerate);
  const Matrix gtheta = g.apply(theta);
  return detail::project_leading(theta, theta.transpose() * gtheta, cfg.rank, "randomized_evd");
}

/// Nystrom approximation (G Omega)(Omega^T G Omega)^+ (G Omega)^T for an
/// explicit test matrix, truncated to its r leading eigenpairs.
inline LowRankEig nystrom(const LinearOperator& g, const Matrix& omega, Index r) {
  check_dim(g.dim(), omega.rows(), "nystrom");
  if (r < 1) throw InvalidArgument("nystrom: rank must be >= 1");
  const Matrix y = g.apply(omega);
  if (y.cwiseAbs().maxCoeff() == 0.0) throw ZeroSketch("nystrom: sketch G*Omega is identically zero");

  const Matrix core = omega.transpose() * y;
  const SymEig eig = dense_eig_sym(Matrix(0.5 * (core + core.transpose())));
  const double cutoff = detail::kPinvThreshold * std::max(std::abs(eig.values(0)),
                                                          std::abs(eig.values(eig.values.size() - 1)));
  Index kept = 0;
  while (kept < eig.values.size() && eig.values(kept) > cutoff) ++kept;
  if (kept == 0) throw ZeroSketch("nystrom: core matrix is numerically zero");

  // Nys = F F^T with F = Y W_+ C_+^{-1/2}
  const Matrix f = y * eig.vectors.leftCols(kept) *
                   eig.values.head(kept).cwiseSqrt().cwiseInverse().asDiagonal();
  const ThinQr qr = thin_qr(f);
  return detail::project_leading(qr.q, qr.r * qr.r.transpose(), r, "nystrom");
}

/// Nystrom with a drawn Gaussian Omega (r + p columns). With
/// NystromRange::qr_of_sketch, Omega is replaced by an orthonormal basis of
/// G Omega (one extra pass over G). `cfg.power` is not used here.
inline LowRankEig nystrom(const LinearOperator& g, const SketchConfig& cfg, NystromRange mode) {
  cfg.validate(g.dim());
  Matrix omega = gaussian_test_matrix(g.dim(), cfg.sketch_size(), cfg.seed);
  if (mode == NystromRange::qr_of_sketch) omega = thin_qr(g.apply(omega)).q;
  return nystrom(g, omega, cfg.rank);
}

/// Single-view randomized EVD: one pass Y = G Omega, Theta = qr(Y), and
/// Pi solved from Pi (Theta^T Omega) = Theta^T Y, then symmetrized.
/// Mathematically identical to nystrom(G, Omega, r) for the same Omega.
inline LowRankEig single_pass_evd(const LinearOperator& g, const Matrix& omega) {
  check_dim(g.dim(), omega.rows(), "single_pass_evd");
  const Index r = omega.cols();
  const Matrix y = g.apply(omega);
  const Matrix theta = thin_qr(y).q;
  const Matrix m = theta.transpose() * omega;

  const Eigen::JacobiSVD<Matrix> svd(m);
  const Vector sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || sv(0) / smin > detail::kCoreConditionLimit)
    throw IllConditionedCore("single_pass_evd: Theta^T Omega is ill-conditioned");

  // Pi M = Theta^T Y  <=>  M^T Pi^T = (Theta^T Y)^T
  const Matrix rhs = theta.transpose() * y;
  const Matrix pi_t = m.transpose().partialPivLu().solve(rhs.transpose());
  const Matrix pi = 0.5 * (pi_t + pi_t.transpose());
  return detail::project_leading(theta, pi, r, "single_pass_evd");
}

inline LowRankEig single_pass_evd(const LinearOperator& g, Index r, std::uint64_t seed) {
  if (r < 1 || r > g.dim()) throw InvalidArgument("single_pass_evd: need 1 <= r <= n");
  return single_pass_evd(g, gaussian_test_matrix(g.dim(), r, seed));
}

}  // namespace bprec
