#pragma once

// Matrix divergences on SPD matrices and the randomized suboptimality bounds.

#include <cmath>
#include <numbers>
#include <utility>

#include "linop.hpp"
#include "types.hpp"

namespace bprec {

struct DivergenceReport {
  double value = 0.0;
  double trace_term = 0.0;   // trace(X Y^{-1})
  double logdet_term = 0.0;  // -logdet(X Y^{-1})
};

/// D_LD(X, Y) = trace(X Y^{-1}) - logdet(X Y^{-1}) - n.
/// With X = Lx Lx^T and Y = Ly Ly^T: trace(X Y^{-1}) = ||Ly^{-1} Lx||_F^2 and
/// logdet(X Y^{-1}) = logdet X - logdet Y, both from Cholesky pivots.
inline DivergenceReport divergence_ld(const DenseSym& x, const DenseSym& y) {
  check_dim(y.dim(), x.dim(), "divergence_ld");
  const Index n = x.dim();
  const Cholesky lx(x);
  const Cholesky ly(y);
  const Matrix z = ly.lower().triangularView<Eigen::Lower>().solve(lx.lower());
  DivergenceReport out;
  out.trace_term = z.squaredNorm();
  out.logdet_term = -(lx.logdet() - ly.logdet());
  out.value = out.trace_term + out.logdet_term - static_cast<double>(n);
  return out;
}

/// f(mu) = 1/(1+mu) - log(1/(1+mu)) - 1, the per-eigenvalue cost of dropping mu.
inline double dropped_eigenvalue_cost(double mu) {
  const double t = 1.0 / (1.0 + mu);
  return t - std::log(t) - 1.0;
}

/// D_LD(Q(I+G_r)Q^T, S) = sum over the discarded eigenvalues of G.
/// `mu` holds the eigenvalues of G in descending order; zeros contribute nothing.
inline double divergence_scaled_closed_form(const Vector& mu, Index r) {
  double total = 0.0;
  for (Index j = std::max<Index>(r, 0); j < mu.size(); ++j) {
    if (mu(j) < 0.0) throw InvalidArgument("divergence_scaled_closed_form: negative eigenvalue");
    total += dropped_eigenvalue_cost(mu(j));
  }
  return total;
}

inline double divergence_frobenius(const DenseSym& x, const DenseSym& y) {
  check_dim(y.dim(), x.dim(), "divergence_frobenius");
  return (x.matrix() - y.matrix()).squaredNorm();
}

namespace detail {

inline Matrix spd_log(const SymEig& eig, const char* which) {
  for (Index i = 0; i < eig.values.size(); ++i)
    if (!(eig.values(i) > 0.0))
      throw NotPositiveDefinite(i, std::string("von Neumann divergence: ") + which);
  return eig.vectors * eig.values.array().log().matrix().asDiagonal() * eig.vectors.transpose();
}

}  // namespace detail

/// D_VN(X, Y) = trace(X log X - X log Y - X + Y), logs taken in the eigenbasis.
inline double divergence_von_neumann(const DenseSym& x, const DenseSym& y) {
  check_dim(y.dim(), x.dim(), "divergence_von_neumann");
  const SymEig ex = dense_eig_sym(x);
  const SymEig ey = dense_eig_sym(y);
  const Matrix log_x = detail::spd_log(ex, "X");
  const Matrix log_y = detail::spd_log(ey, "Y");
  const Matrix& xm = x.matrix();
  return (xm * (log_x - log_y)).trace() - xm.trace() + y.matrix().trace();
}

/// Eigenbasis decomposition of D_LD(X, Y). With X = sum lambda_i u_i u_i^T and
/// Y = sum theta_j v_j v_j^T,
///   alignment(i, j)    = (u_i^T v_j)^2
///   scalar_terms(i, j) = lambda_i / theta_j - log(lambda_i / theta_j) - 1
/// and D_LD(X, Y) = sum_ij alignment(i, j) * scalar_terms(i, j).
struct TermMatrix {
  Matrix alignment;
  Matrix scalar_terms;
  Vector x_values;  // lambda, descending
  Vector y_values;  // theta, descending

  double total() const { return alignment.cwiseProduct(scalar_terms).sum(); }
};

inline TermMatrix divergence_terms(const DenseSym& x, const DenseSym& y) {
  check_dim(y.dim(), x.dim(), "divergence_terms");
  // Cholesky doubles as the SPD check.
  (void)Cholesky(x);
  (void)Cholesky(y);
  const SymEig ex = dense_eig_sym(x);
  const SymEig ey = dense_eig_sym(y);
  const Index n = x.dim();
  TermMatrix out;
  out.alignment = (ex.vectors.transpose() * ey.vectors).array().square().matrix();
  out.scalar_terms.resize(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double ratio = ex.values(i) / ey.values(j);
      out.scalar_terms(i, j) = ratio - std::log(ratio) - 1.0;
    }
  out.x_values = ex.values;
  out.y_values = ey.values;
  return out;
}

// ---------------------------------------------------------------------------
// Bounds on E[D_LD(S_rand, S)] - D_LD(S_opt, S) for randomized G approximations.

namespace detail {

/// Number of eigenvalues above a relative zero threshold (rank of G, hence of B).
inline Index numerical_rank(const Vector& spectrum) {
  if (spectrum.size() == 0) return 0;
  const double top = spectrum.cwiseAbs().maxCoeff();
  Index rank = 0;
  for (Index i = 0; i < spectrum.size(); ++i)
    if (spectrum(i) > 1e-12 * top) ++rank;
  return rank;
}

inline void check_spectrum(const Vector& spectrum) {
  for (Index i = 0; i < spectrum.size(); ++i)
    if (spectrum(i) < 0.0) throw InvalidArgument("bound: spectrum must be nonnegative");
  for (Index i = 1; i < spectrum.size(); ++i)
    if (spectrum(i) > spectrum(i - 1)) throw InvalidArgument("bound: spectrum must be descending");
}

inline double tail_norm(const Vector& spectrum, Index r) {
  if (r >= spectrum.size()) return 0.0;
  return spectrum.tail(spectrum.size() - r).norm();
}

/// c_r = ||(I+G)^{-1}||_F + r / (1 + lambda_rank(B)(G))
inline double bound_constant(const Vector& spectrum, Index r) {
  const double inv_frob = (spectrum.array() + 1.0).inverse().matrix().norm();
  const Index rank = numerical_rank(spectrum);
  const double smallest_nonzero = rank > 0 ? spectrum(rank - 1) : 0.0;
  return inv_frob + static_cast<double>(r) / (1.0 + smallest_nonzero);
}

}  // namespace detail

struct SuboptimalityBound {
  double absolute = 0.0;
  double relative = 0.0;
  double epsilon = 0.0;
  double constant = 0.0;  // c_r
};

/// Expected-suboptimality bound 2 eps c_r (p >= 2) and its relative form.
/// `spectrum` is the full descending eigenvalue list of G (length n).
inline SuboptimalityBound suboptimality_bound(const Vector& spectrum, Index r, Index p) {
  if (p < 2) throw HypothesisViolated("suboptimality_bound requires oversampling p >= 2");
  detail::check_spectrum(spectrum);
  const Index n = spectrum.size();
  if (r < 0 || r >= n) throw InvalidArgument("suboptimality_bound: need 0 <= r < n");
  const double oversample = 1.0 + static_cast<double>(r) / static_cast<double>(p - 1);

  SuboptimalityBound out;
  out.constant = detail::bound_constant(spectrum, r);
  out.epsilon = std::sqrt(oversample) * detail::tail_norm(spectrum, r);
  out.absolute = 2.0 * out.epsilon * out.constant;

  const Index rank = detail::numerical_rank(spectrum);
  const double smallest_nonzero = rank > 0 ? spectrum(rank - 1) : 0.0;
  const double floor_cost = dropped_eigenvalue_cost(smallest_nonzero);
  const double lead = spectrum(r);
  if (lead == 0.0) {
    out.relative = 0.0;
  } else {
    out.relative = 2.0 * out.constant * std::sqrt(oversample / static_cast<double>(n - r)) * lead /
                   floor_cost;
  }
  return out;
}

struct DeviationBound {
  double bound = 0.0;
  double probability = 0.0;
};

/// Tail bound for p >= 4 and u, t >= 1:
/// 2 c_r [ (1 + t sqrt(3r/(p+1))) ||tail|| + u t e sqrt(r+p)/(p+1) lambda_{r+1} ].
/// It fails with probability at most 2 t^{-p} + exp(-u^2/2).
inline DeviationBound deviation_bound(const Vector& spectrum, Index r, Index p, double u, double t) {
  if (p < 4) throw HypothesisViolated("deviation_bound requires oversampling p >= 4");
  if (!(u >= 1.0) || !(t >= 1.0)) throw InvalidArgument("deviation_bound: need u, t >= 1");
  detail::check_spectrum(spectrum);
  if (r < 0 || r >= spectrum.size()) throw InvalidArgument("deviation_bound: need 0 <= r < n");
  const double rd = static_cast<double>(r);
  const double pd = static_cast<double>(p);
  const double c = detail::bound_constant(spectrum, r);
  const double tail = detail::tail_norm(spectrum, r);
  const double lead = spectrum(r);
  DeviationBound out;
  out.bound = 2.0 * c *
              ((1.0 + t * std::sqrt(3.0 * rd / (pd + 1.0))) * tail +
               u * t * std::numbers::e * std::sqrt(rd + pd) / (pd + 1.0) * lead);
  out.probability = 1.0 - 2.0 * std::pow(t, -pd) - std::exp(-u * u / 2.0);
  return out;
}

}  // namespace bprec
