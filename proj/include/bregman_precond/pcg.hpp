#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "linop.hpp"
#include "precond.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace bprec {

enum class Termination { converged, max_iter, breakdown };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iter: return "max_iter";
    case Termination::breakdown: return "breakdown";
  }
  return "unknown";
}

struct SolveReport {
  Vector solution;
  int iterations = 0;
  /// ||b - S x_k|| / ||b|| for k = 0..iterations.
  std::vector<double> residual_history;
  Termination termination = Termination::max_iter;

  double final_residual() const { return residual_history.back(); }
};

struct PcgOptions {
  double tol = 1e-7;
  int maxit = 1000;
  std::optional<Vector> x0;
  /// Recompute b - S x explicitly every this many iterations (0 disables).
  int residual_refresh = 50;
  /// Called with (k, x_k) after every iteration, including k = 0.
  std::function<void(int, const Vector&)> observer;
};

/// Plain preconditioned conjugate gradients (no restarts, no reorthogonalization).
/// Stops on the unpreconditioned relative residual.
inline SolveReport pcg_solve(const LinearOperator& s, const Vector& b, const Preconditioner& p,
                             const PcgOptions& opts) {
  const Index n = s.dim();
  check_dim(n, b.size(), "pcg_solve: right-hand side");
  check_dim(n, p.dim(), "pcg_solve: preconditioner");
  if (!(opts.tol > 0.0)) throw InvalidArgument("pcg_solve: tol must be positive");
  if (opts.maxit < 0) throw InvalidArgument("pcg_solve: maxit must be >= 0");

  SolveReport rep;
  rep.solution = opts.x0 ? *opts.x0 : Vector::Zero(n);
  check_dim(n, rep.solution.size(), "pcg_solve: x0");
  Vector& x = rep.solution;

  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.residual_history.push_back(0.0);
    rep.termination = Termination::converged;
    if (opts.observer) opts.observer(0, x);
    return rep;
  }

  Vector r = opts.x0 ? Vector(b - s.apply(x)) : b;
  rep.residual_history.push_back(r.norm() / bnorm);
  if (opts.observer) opts.observer(0, x);
  if (rep.residual_history.back() <= opts.tol) {
    rep.termination = Termination::converged;
    return rep;
  }

  Vector z = p.inverse_apply(r);
  Vector d = z;
  double rz = r.dot(z);
  for (int k = 1; k <= opts.maxit; ++k) {
    const Vector sd = s.apply(d);
    const double curvature = d.dot(sd);
    if (!(curvature > 0.0) || !(rz > 0.0)) {
      rep.termination = Termination::breakdown;
      return rep;
    }
    const double alpha = rz / curvature;
    x += alpha * d;
    if (opts.residual_refresh > 0 && k % opts.residual_refresh == 0) {
      r = b - s.apply(x);
    } else {
      r -= alpha * sd;
    }
    rep.iterations = k;
    rep.residual_history.push_back(r.norm() / bnorm);
    if (opts.observer) opts.observer(k, x);
    if (rep.residual_history.back() <= opts.tol) {
      rep.termination = Termination::converged;
      return rep;
    }
    z = p.inverse_apply(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
  }
  rep.termination = Termination::max_iter;
  return rep;
}

inline SolveReport pcg_solve(const LinearOperator& s, const Vector& b, const Preconditioner& p,
                             double tol, int maxit, std::optional<Vector> x0 = std::nullopt) {
  PcgOptions opts;
  opts.tol = tol;
  opts.maxit = maxit;
  opts.x0 = std::move(x0);
  return pcg_solve(s, b, p, opts);
}

// ---------------------------------------------------------------------------
// Spectral diagnostics.

inline constexpr Index kDefaultDenseCap = 2000;

/// Eigenvalues of P^{-1} S, descending. P^{-1} is materialized by probing and
/// factored as C C^T; the spectrum is that of the symmetric C^T S C.
inline Vector generalized_eigs(const Preconditioner& p, const DenseSym& s,
                               Index dense_cap = kDefaultDenseCap) {
  check_dim(s.dim(), p.dim(), "generalized_eigs");
  if (s.dim() > dense_cap)
    throw InvalidArgument("generalized_eigs: dimension " + std::to_string(s.dim()) +
                          " exceeds dense cap " + std::to_string(dense_cap) +
                          "; use extreme_eigenvalues() for an estimate instead");
  const Cholesky c(p.dense_inverse());
  const Matrix& l = c.lower();
  const Matrix m = l.transpose() * s.matrix() * l;
  return dense_eig_sym(Matrix(0.5 * (m + m.transpose()))).values;
}

inline double condition_number(const Vector& descending_eigs) {
  return descending_eigs(0) / descending_eigs(descending_eigs.size() - 1);
}

struct ExtremeEigs {
  double smallest = 0.0;
  double largest = 0.0;
  int iterations = 0;
};

/// Lanczos estimate of the extreme eigenvalues of a symmetric operator, with
/// full reorthogonalization. Stops when both Ritz values settle to `rel_tol`.
inline ExtremeEigs extreme_eigenvalues(const LinearOperator& op, int max_iter, std::uint64_t seed,
                                       double rel_tol = 1e-10) {
  const Index n = op.dim();
  const int steps = static_cast<int>(std::min<Index>(max_iter, n));
  Matrix basis(n, steps + 1);
  Vector alpha(steps), beta(steps);
  Vector v = GaussianStream(seed, 7).vector(n);
  v.normalize();
  basis.col(0) = v;
  ExtremeEigs out;
  double prev_lo = 0.0, prev_hi = 0.0;
  for (int k = 0; k < steps; ++k) {
    Vector w = op.apply(Vector(basis.col(k)));
    alpha(k) = basis.col(k).dot(w);
    for (int pass = 0; pass < 2; ++pass)
      w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    beta(k) = w.norm();

    Matrix t = Matrix::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      t(i, i) = alpha(i);
      if (i < k) t(i, i + 1) = t(i + 1, i) = beta(i);
    }
    const Vector ritz = dense_eig_sym(t).values;
    out.largest = ritz(0);
    out.smallest = ritz(k);
    out.iterations = k + 1;
    const bool settled = k > 2 && std::abs(out.largest - prev_hi) <= rel_tol * std::abs(out.largest) &&
                         std::abs(out.smallest - prev_lo) <= rel_tol * std::abs(out.smallest);
    if (settled || beta(k) <= 1e-14 * std::abs(out.largest)) break;
    prev_lo = out.smallest;
    prev_hi = out.largest;
    basis.col(k + 1) = w / beta(k);
  }
  return out;
}

/// Block 1-norm estimate of a symmetric operator from its action alone
/// (Higham-Tisseur, t columns). Returns a lower bound on ||M||_1 that is exact
/// in most cases.
inline double one_norm_estimate(const std::function<Vector(const Vector&)>& apply, Index n,
                                int t = 2, int max_iter = 5, std::uint64_t seed = 0) {
  t = static_cast<int>(std::min<Index>(t, n));
  const GaussianStream rng(seed, 11);
  std::uint64_t draw = 0;
  auto random_signs = [&] {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.uniform(draw++) < 0.5 ? -1.0 : 1.0;
    return v;
  };
  auto parallel = [n](const Vector& a, const Vector& b) { return std::abs(a.dot(b)) == static_cast<double>(n); };

  Matrix x(n, t);
  x.col(0).setOnes();
  for (int j = 1; j < t; ++j) {
    Vector v = random_signs();
    for (int tries = 0; tries < 10; ++tries) {
      bool clash = false;
      for (int i = 0; i < j; ++i) clash = clash || parallel(v, x.col(i));
      if (!clash) break;
      v = random_signs();
    }
    x.col(j) = v;
  }
  x /= static_cast<double>(n);

  std::vector<Index> history;
  Matrix signs = Matrix::Zero(n, t), signs_old;
  double est = 0.0, est_old = 0.0;
  Index best = -1;
  for (int k = 1;; ++k) {
    Matrix y(n, t);
    for (int j = 0; j < t; ++j) y.col(j) = apply(Vector(x.col(j)));
    est = 0.0;
    for (int j = 0; j < t; ++j) est = std::max(est, y.col(j).lpNorm<1>());
    if (k >= 2 && est <= est_old) return est_old;
    est_old = est;
    if (k > max_iter) break;

    signs_old = signs;
    signs = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    if (k >= 2) {
      bool all_parallel = true;
      for (int j = 0; j < t && all_parallel; ++j) {
        bool found = false;
        for (int i = 0; i < t && !found; ++i) found = parallel(signs.col(j), signs_old.col(i));
        all_parallel = found;
      }
      if (all_parallel) break;
    }
    Matrix z(n, t);  // M symmetric: M^T S = M S
    for (int j = 0; j < t; ++j) z.col(j) = apply(Vector(signs.col(j)));
    Vector h = z.cwiseAbs().rowwise().maxCoeff();
    Index top = 0;
    const double hmax = h.maxCoeff(&top);
    if (k >= 2 && best >= 0 && hmax == h(best)) break;

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return h(a) > h(b); });
    best = order[0];
    auto seen = [&](Index i) { return std::find(history.begin(), history.end(), i) != history.end(); };
    bool all_seen = true;
    for (int j = 0; j < t; ++j) all_seen = all_seen && seen(order[static_cast<std::size_t>(j)]);
    if (all_seen) break;
    x.setZero();
    int filled = 0;
    for (Index i = 0; i < n && filled < t; ++i) {
      const Index idx = order[static_cast<std::size_t>(i)];
      if (seen(idx)) continue;
      x(idx, filled++) = 1.0;
      history.push_back(idx);
    }
    if (filled == 0) break;
    if (filled < t) x.conservativeResize(n, filled), t = filled;
  }
  return est_old;
}

}  // namespace bprec
