#pragma once

// Preconditioners for S = A + B with A = Q Q^T.
//
// Every preconditioner carries both its inverse action (what PCG needs) and
// its forward action P x, so dense diagnostics can materialize P itself.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linop.hpp"
#include "sketch.hpp"
#include "types.hpp"

namespace bprec {

enum class PreconditionerKind {
  identity,
  scaled,
  nonscaled,
  lifted_scaled,
  jacobi,
  block_jacobi,
  sgs,
  partial_cholesky
};

inline std::string_view to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::identity: return "identity";
    case PreconditionerKind::scaled: return "scaled";
    case PreconditionerKind::nonscaled: return "nonscaled";
    case PreconditionerKind::lifted_scaled: return "lifted_scaled";
    case PreconditionerKind::jacobi: return "jacobi";
    case PreconditionerKind::block_jacobi: return "block_jacobi";
    case PreconditionerKind::sgs: return "sgs";
    case PreconditionerKind::partial_cholesky: return "partial_cholesky";
  }
  return "unknown";
}

struct BuildStats {
  std::uint64_t operator_products = 0;  // products with B, G, or S during construction
  std::uint64_t factor_solves = 0;      // applications of Q^{-1} / Q^{-T} during construction
};

/// Immutable SPD preconditioner. `inverse_apply` is P^{-1} x, `forward_apply` is P x.
class Preconditioner {
 public:
  using Action = std::function<Vector(const Vector&)>;

  Preconditioner(Index dim, PreconditionerKind kind, Action inverse, Action forward,
                 std::optional<Index> rank = std::nullopt, BuildStats stats = {})
      : dim_(dim),
        kind_(kind),
        inverse_(std::move(inverse)),
        forward_(std::move(forward)),
        rank_(rank),
        stats_(stats) {}

  Index dim() const { return dim_; }
  PreconditionerKind kind() const { return kind_; }
  std::optional<Index> rank_used() const { return rank_; }
  const BuildStats& build_stats() const { return stats_; }
  std::uint64_t applications() const { return applications_.value(); }

  /// Copy with construction costs replaced, for builders that sketch upstream.
  Preconditioner with_build_stats(BuildStats stats) const {
    Preconditioner out = *this;
    out.stats_ = stats;
    return out;
  }

  Vector inverse_apply(const Vector& x) const {
    check_dim(dim_, x.size(), "Preconditioner::inverse_apply");
    applications_.add();
    return inverse_(x);
  }

  Vector forward_apply(const Vector& x) const {
    check_dim(dim_, x.size(), "Preconditioner::forward_apply");
    return forward_(x);
  }

  /// Dense P by probing the forward action.
  Matrix dense() const { return probe(forward_); }
  /// Dense P^{-1} by probing the inverse action.
  Matrix dense_inverse() const { return probe(inverse_); }

 private:
  Matrix probe(const Action& action) const {
    Matrix out(dim_, dim_);
    Vector e = Vector::Zero(dim_);
    for (Index j = 0; j < dim_; ++j) {
      e(j) = 1.0;
      out.col(j) = action(e);
      e(j) = 0.0;
    }
    return 0.5 * (out + out.transpose());
  }

  Index dim_;
  PreconditionerKind kind_;
  Action inverse_;
  Action forward_;
  std::optional<Index> rank_;
  BuildStats stats_;
  ProductCounter applications_;
};

struct BlockPartition {
  std::vector<Index> sizes;

  Index total() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }

  static BlockPartition uniform(Index n, Index block) {
    if (block < 1) throw InvalidArgument("BlockPartition: block size must be >= 1");
    BlockPartition p;
    for (Index start = 0; start < n; start += block) p.sizes.push_back(std::min(block, n - start));
    return p;
  }
};

// ---------------------------------------------------------------------------

inline Preconditioner identity_preconditioner(Index n) {
  auto same = [](const Vector& x) { return x; };
  return Preconditioner(n, PreconditionerKind::identity, same, same);
}

namespace detail {

/// (I + F F^T)^{-1} y = y - F (I_r + F^T F)^{-1} F^T y with a prefactored core.
struct IdentityPlusLowRank {
  Matrix f;
  Cholesky core;

  explicit IdentityPlusLowRank(Matrix factor) : f(std::move(factor)) {
    core = Cholesky(Matrix(Matrix::Identity(f.cols(), f.cols()) + f.transpose() * f));
  }

  Vector solve(const Vector& y) const {
    if (f.cols() == 0) return y;
    return y - f * core.solve(Vector(f.transpose() * y));
  }
  Vector apply(const Vector& y) const {
    if (f.cols() == 0) return y;
    return y + f * (f.transpose() * y);
  }
};

inline Matrix scaled_factor(const LowRankEig& low_rank) {
  for (Index i = 0; i < low_rank.values.size(); ++i)
    if (low_rank.values(i) < 0.0) throw IndefiniteInput("low-rank term has a negative eigenvalue");
  return low_rank.basis * low_rank.values.cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// P = Q (I + G_r) Q^T, applied as P^{-1} x = Q^{-T} (I + F F^T)^{-1} Q^{-1} x
/// with F = U diag(sqrt(values)). Apply cost is two factor solves plus O(n r).
inline Preconditioner build_scaled(const FactoredSpd& q, const LowRankEig& g_r) {
  check_dim(q.dim, g_r.dim(), "build_scaled");
  auto inner = std::make_shared<const detail::IdentityPlusLowRank>(detail::scaled_factor(g_r));
  auto inverse = [q, inner](const Vector& x) { return q.solve_qt(inner->solve(q.solve_q(x))); };
  auto forward = [q, inner](const Vector& x) { return q.apply_q(inner->apply(q.apply_qt(x))); };
  return Preconditioner(q.dim, PreconditionerKind::scaled, inverse, forward, g_r.rank());
}

/// P = A + B_r. Woodbury on A:
/// (A + F F^T)^{-1} = A^{-1} - W (I + F^T W)^{-1} W^T, W = A^{-1} F.
inline Preconditioner build_nonscaled(const FactoredSpd& q, const LowRankEig& b_r) {
  check_dim(q.dim, b_r.dim(), "build_nonscaled");
  struct State {
    Matrix f;
    Matrix w;
    Cholesky core;
  };
  auto state = std::make_shared<State>();
  state->f = detail::scaled_factor(b_r);
  const Index r = state->f.cols();
  const std::uint64_t solves_before = q.solves.value();
  state->w.resize(q.dim, r);
  for (Index j = 0; j < r; ++j) state->w.col(j) = q.solve_a(Vector(state->f.col(j)));
  state->core = Cholesky(Matrix(Matrix::Identity(r, r) + state->f.transpose() * state->w));
  BuildStats stats;
  stats.factor_solves = q.solves.value() - solves_before;

  std::shared_ptr<const State> s = state;
  auto inverse = [q, s](const Vector& x) -> Vector {
    Vector y = q.solve_a(x);
    if (s->f.cols() == 0) return y;
    return y - s->w * s->core.solve(Vector(s->w.transpose() * x));
  };
  auto forward = [q, s](const Vector& x) -> Vector {
    Vector y = q.apply_a(x);
    if (s->f.cols() == 0) return y;
    return y + s->f * (s->f.transpose() * x);
  };
  return Preconditioner(q.dim, PreconditionerKind::nonscaled, inverse, forward, b_r.rank(), stats);
}

/// P = Q ((1 + alpha) I + U (Lambda - alpha I) U^T) Q^T, which lifts the
/// non-unit part of the preconditioned spectrum by 1 / (1 + alpha).
/// Requires an orthonormal basis U.
inline Preconditioner build_lifted_scaled(const FactoredSpd& q, const LowRankEig& g_r, double alpha) {
  check_dim(q.dim, g_r.dim(), "build_lifted_scaled");
  if (!(alpha >= 0.0)) throw InvalidArgument("build_lifted_scaled: alpha must be >= 0");
  if (!(1.0 + alpha > 0.0)) throw IndefiniteInput("build_lifted_scaled: 1 + alpha <= 0");
  for (Index i = 0; i < g_r.values.size(); ++i)
    if (!(1.0 + g_r.values(i) > 0.0))
      throw IndefiniteInput("build_lifted_scaled: 1 + lambda_" + std::to_string(i) + " <= 0");

  auto u = std::make_shared<const Matrix>(g_r.basis);
  const Vector shifted = (g_r.values.array() + 1.0).matrix();
  const double base = 1.0 + alpha;
  // [(1+a) I + U (L - a I) U^T]^{-1} = (I - U U^T) / (1+a) + U (I + L)^{-1} U^T
  auto inner_solve = [u, shifted, base](const Vector& y) -> Vector {
    const Vector c = u->transpose() * y;
    return (y - (*u) * c) / base + (*u) * c.cwiseQuotient(shifted);
  };
  auto inner_apply = [u, shifted, base](const Vector& y) -> Vector {
    const Vector c = u->transpose() * y;
    return base * (y - (*u) * c) + (*u) * c.cwiseProduct(shifted);
  };
  auto inverse = [q, inner_solve](const Vector& x) { return q.solve_qt(inner_solve(q.solve_q(x))); };
  auto forward = [q, inner_apply](const Vector& x) { return q.apply_q(inner_apply(q.apply_qt(x))); };
  return Preconditioner(q.dim, PreconditionerKind::lifted_scaled, inverse, forward, g_r.rank());
}

inline Preconditioner build_jacobi(const Vector& diagonal) {
  for (Index i = 0; i < diagonal.size(); ++i)
    if (!(diagonal(i) > 0.0)) throw NotPositiveDefinite(i, "diagonal of S");
  auto inverse = [diagonal](const Vector& x) -> Vector { return x.cwiseQuotient(diagonal); };
  auto forward = [diagonal](const Vector& x) -> Vector { return x.cwiseProduct(diagonal); };
  return Preconditioner(diagonal.size(), PreconditionerKind::jacobi, inverse, forward);
}

inline Preconditioner build_jacobi(const DenseSym& s) { return build_jacobi(Vector(s.matrix().diagonal())); }

/// blkdiag(E_i^T S E_i), each block applied through its own Cholesky factor.
inline Preconditioner build_block_jacobi(const DenseSym& s, const BlockPartition& part) {
  check_dim(s.dim(), part.total(), "build_block_jacobi");
  struct Block {
    Index offset;
    Matrix matrix;
    Cholesky chol;
  };
  auto blocks = std::make_shared<std::vector<Block>>();
  Index offset = 0;
  for (std::size_t b = 0; b < part.sizes.size(); ++b) {
    const Index size = part.sizes[b];
    if (size < 1) throw InvalidArgument("build_block_jacobi: empty block");
    Matrix block = s.matrix().block(offset, offset, size, size);
    try {
      Cholesky chol(block);
      blocks->push_back({offset, std::move(block), std::move(chol)});
    } catch (const NotPositiveDefinite&) {
      throw NotPositiveDefinite(static_cast<Index>(b), "diagonal block");
    }
    offset += size;
  }
  std::shared_ptr<const std::vector<Block>> bl = blocks;
  auto inverse = [bl](const Vector& x) -> Vector {
    Vector y(x.size());
    for (const auto& b : *bl) {
      const Index sz = b.matrix.rows();
      y.segment(b.offset, sz) = b.chol.solve(Vector(x.segment(b.offset, sz)));
    }
    return y;
  };
  auto forward = [bl](const Vector& x) -> Vector {
    Vector y(x.size());
    for (const auto& b : *bl) {
      const Index sz = b.matrix.rows();
      y.segment(b.offset, sz) = b.matrix * x.segment(b.offset, sz);
    }
    return y;
  };
  return Preconditioner(s.dim(), PreconditionerKind::block_jacobi, inverse, forward);
}

/// Symmetric Gauss-Seidel, P = (D + L) D^{-1} (D + U).
inline Preconditioner build_sgs(const DenseSym& s) {
  const Index n = s.dim();
  for (Index i = 0; i < n; ++i)
    if (!(s(i, i) > 0.0)) throw NotPositiveDefinite(i, "diagonal of S");
  auto m = std::make_shared<const Matrix>(s.matrix());
  auto inverse = [m](const Vector& x) -> Vector {
    const Matrix& a = *m;
    const Index n = a.rows();
    Vector y = x;
    for (Index i = 0; i < n; ++i) {  // (D + L) y = x
      double acc = y(i);
      for (Index k = 0; k < i; ++k) acc -= a(i, k) * y(k);
      y(i) = acc / a(i, i);
    }
    for (Index i = 0; i < n; ++i) y(i) *= a(i, i);
    for (Index i = n - 1; i >= 0; --i) {  // (D + U) z = D y
      double acc = y(i);
      for (Index k = i + 1; k < n; ++k) acc -= a(k, i) * y(k);  // a(i,k) == a(k,i)
      y(i) = acc / a(i, i);
    }
    return y;
  };
  auto forward = [m](const Vector& x) -> Vector {
    const Matrix& a = *m;
    const Vector upper = a.triangularView<Eigen::Upper>() * x;  // (D + U) x
    const Vector scaled = upper.cwiseQuotient(a.diagonal());
    return a.triangularView<Eigen::Lower>() * scaled;
  };
  return Preconditioner(n, PreconditionerKind::sgs, inverse, forward);
}

/// Partial Cholesky with complete diagonal pivoting:
/// Pi^T S Pi ~ [F11 0; F21 I] blkdiag(I_r, D_schur) [F11^T F21^T; 0 I],
/// D_schur = diag(S22 - S21 S11^{-1} S21^T). Only the diagonal of S and the
/// r pivot columns are accessed.
inline Preconditioner build_partial_cholesky(const Vector& diagonal,
                                             const std::function<Vector(Index)>& column, Index r) {
  const Index n = diagonal.size();
  if (r < 0 || r > n) throw InvalidArgument("build_partial_cholesky: need 0 <= r <= n");

  struct State {
    std::vector<Index> perm;  // perm[k] = original index at position k
    Matrix f;                 // n x r, rows in permuted order
    Vector schur;             // n - r
  };
  auto st = std::make_shared<State>();
  st->perm.resize(static_cast<std::size_t>(n));
  std::iota(st->perm.begin(), st->perm.end(), Index{0});
  Vector d = diagonal;  // running Schur diagonal, indexed by original position
  Matrix f_orig = Matrix::Zero(n, r);  // rows by original index

  std::uint64_t columns = 0;
  for (Index k = 0; k < r; ++k) {
    Index best = k;
    for (Index t = k + 1; t < n; ++t)
      if (d(st->perm[t]) > d(st->perm[best])) best = t;
    std::swap(st->perm[k], st->perm[best]);
    const Index p = st->perm[k];
    if (!(d(p) > 0.0)) throw NotPositiveDefinite(k, "partial Cholesky pivot");
    const Vector col = column(p);
    ++columns;
    const double pivot = std::sqrt(d(p));
    Vector l = (col - f_orig.leftCols(k) * f_orig.row(p).head(k).transpose()) / pivot;
    for (Index t = 0; t < k; ++t) l(st->perm[t]) = 0.0;
    l(p) = pivot;
    f_orig.col(k) = l;
    for (Index t = k + 1; t < n; ++t) {
      const Index i = st->perm[t];
      d(i) -= l(i) * l(i);
    }
  }
  st->f.resize(n, r);
  st->schur.resize(n - r);
  for (Index k = 0; k < n; ++k) st->f.row(k) = f_orig.row(st->perm[k]);
  for (Index k = r; k < n; ++k) {
    const double v = d(st->perm[k]);
    if (!(v > 0.0)) throw NotPositiveDefinite(k, "partial Cholesky Schur diagonal");
    st->schur(k - r) = v;
  }

  BuildStats stats;
  stats.operator_products = columns;
  std::shared_ptr<const State> s = st;
  auto inverse = [s, r](const Vector& x) -> Vector {
    const Index n = x.size();
    Vector y(n);
    for (Index k = 0; k < n; ++k) y(k) = x(s->perm[k]);
    auto f11 = s->f.topRows(r);
    auto f21 = s->f.bottomRows(n - r);
    Vector y1 = f11.triangularView<Eigen::Lower>().solve(y.head(r));
    Vector y2 = (y.tail(n - r) - f21 * y1).cwiseQuotient(s->schur);
    Vector z1 = f11.transpose().triangularView<Eigen::Upper>().solve(y1 - f21.transpose() * y2);
    Vector out(n);
    for (Index k = 0; k < r; ++k) out(s->perm[k]) = z1(k);
    for (Index k = r; k < n; ++k) out(s->perm[k]) = y2(k - r);
    return out;
  };
  auto forward = [s, r](const Vector& x) -> Vector {
    const Index n = x.size();
    Vector y(n);
    for (Index k = 0; k < n; ++k) y(k) = x(s->perm[k]);
    auto f11 = s->f.topRows(r);
    auto f21 = s->f.bottomRows(n - r);
    const Vector u1 = f11.transpose() * y.head(r) + f21.transpose() * y.tail(n - r);
    const Vector u2 = s->schur.cwiseProduct(y.tail(n - r));
    Vector v(n);
    v.head(r) = f11 * u1;
    v.tail(n - r) = f21 * u1 + u2;
    Vector out(n);
    for (Index k = 0; k < n; ++k) out(s->perm[k]) = v(k);
    return out;
  };
  return Preconditioner(n, PreconditionerKind::partial_cholesky, inverse, forward, r, stats);
}

inline Preconditioner build_partial_cholesky(const DenseSym& s, Index r) {
  auto m = std::make_shared<const Matrix>(s.matrix());
  return build_partial_cholesky(Vector(m->diagonal()),
                                [m](Index j) -> Vector { return m->col(j); }, r);
}

}  // namespace bprec
