#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "types.hpp"

namespace bprec {

enum class OperatorFlavor { dense, diagonal, composed, callback };

/// Counts operator applications. Shared between copies of an operator so the
/// count follows the operator, not the handle.
class ProductCounter {
 public:
  void add(std::uint64_t k = 1) const { count_->fetch_add(k, std::memory_order_relaxed); }
  std::uint64_t value() const { return count_->load(std::memory_order_relaxed); }
  void reset() const { count_->store(0, std::memory_order_relaxed); }

 private:
  std::shared_ptr<std::atomic<std::uint64_t>> count_ =
      std::make_shared<std::atomic<std::uint64_t>>(0);
};

/// Symmetric n x n matrix with entries stored explicitly and symmetrized, so
/// entry (i, j) and (j, i) are bit-identical.
class DenseSym {
 public:
  DenseSym() = default;

  explicit DenseSym(const Matrix& m) : data_(m) {
    if (m.rows() != m.cols()) throw DimensionMismatch(m.rows(), m.cols(), "DenseSym");
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = j + 1; i < m.rows(); ++i) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        data_(i, j) = v;
        data_(j, i) = v;
      }
  }

  static DenseSym identity(Index n) { return DenseSym(Matrix::Identity(n, n)); }
  static DenseSym diagonal(const Vector& d) { return DenseSym(Matrix(d.asDiagonal())); }

  Index dim() const { return data_.rows(); }
  const Matrix& matrix() const { return data_; }
  double operator()(Index i, Index j) const { return data_(i, j); }

 private:
  Matrix data_;
};

/// Matrix-free n-dimensional operator. Copies share the product counter.
class LinearOperator {
 public:
  using ApplyFn = std::function<Vector(const Vector&)>;

  LinearOperator(Index dim, ApplyFn apply, OperatorFlavor flavor = OperatorFlavor::callback,
                 bool symmetric = true)
      : dim_(dim), apply_(std::move(apply)), flavor_(flavor), symmetric_(symmetric) {
    if (dim <= 0) throw InvalidArgument("LinearOperator: dimension must be positive");
  }

  Index dim() const { return dim_; }
  OperatorFlavor flavor() const { return flavor_; }
  bool symmetric() const { return symmetric_; }

  Vector apply(const Vector& x) const {
    check_dim(dim_, x.size(), "LinearOperator::apply");
    counter_.add();
    return apply_(x);
  }
  Vector operator()(const Vector& x) const { return apply(x); }

  /// Column-by-column application; counts one product per column.
  Matrix apply(const Matrix& x) const {
    check_dim(dim_, x.rows(), "LinearOperator::apply");
    Matrix out(dim_, x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = apply(Vector(x.col(j)));
    return out;
  }

  std::uint64_t products() const { return counter_.value(); }
  void reset_products() const { counter_.reset(); }

  /// Materialize by probing with unit vectors (n products).
  Matrix to_dense() const { return apply(Matrix(Matrix::Identity(dim_, dim_))); }

 private:
  Index dim_;
  ApplyFn apply_;
  OperatorFlavor flavor_;
  bool symmetric_;
  ProductCounter counter_;
};

inline Vector matvec(const LinearOperator& op, const Vector& x) { return op.apply(x); }

inline LinearOperator identity_operator(Index n) {
  return LinearOperator(n, [](const Vector& x) { return x; }, OperatorFlavor::diagonal);
}

inline LinearOperator diagonal_operator(Vector d) {
  const Index n = d.size();
  return LinearOperator(
      n, [d = std::move(d)](const Vector& x) -> Vector { return d.cwiseProduct(x); },
      OperatorFlavor::diagonal);
}

inline LinearOperator dense_operator(const DenseSym& a) {
  auto m = std::make_shared<const Matrix>(a.matrix());
  return LinearOperator(
      a.dim(), [m](const Vector& x) -> Vector { return (*m) * x; }, OperatorFlavor::dense);
}

inline LinearOperator dense_operator(Matrix a, bool symmetric) {
  if (a.rows() != a.cols()) throw DimensionMismatch(a.rows(), a.cols(), "dense_operator");
  auto m = std::make_shared<const Matrix>(std::move(a));
  return LinearOperator(
      m->rows(), [m](const Vector& x) -> Vector { return (*m) * x; }, OperatorFlavor::dense,
      symmetric);
}

/// (outer o inner)(x) = outer(inner(x)).
inline LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner) {
  check_dim(outer.dim(), inner.dim(), "compose");
  return LinearOperator(
      outer.dim(), [outer, inner](const Vector& x) { return outer.apply(inner.apply(x)); },
      OperatorFlavor::composed, false);
}

inline LinearOperator sum(const LinearOperator& a, const LinearOperator& b) {
  check_dim(a.dim(), b.dim(), "sum");
  return LinearOperator(
      a.dim(), [a, b](const Vector& x) -> Vector { return a.apply(x) + b.apply(x); },
      OperatorFlavor::composed, a.symmetric() && b.symmetric());
}

// ---------------------------------------------------------------------------
// Cholesky

/// Dense lower Cholesky factor, unblocked. Solves use forward/back substitution.
class Cholesky {
 public:
  Cholesky() = default;

  explicit Cholesky(const Matrix& a) : lower_(Matrix::Zero(a.rows(), a.cols())) {
    if (a.rows() != a.cols()) throw DimensionMismatch(a.rows(), a.cols(), "Cholesky");
    const Index n = a.rows();
    for (Index j = 0; j < n; ++j) {
      double d = a(j, j);
      for (Index k = 0; k < j; ++k) d -= lower_(j, k) * lower_(j, k);
      if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(j);
      const double ljj = std::sqrt(d);
      lower_(j, j) = ljj;
      for (Index i = j + 1; i < n; ++i) {
        double s = a(i, j);
        for (Index k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
        lower_(i, j) = s / ljj;
      }
    }
  }

  explicit Cholesky(const DenseSym& a) : Cholesky(a.matrix()) {}

  Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  /// L^{-1} b
  Vector solve_lower(const Vector& b) const {
    check_dim(dim(), b.size(), "Cholesky::solve_lower");
    const Index n = dim();
    Vector x = b;
    for (Index i = 0; i < n; ++i) {
      double s = x(i);
      for (Index k = 0; k < i; ++k) s -= lower_(i, k) * x(k);
      x(i) = s / lower_(i, i);
    }
    return x;
  }

  /// L^{-T} b
  Vector solve_upper(const Vector& b) const {
    check_dim(dim(), b.size(), "Cholesky::solve_upper");
    const Index n = dim();
    Vector x = b;
    for (Index i = n - 1; i >= 0; --i) {
      double s = x(i);
      for (Index k = i + 1; k < n; ++k) s -= lower_(k, i) * x(k);
      x(i) = s / lower_(i, i);
    }
    return x;
  }

  Matrix solve_lower(const Matrix& b) const {
    Matrix out(b.rows(), b.cols());
    for (Index j = 0; j < b.cols(); ++j) out.col(j) = solve_lower(Vector(b.col(j)));
    return out;
  }

  Vector solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

  double logdet() const { return 2.0 * lower_.diagonal().array().log().sum(); }

 private:
  Matrix lower_;
};

// ---------------------------------------------------------------------------
// Factored SPD matrices A = Q Q^T.

/// A = Q Q^T held through the four actions Q, Q^T, Q^{-1}, Q^{-T}.
/// Q need not be triangular (a symmetric square root works as well).
struct FactoredSpd {
  using Action = std::function<Vector(const Vector&)>;

  Index dim = 0;
  Action factor_apply;
  Action factor_adjoint_apply;
  Action factor_solve;
  Action factor_adjoint_solve;
  ProductCounter solves;  // counts Q^{-1} and Q^{-T} applications

  Vector apply_q(const Vector& x) const {
    check_dim(dim, x.size(), "FactoredSpd");
    return factor_apply(x);
  }
  Vector apply_qt(const Vector& x) const {
    check_dim(dim, x.size(), "FactoredSpd");
    return factor_adjoint_apply(x);
  }
  Vector solve_q(const Vector& x) const {
    check_dim(dim, x.size(), "FactoredSpd");
    solves.add();
    return factor_solve(x);
  }
  Vector solve_qt(const Vector& x) const {
    check_dim(dim, x.size(), "FactoredSpd");
    solves.add();
    return factor_adjoint_solve(x);
  }

  /// A x = Q (Q^T x)
  Vector apply_a(const Vector& x) const { return apply_q(apply_qt(x)); }
  /// A^{-1} x = Q^{-T} (Q^{-1} x)
  Vector solve_a(const Vector& x) const { return solve_qt(solve_q(x)); }

  LinearOperator as_operator() const {
    FactoredSpd self = *this;
    return LinearOperator(
        dim, [self](const Vector& x) { return self.apply_a(x); }, OperatorFlavor::composed);
  }
};

inline FactoredSpd cholesky_factor(const DenseSym& a) {
  auto chol = std::make_shared<const Cholesky>(a);
  FactoredSpd f;
  f.dim = a.dim();
  f.factor_apply = [chol](const Vector& x) -> Vector {
    return chol->lower().triangularView<Eigen::Lower>() * x;
  };
  f.factor_adjoint_apply = [chol](const Vector& x) -> Vector {
    return chol->lower().transpose().triangularView<Eigen::Upper>() * x;
  };
  f.factor_solve = [chol](const Vector& x) { return chol->solve_lower(x); };
  f.factor_adjoint_solve = [chol](const Vector& x) { return chol->solve_upper(x); };
  return f;
}

/// A = diag(a), Q = diag(sqrt(a)).
inline FactoredSpd diagonal_factor(const Vector& a) {
  for (Index i = 0; i < a.size(); ++i)
    if (!(a(i) > 0.0)) throw NotPositiveDefinite(i, "diagonal");
  const Vector root = a.cwiseSqrt();
  FactoredSpd f;
  f.dim = a.size();
  f.factor_apply = [root](const Vector& x) -> Vector { return root.cwiseProduct(x); };
  f.factor_adjoint_apply = f.factor_apply;
  f.factor_solve = [root](const Vector& x) -> Vector { return x.cwiseQuotient(root); };
  f.factor_adjoint_solve = f.factor_solve;
  return f;
}

/// Q = V diag(sqrt(lambda)) V^T for orthogonal V, lambda > 0.
inline FactoredSpd symmetric_root_factor(Matrix basis, const Vector& eigenvalues) {
  check_dim(basis.cols(), eigenvalues.size(), "symmetric_root_factor");
  for (Index i = 0; i < eigenvalues.size(); ++i)
    if (!(eigenvalues(i) > 0.0)) throw NotPositiveDefinite(i, "spectrum");
  auto v = std::make_shared<const Matrix>(std::move(basis));
  const Vector root = eigenvalues.cwiseSqrt();
  FactoredSpd f;
  f.dim = v->rows();
  f.factor_apply = [v, root](const Vector& x) -> Vector {
    return (*v) * root.cwiseProduct(v->transpose() * x);
  };
  f.factor_adjoint_apply = f.factor_apply;
  f.factor_solve = [v, root](const Vector& x) -> Vector {
    return (*v) * (v->transpose() * x).cwiseQuotient(root);
  };
  f.factor_adjoint_solve = f.factor_solve;
  return f;
}

// ---------------------------------------------------------------------------
// Dense symmetric eigensolver (cyclic Jacobi).

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

/// Cyclic Jacobi rotations. Converges when the off-diagonal Frobenius mass drops
/// below machine precision relative to ||A||_F. Eigenvalues are returned in
/// descending order; ties keep the diagonal position they converged to.
inline SymEig dense_eig_sym(const Matrix& input, int max_sweeps = 60) {
  if (input.rows() != input.cols()) throw DimensionMismatch(input.rows(), input.cols(), "dense_eig_sym");
  const Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double total = a.norm();
  const double eps = std::numeric_limits<double>::epsilon();

  auto off_norm2 = [&] {
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = j + 1; i < n; ++i) s += a(i, j) * a(i, j);
    return 2.0 * s;
  };

  bool converged = total == 0.0 || n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (off_norm2() <= (eps * total) * (eps * total)) {
      converged = true;
      break;
    }
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (std::abs(apq) <= eps * eps * total) continue;
        if (sweep > 3 && std::abs(apq) <= 0.5 * eps * std::sqrt(std::abs(app * aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        // Golub & Van Loan, sym.schur2
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        auto colp = a.col(p);
        auto colq = a.col(q);
        for (Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = colp(k);
          const double akq = colq(k);
          colp(k) = c * akp - s * akq;
          colq(k) = s * akp + c * akq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          a(p, k) = colp(k);
          a(q, k) = colq(k);
        }

        auto vp = v.col(p);
        auto vq = v.col(q);
        for (Index k = 0; k < n; ++k) {
          const double vkp = vp(k);
          const double vkq = vq(k);
          vp(k) = c * vkp - s * vkq;
          vq(k) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged && off_norm2() > (1e3 * eps * total) * (1e3 * eps * total))
    throw NoConvergence("dense_eig_sym: Jacobi sweeps did not converge");

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });
  SymEig out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

inline SymEig dense_eig_sym(const DenseSym& a, int max_sweeps = 60) {
  return dense_eig_sym(a.matrix(), max_sweeps);
}

// ---------------------------------------------------------------------------
// Small dense helpers shared by the sketching and preconditioner modules.

/// Thin Householder QR: returns the n x k orthonormal factor and the k x k R.
struct ThinQr {
  Matrix q;
  Matrix r;
};

inline ThinQr thin_qr(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  const Index k = std::min(y.rows(), y.cols());
  ThinQr out;
  out.q = qr.householderQ() * Matrix::Identity(y.rows(), k);
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return out;
}

}  // namespace bprec
