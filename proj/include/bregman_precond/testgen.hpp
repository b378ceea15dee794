#pragma once

// Synthetic S = A + B instances with prescribed spectra, and the weak-constraint
// 4D-VAR heat-equation system S = L^T D^{-1} L + H^T R^{-1} H.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "linop.hpp"
#include "precond.hpp"
#include "rng.hpp"
#include "sketch.hpp"
#include "types.hpp"

namespace bprec {

struct SpectrumParams {
  double alpha = 0.0;
  double c = 0.0;
  double beta = 0.0;
  double kappa = 0.0;  // only used for A

  void validate() const {
    if (!(alpha >= 0.0) || !(c >= 0.0) || !(beta >= 0.0) || !(kappa >= 0.0))
      throw InvalidArgument("SpectrumParams: parameters must be nonnegative");
  }
};

/// Decay profiles for A (labels 1..4) and B (labels 1..2).
inline SpectrumParams spectrum_label_a(int label) {
  switch (label) {
    case 1: return {0.0, 0.0, 0.0, 0.70};
    case 2: return {3.5, 0.0, 1.0, 0.05};
    case 3: return {4.0, 0.30, 4.5, 0.05};
    case 4: return {2.0, 0.25, 4.5, 0.05};
    default: throw InvalidArgument("unknown A spectrum label " + std::to_string(label));
  }
}

inline SpectrumParams spectrum_label_b(int label) {
  switch (label) {
    case 1: return {3.0, 0.0, 1.0, 0.0};
    case 2: return {2.5, 0.55, 4.7, 0.0};
    default: throw InvalidArgument("unknown B spectrum label " + std::to_string(label));
  }
}

/// exp(-|alpha i / count - c|^beta) (+ kappa for A), i = 1..count, in index order.
/// 0^0 is taken as 1.
inline Vector spectrum_unsorted(const SpectrumParams& params, Index count, bool is_a) {
  params.validate();
  if (count < 1) throw InvalidArgument("spectrum: count must be >= 1");
  Vector out(count);
  for (Index i = 1; i <= count; ++i) {
    const double base =
        std::abs(params.alpha * static_cast<double>(i) / static_cast<double>(count) - params.c);
    const double power = params.beta == 0.0 ? 1.0 : std::pow(base, params.beta);
    out(i - 1) = std::exp(-power) + (is_a ? params.kappa : 0.0);
  }
  return out;
}

inline bool is_descending(const Vector& v) {
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(i - 1)) return false;
  return true;
}

/// Same values as spectrum_unsorted, sorted descending.
inline Vector spectrum(const SpectrumParams& params, Index count, bool is_a) {
  Vector out = spectrum_unsorted(params, count, is_a);
  std::sort(out.data(), out.data() + out.size(), std::greater<double>());
  return out;
}

struct SyntheticProblem {
  DenseSym a;
  DenseSym b;
  DenseSym s;
  FactoredSpd q;        // symmetric square root of A
  Vector spectrum_a;    // n, descending
  Vector spectrum_b;    // m, descending
  Matrix basis_a;       // n x n orthogonal
  Matrix basis_b;       // n x m orthonormal columns

  Index dim() const { return a.dim(); }

  /// G = Q^{-1} B Q^{-T}, formed densely.
  DenseSym g_dense() const {
    const Vector inv_root = spectrum_a.cwiseSqrt().cwiseInverse();
    const Matrix qinv = basis_a * inv_root.asDiagonal() * basis_a.transpose();
    return DenseSym(qinv * b.matrix() * qinv);
  }
};

/// A = O_A diag(spec_A) O_A^T, B = O_B diag(spec_B) O_B^T with O_A, O_B from
/// QR of seeded Gaussian matrices (independent streams).
inline SyntheticProblem assemble_synthetic(const SpectrumParams& pa, const SpectrumParams& pb,
                                           Index n, Index m, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("assemble_synthetic: n must be >= 1");
  if (m < 1 || m > n) throw InvalidArgument("assemble_synthetic: need 1 <= m <= n");
  SyntheticProblem out;
  out.spectrum_a = spectrum(pa, n, true);
  out.spectrum_b = spectrum(pb, m, false);
  out.basis_a = thin_qr(GaussianStream(seed, 1).matrix(n, n)).q;
  out.basis_b = thin_qr(GaussianStream(seed, 2).matrix(n, m)).q;
  out.a = DenseSym(Matrix(out.basis_a * out.spectrum_a.asDiagonal() * out.basis_a.transpose()));
  out.b = DenseSym(Matrix(out.basis_b * out.spectrum_b.asDiagonal() * out.basis_b.transpose()));
  out.s = DenseSym(Matrix(out.a.matrix() + out.b.matrix()));
  out.q = symmetric_root_factor(out.basis_a, out.spectrum_a);
  return out;
}

inline SyntheticProblem assemble_synthetic(int label_a, int label_b, Index n, Index m,
                                           std::uint64_t seed) {
  return assemble_synthetic(spectrum_label_a(label_a), spectrum_label_b(label_b), n, m, seed);
}

// ---------------------------------------------------------------------------
// 4D-VAR

struct FourDVarConfig {
  Index n = 1000;   // state dimension
  Index steps = 99; // N; the window holds N + 1 states
  Index m = 500;    // observations per state
  double dt = 1e-4;
  double dx = 2e-2;
  double tau_d = 1.0;
  double tau_r = 1.0;
  std::uint64_t seed = 0;

  double heat_ratio() const { return dt / (dx * dx); }
  Index blocks() const { return steps + 1; }
  Index state_size() const { return n * blocks(); }
  Index obs_size() const { return m * blocks(); }

  void validate() const {
    if (n < 3) throw InvalidArgument("FourDVarConfig: n must be >= 3");
    if (steps < 0) throw InvalidArgument("FourDVarConfig: N must be >= 0");
    if (m < 0 || m > n) throw InvalidArgument("FourDVarConfig: need 0 <= m <= n");
    if (!(dt > 0.0) || !(dx > 0.0)) throw InvalidArgument("FourDVarConfig: dt, dx must be positive");
    if (heat_ratio() > 0.5)
      throw InvalidArgument("FourDVarConfig: dt/dx^2 = " + std::to_string(heat_ratio()) +
                            " violates explicit Euler stability (<= 0.5)");
  }
};

/// `count` points 10^{-tau} .. 10^{tau} with equal ratios, ascending.
inline Vector logspace_diagonal(double tau, Index count) {
  Vector out(count);
  for (Index k = 0; k < count; ++k) {
    const double frac = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
    out(k) = std::pow(10.0, -tau + 2.0 * tau * frac);
  }
  return out;
}

/// Matrix-free weak-constraint 4D-VAR Hessian. State vectors stack the N + 1
/// time levels, each of length n.
class FourDVarSystem {
 public:
  explicit FourDVarSystem(const FourDVarConfig& cfg)
      : cfg_(cfg),
        r_(cfg.heat_ratio()),
        d_inv_(logspace_diagonal(cfg.tau_d, cfg.state_size())),
        r_inv_(logspace_diagonal(cfg.tau_r, cfg.obs_size())) {
    d_sqrt_ = d_inv_.cwiseSqrt().cwiseInverse();
  }

  const FourDVarConfig& config() const { return cfg_; }
  double heat_ratio() const { return r_; }
  Index dim() const { return cfg_.state_size(); }
  Index obs_dim() const { return cfg_.obs_size(); }
  const Vector& d_inverse() const { return d_inv_; }
  const Vector& r_inverse() const { return r_inv_; }

  /// One explicit Euler step; boundary rows are zero.
  Vector apply_m(const Eigen::Ref<const Vector>& x) const {
    const Index n = cfg_.n;
    Vector y = Vector::Zero(n);
    for (Index i = 1; i + 1 < n; ++i) y(i) = r_ * x(i - 1) + (1.0 - 2.0 * r_) * x(i) + r_ * x(i + 1);
    return y;
  }

  Vector apply_mt(const Eigen::Ref<const Vector>& y) const {
    const Index n = cfg_.n;
    Vector x = Vector::Zero(n);
    for (Index i = 1; i + 1 < n; ++i) {
      x(i - 1) += r_ * y(i);
      x(i) += (1.0 - 2.0 * r_) * y(i);
      x(i + 1) += r_ * y(i);
    }
    return x;
  }

  Vector apply_l(const Vector& x) const {
    check_dim(dim(), x.size(), "FourDVarSystem::apply_l");
    const Index n = cfg_.n;
    Vector y = x;
    for (Index b = 1; b < cfg_.blocks(); ++b) y.segment(b * n, n) -= apply_m(x.segment((b - 1) * n, n));
    return y;
  }

  Vector apply_lt(const Vector& y) const {
    check_dim(dim(), y.size(), "FourDVarSystem::apply_lt");
    const Index n = cfg_.n;
    Vector x = y;
    for (Index b = 0; b + 1 < cfg_.blocks(); ++b) x.segment(b * n, n) -= apply_mt(y.segment((b + 1) * n, n));
    return x;
  }

  /// L^{-1} y by block forward substitution.
  Vector solve_l(const Vector& y) const {
    check_dim(dim(), y.size(), "FourDVarSystem::solve_l");
    const Index n = cfg_.n;
    Vector x = y;
    for (Index b = 1; b < cfg_.blocks(); ++b) x.segment(b * n, n) += apply_m(x.segment((b - 1) * n, n));
    return x;
  }

  /// L^{-T} y by block back substitution.
  Vector solve_lt(const Vector& y) const {
    check_dim(dim(), y.size(), "FourDVarSystem::solve_lt");
    const Index n = cfg_.n;
    Vector x = y;
    for (Index b = cfg_.blocks() - 2; b >= 0; --b)
      x.segment(b * n, n) += apply_mt(x.segment((b + 1) * n, n));
    return x;
  }

  /// Block i selects x_{i, m-1-k} into observation slot k.
  Vector apply_h(const Vector& x) const {
    check_dim(dim(), x.size(), "FourDVarSystem::apply_h");
    const Index n = cfg_.n, m = cfg_.m;
    Vector z(obs_dim());
    for (Index b = 0; b < cfg_.blocks(); ++b)
      for (Index k = 0; k < m; ++k) z(b * m + k) = x(b * n + (m - 1 - k));
    return z;
  }

  Vector apply_ht(const Vector& z) const {
    check_dim(obs_dim(), z.size(), "FourDVarSystem::apply_ht");
    const Index n = cfg_.n, m = cfg_.m;
    Vector x = Vector::Zero(dim());
    for (Index b = 0; b < cfg_.blocks(); ++b)
      for (Index k = 0; k < m; ++k) x(b * n + (m - 1 - k)) = z(b * m + k);
    return x;
  }

  Vector apply_background(const Vector& x) const { return apply_lt(d_inv_.cwiseProduct(apply_l(x))); }
  Vector apply_b(const Vector& x) const { return apply_ht(r_inv_.cwiseProduct(apply_h(x))); }
  Vector apply_s(const Vector& x) const { return apply_background(x) + apply_b(x); }

  LinearOperator s_operator() const {
    auto self = std::make_shared<const FourDVarSystem>(*this);
    return LinearOperator(dim(), [self](const Vector& x) { return self->apply_s(x); },
                          OperatorFlavor::composed);
  }

  LinearOperator b_operator() const {
    auto self = std::make_shared<const FourDVarSystem>(*this);
    return LinearOperator(dim(), [self](const Vector& x) { return self->apply_b(x); },
                          OperatorFlavor::composed);
  }

  /// Q = L^T D^{-1/2}, so Q Q^T = L^T D^{-1} L.
  FactoredSpd q_factor() const {
    auto self = std::make_shared<const FourDVarSystem>(*this);
    FactoredSpd f;
    f.dim = dim();
    f.factor_apply = [self](const Vector& x) -> Vector {
      return self->apply_lt(self->d_inv_.cwiseSqrt().cwiseProduct(x));
    };
    f.factor_adjoint_apply = [self](const Vector& x) -> Vector {
      return self->d_inv_.cwiseSqrt().cwiseProduct(self->apply_l(x));
    };
    f.factor_solve = [self](const Vector& x) -> Vector {
      return self->d_sqrt_.cwiseProduct(self->solve_lt(x));
    };
    f.factor_adjoint_solve = [self](const Vector& x) -> Vector {
      return self->solve_l(self->d_sqrt_.cwiseProduct(x));
    };
    return f;
  }

  /// G = Q^{-1} H^T R^{-1} H Q^{-T}, counting Q-solves on `q`.
  static LinearOperator g_operator(const FourDVarSystem& sys, const FactoredSpd& q) {
    auto self = std::make_shared<const FourDVarSystem>(sys);
    return LinearOperator(
        sys.dim(), [self, q](const Vector& x) { return q.solve_q(self->apply_b(q.solve_qt(x))); },
        OperatorFlavor::composed);
  }

  /// diag(S) without forming S.
  Vector s_diagonal() const {
    const Index n = cfg_.n, m = cfg_.m;
    Vector diag = d_inv_;
    // Column j of block b meets -M(:, j) in block b + 1.
    for (Index b = 0; b + 1 < cfg_.blocks(); ++b)
      for (Index j = 0; j < n; ++j) {
        double acc = 0.0;
        for (Index i = std::max<Index>(1, j - 1); i <= std::min<Index>(n - 2, j + 1); ++i) {
          const double mij = i == j ? 1.0 - 2.0 * r_ : r_;
          acc += d_inv_((b + 1) * n + i) * mij * mij;
        }
        diag(b * n + j) += acc;
      }
    for (Index b = 0; b < cfg_.blocks(); ++b)
      for (Index k = 0; k < m; ++k) diag(b * n + (m - 1 - k)) += r_inv_(b * m + k);
    return diag;
  }

  /// Exact ||S||_1. Column (b, i) of S lives in time levels b-1..b+1, so
  /// columns 3n apart never share a row and can be probed together.
  double s_one_norm() const {
    const Index n = cfg_.n, blocks = cfg_.blocks(), period = 3 * n;
    double best = 0.0;
    for (Index start = 0; start < std::min(period, dim()); ++start) {
      Vector probe = Vector::Zero(dim());
      for (Index j = start; j < dim(); j += period) probe(j) = 1.0;
      const Vector y = apply_s(probe).cwiseAbs();
      for (Index j = start; j < dim(); j += period) {
        const Index b = j / n;
        const Index lo = std::max<Index>(b - 1, 0) * n;
        const Index hi = std::min<Index>(b + 2, blocks) * n;
        best = std::max(best, y.segment(lo, hi - lo).sum());
      }
    }
    return best;
  }

  Matrix heat_matrix() const {
    const Index n = cfg_.n;
    Matrix out(n, n);
    for (Index j = 0; j < n; ++j) out.col(j) = apply_m(Vector::Unit(n, j));
    return out;
  }

  /// H_i (identical for every time level).
  Matrix observation_block() const {
    Matrix out = Matrix::Zero(cfg_.m, cfg_.n);
    for (Index k = 0; k < cfg_.m; ++k) out(k, cfg_.m - 1 - k) = 1.0;
    return out;
  }

  /// Seeded standard Gaussian right-hand side with unit norm.
  Vector rhs(std::uint64_t seed) const {
    Vector b = GaussianStream(seed, 3).vector(dim());
    return b / b.norm();
  }

 private:
  FourDVarConfig cfg_;
  double r_;
  Vector d_inv_;
  Vector r_inv_;
  Vector d_sqrt_;  // D^{1/2}
};

inline FourDVarSystem assemble_heat_4dvar(const FourDVarConfig& cfg) {
  cfg.validate();
  return FourDVarSystem(cfg);
}

struct FourDVarPreconditioners {
  Preconditioner ldl_baseline;
  Preconditioner scaled_nystrom;
  Preconditioner nonscaled_nystrom;
};

/// L^T D^{-1} L, Q(I + Nys(G))Q^T and L^T D^{-1} L + Nys(H^T R^{-1} H), with
/// the same r-column Gaussian test matrix for both sketches. r = 0 gives the
/// baseline for all three.
inline FourDVarPreconditioners build_4dvar_preconditioners(const FourDVarSystem& sys, Index r,
                                                           std::uint64_t seed) {
  if (r < 0 || r > sys.obs_dim())
    throw InvalidArgument("build_4dvar_preconditioners: need 0 <= r <= m(N+1)");
  const FactoredSpd q = sys.q_factor();
  Preconditioner baseline = build_scaled(q, LowRankEig::zero(sys.dim()));
  if (r == 0) return {baseline, baseline, baseline};

  const Matrix omega = gaussian_test_matrix(sys.dim(), r, seed);
  const LinearOperator g = FourDVarSystem::g_operator(sys, q);
  const LowRankEig g_nys = nystrom(g, omega, r);
  BuildStats scaled_stats{g.products(), q.solves.value()};

  const LinearOperator b = sys.b_operator();
  const LowRankEig b_nys = nystrom(b, omega, r);
  const std::uint64_t solves_before = q.solves.value();
  Preconditioner nonscaled = build_nonscaled(q, b_nys);
  BuildStats nonscaled_stats{b.products(), q.solves.value() - solves_before};
  return {baseline, build_scaled(q, g_nys).with_build_stats(scaled_stats),
          nonscaled.with_build_stats(nonscaled_stats)};
}

}  // namespace bprec
