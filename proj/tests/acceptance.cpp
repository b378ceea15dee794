// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit if any
// required criterion fails. `--full-scale` adds the optional full 4D-VAR
// condition-number check (long running).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#include "bregman_precond/experiments.hpp"
#include "support.hpp"

using namespace bprec;
using namespace testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail = why;
    pass = pass && ok;
  }
};

int failures = 0;

void report(const char* id, const Outcome& o) {
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Random dense instance with rank(B) = m < n and r < m.
struct Instance {
  Index n, m, r;
  Matrix a, b, s, g;
  Vector mu;  // descending eigenvalues of G, clamped at zero
  FactoredSpd q;
};

Instance make_instance(std::uint64_t seed) {
  std::mt19937_64 gen(seed * 7919 + 1);
  Instance in;
  in.n = std::uniform_int_distribution<Index>(8, 64)(gen);
  in.m = std::uniform_int_distribution<Index>(2, in.n - 1)(gen);
  in.r = std::uniform_int_distribution<Index>(1, in.m - 1)(gen);
  in.a = random_spd(in.n, seed) / static_cast<double>(in.n);
  in.b = random_psd(in.n, in.m, seed + 100000);
  in.s = in.a + in.b;
  const Matrix l = in.a.llt().matrixL();
  const Matrix li = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(in.n, in.n));
  in.g = li * in.b * li.transpose();
  in.g = 0.5 * (in.g + in.g.transpose());
  in.mu = oracle_eigs(in.g).cwiseMax(0.0);
  in.q = cholesky_factor(DenseSym(in.a));
  return in;
}

Preconditioner scaled_of(const Instance& in) { return build_scaled(in.q, truncated_evd(in.g, in.r)); }
Preconditioner nonscaled_of(const Instance& in) { return build_nonscaled(in.q, truncated_evd(in.b, in.r)); }

double kappa_of(const Vector& desc) { return desc(0) / desc(desc.size() - 1); }

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = Clock::now();
  Outcome o;
  const Vector a = example_a();
  const FactoredSpd q = diagonal_factor(a);
  auto whitened = [&](const Matrix& m) {
    return densify(6, [&](const Vector& x) -> Vector { return q.solve_q(m * q.solve_qt(x)); });
  };
  const Matrix b = example_b().asDiagonal();
  Vector g_want(6), gbr_want(6);
  g_want << 0.9091, 0.4762, 0.6667, 2, 0, 0;
  gbr_want << 0.9091, 0.4762, 0, 0, 0, 0;
  const Matrix g = whitened(b);
  const Matrix gbr = whitened(truncated_evd(b, 2).dense());
  const double g_err = (g - Matrix(g_want.asDiagonal())).cwiseAbs().maxCoeff();
  const double gbr_err = (gbr - Matrix(gbr_want.asDiagonal())).cwiseAbs().maxCoeff();
  o.require(g_err < 5e-5, fmt("G off by %.3g", g_err));
  o.require(gbr_err < 5e-5, fmt("Q^-1 B_r Q^-T off by %.3g", gbr_err));

  const Matrix sh = build_scaled(q, truncated_evd(g, 2)).dense();
  const Matrix sn = build_nonscaled(q, truncated_evd(b, 2)).dense();
  o.require((sh - sn).norm() > 1e-3, "scaled and nonscaled coincide on the printed data");

  Vector brev(6);
  brev << 0.1, 0.25, 0.5, 1, 0, 0;
  const Matrix bm = brev.asDiagonal();
  const Matrix rev_sh = build_scaled(q, truncated_evd(whitened(bm), 2)).dense();
  const Matrix rev_sn = build_nonscaled(q, truncated_evd(bm, 2)).dense();
  const double rev_err = (rev_sh - rev_sn).cwiseAbs().maxCoeff();
  o.require(rev_err < 1e-12, fmt("reversed-B scaled vs nonscaled differ by %.3g", rev_err));
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, fmt("runtime %.3f s", secs));
  if (o.pass) o.detail = fmt("G err %.2g, B_r err %.2g, reversed |S^-S~| %.2g", g_err, gbr_err, rev_err);
  report("criterion-1 diagonal worked example", o);
}

void criteria_2_3(const std::vector<Instance>& instances) {
  Outcome spectrum_ok, steps;
  double worst = 0.0;
  int worst_excess = -1000;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Instance& in = instances[k];
    const Preconditioner p = scaled_of(in);
    const Vector ge = oracle_gen_eigs(p.dense(), in.s);
    Vector want = Vector::Ones(in.n);
    for (Index i = 0; i < in.m - in.r; ++i) want(i) = 1.0 + in.mu(in.r + i);
    std::sort(want.data(), want.data() + want.size(), std::greater<>());
    const double err = (ge - want).cwiseAbs().maxCoeff() / want(0);
    worst = std::max(worst, err);
    spectrum_ok.require(err <= 1e-8, fmt("instance %.0f: spectrum error %.3g", double(k), err));

    const SolveReport rep =
        pcg_solve(dense_operator(DenseSym(in.s)), random_vector(in.n, 500 + k), p, 1e-10, 10 * in.n);
    const int limit = static_cast<int>(in.m - in.r + 1);
    worst_excess = std::max(worst_excess, rep.iterations - limit);
    steps.require(rep.termination == Termination::converged && rep.iterations <= limit,
                  fmt("instance %.0f: %.0f iterations, limit %.0f", double(k), rep.iterations, limit));
  }
  if (spectrum_ok.pass) spectrum_ok.detail = fmt("50 instances, max relative error %.3g", worst);
  if (steps.pass) steps.detail = fmt("50 instances, max iterations minus limit %.0f", worst_excess);
  report("criterion-2 scaled spectrum", spectrum_ok);
  report("criterion-3 PCG step bound", steps);
}

void criterion_4(const std::vector<Instance>& instances) {
  Outcome o;
  double worst_opt = 0.0, closest = 1e300;
  for (std::size_t k = 0; k < 20; ++k) {
    const Instance& in = instances[k];
    const double kappa = kappa_of(oracle_gen_eigs(scaled_of(in).dense(), in.s));
    const double want = 1.0 + in.mu(in.r);
    const double err = std::abs(kappa - want) / want;
    worst_opt = std::max(worst_opt, err);
    o.require(err <= 1e-8, fmt("instance %.0f: kappa %.10g vs %.10g", double(k), kappa, want));

    const Matrix eye = Matrix::Identity(in.n, in.n);
    const Matrix y = eye + in.g;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(in.g);
    const Matrix ur = es.eigenvectors().rightCols(in.r);
    std::mt19937_64 gen(k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 0; c < 50; ++c) {
      Matrix x;
      const std::uint64_t seed = 10000 * k + c;
      if (c % 2 == 0) {
        const Index rank = 1 + static_cast<Index>(unit(gen) * static_cast<double>(in.r - 1) + 0.5);
        x = random_psd(in.n, rank, seed, in.mu(0) * unit(gen));
      } else {
        // Nearby competitors: rotated leading eigenvectors, jittered values.
        Matrix u = ur + 0.05 * unit(gen) * random_matrix(in.n, in.r, seed);
        u = thin_qr(u).q;
        Vector d(in.r);
        for (Index i = 0; i < in.r; ++i) d(i) = in.mu(in.r - 1 - i) * (0.5 + unit(gen));
        x = u * d.asDiagonal() * u.transpose();
      }
      const double kc = kappa_of(oracle_gen_eigs(eye + x, y));
      closest = std::min(closest, kc / kappa);
      o.require(kc >= kappa * (1.0 - 1e-8),
                fmt("instance %.0f: competitor kappa %.10g below %.10g", double(k), kc, kappa));
    }
  }
  if (o.pass) o.detail = fmt("20 instances, kappa error %.3g, best competitor ratio %.6f", worst_opt, closest);
  report("criterion-4 condition-number optimality", o);
}

void criterion_5(const std::vector<Instance>& instances) {
  Outcome o;
  double worst_cong = 0.0, worst_closed = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Instance& in = instances[static_cast<std::size_t>(k) % instances.size()];
    const Matrix p = scaled_of(in).dense();
    Vector sv(in.n);
    std::mt19937_64 gen(static_cast<std::uint64_t>(k) + 77);
    std::uniform_real_distribution<double> logd(-1.0, 1.0);
    for (Index i = 0; i < in.n; ++i) sv(i) = std::pow(10.0, logd(gen));
    const Matrix m = random_orthogonal(in.n, in.n, 3000 + k) * sv.asDiagonal() *
                     random_orthogonal(in.n, in.n, 4000 + k).transpose();
    const double d0 = divergence_ld(DenseSym(p), DenseSym(in.s)).value;
    const double d1 =
        divergence_ld(DenseSym(Matrix(m * p * m.transpose())), DenseSym(Matrix(m * in.s * m.transpose()))).value;
    const double err = std::abs(d1 - d0) / std::max(std::abs(d0), 1e-300);
    worst_cong = std::max(worst_cong, err);
    o.require(err <= 1e-8, fmt("congruence %.0f: relative change %.3g", k, err));
  }
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Instance& in = instances[k];
    const double ds = divergence_ld(DenseSym(scaled_of(in).dense()), DenseSym(in.s)).value;
    const double dn = divergence_ld(DenseSym(nonscaled_of(in).dense()), DenseSym(in.s)).value;
    o.require(dn >= ds, fmt("instance %.0f: nonscaled %.10g < scaled %.10g", double(k), dn, ds));
    const double closed = divergence_scaled_closed_form(in.mu, in.r);
    const double err = std::abs(ds - closed) / std::max(1.0, std::abs(closed));
    worst_closed = std::max(worst_closed, err);
    o.require(err <= 1e-9, fmt("instance %.0f: closed form off by %.3g", double(k), err));
  }
  if (o.pass)
    o.detail = fmt("congruence max rel %.3g, closed form max err %.3g, ordering on 50 instances", worst_cong,
                   worst_closed);
  report("criterion-5 divergence invariance and ordering", o);
}

void criterion_6() {
  Outcome o;
  double w_sp = 0.0, w_qr = 0.0, w_psd = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    std::mt19937_64 gen(k + 991);
    const Index n = std::uniform_int_distribution<Index>(30, 60)(gen);
    const Index l = std::uniform_int_distribution<Index>(5, 20)(gen);
    const double decay = std::uniform_real_distribution<double>(0.7, 0.95)(gen);
    Vector lam(n);
    for (Index i = 0; i < n; ++i) lam(i) = std::pow(decay, static_cast<double>(i));
    const Matrix u = random_orthogonal(n, n, 6000 + k);
    const Matrix gd = u * lam.asDiagonal() * u.transpose();
    const LinearOperator g = dense_operator(DenseSym(gd));
    const Matrix omega = gaussian_test_matrix(n, l, k);

    const Matrix nys = nystrom(g, omega, l).dense();
    const double sp = rel_diff(single_pass_evd(g, omega).dense(), nys);
    const double qr = rel_diff(nystrom(g, thin_qr(omega).q, l).dense(), nys);
    const double psd = oracle_eigs(gd - nys).minCoeff() / lam(0);
    w_sp = std::max(w_sp, sp);
    w_qr = std::max(w_qr, qr);
    w_psd = std::min(w_psd, psd);
    o.require(sp <= 1e-8, fmt("instance %.0f: single pass vs Nystrom %.3g", double(k), sp));
    o.require(qr <= 1e-10, fmt("instance %.0f: QR invariance %.3g", double(k), qr));
    o.require(psd >= -1e-8, fmt("instance %.0f: residual min eigenvalue %.3g lambda_1", double(k), psd));
  }
  if (o.pass)
    o.detail = fmt("single pass %.3g, QR %.3g, residual min eig %.3g lambda_1", w_sp, w_qr, w_psd);
  report("criterion-6 Nystrom equivalences", o);
}

void criterion_7() {
  const auto t0 = Clock::now();
  Outcome o;
  const Index n = 100, m = 60, r = 20, p = 5;
  // A = I, so G = B.
  const SyntheticProblem sp = assemble_synthetic(spectrum_label_b(1), spectrum_label_b(1), n, m, 2024);
  const Matrix gd = sp.b.matrix();
  const Matrix s = Matrix::Identity(n, n) + gd;
  Vector mu = Vector::Zero(n);
  mu.head(m) = sp.spectrum_b;
  const FactoredSpd q = diagonal_factor(Vector::Ones(n));
  const LinearOperator g = dense_operator(DenseSym(gd));
  const double optimum = divergence_ld(DenseSym(build_scaled(q, truncated_evd(gd, r)).dense()), DenseSym(s)).value;
  double mean = 0.0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    const LowRankEig approx = randomized_evd(g, SketchConfig{r, p, 0, split_seed(7, k)});
    const Matrix pd = Matrix::Identity(n, n) + approx.dense();
    mean += (divergence_ld(DenseSym(pd), DenseSym(s)).value - optimum) / 200.0;
  }
  const SuboptimalityBound bound = suboptimality_bound(mu, r, p);
  const double secs = seconds_since(t0);
  o.require(mean <= bound.absolute, fmt("mean excess %.6g above bound %.6g", mean, bound.absolute));
  o.require(secs < 120.0, fmt("runtime %.1f s", secs));
  if (o.pass) o.detail = fmt("mean excess %.6g <= bound %.6g, %.1f s", mean, bound.absolute, secs);
  report("criterion-7 expected suboptimality bound", o);
}

void criterion_8() {
  Outcome o;
  experiments::ExperimentConfig cfg;
  cfg.kind = experiments::Kind::synthetic;
  cfg.n = 200;
  cfg.m = 120;
  cfg.rank = 60;
  cfg.labels_a = {2, 3, 4};
  cfg.labels_b = {1, 2};
  cfg.trials = 25;
  cfg.divergence = false;
  cfg.kappa = false;
  cfg.preconditioners = {"identity", "jacobi", "nonscaled", "scaled", "scaled_rand", "scaled_rand_power"};
  const auto out = experiments::run_synthetic(cfg);
  const auto& h = out.results.header;
  auto col = [&](const char* name) { return std::find(h.begin(), h.end(), name) - h.begin(); };
  std::map<std::string, std::map<std::string, double>> med;
  for (const auto& row : out.results.rows)
    med[row[col("A")] + "/" + row[col("B")]][row[col("preconditioner")]] = std::stod(row[col("iterations")]);
  std::string summary;
  for (const auto& [cell, it] : med) {
    const double sc = it.at("scaled");
    for (const char* other : {"nonscaled", "jacobi", "identity"})
      o.require(sc <= it.at(other), "A/B " + cell + ": scaled " + fmt("%.1f", sc) + " > " + other + " " +
                                        fmt("%.1f", it.at(other)));
    o.require(it.at("scaled_rand_power") <= it.at("scaled_rand"),
              "A/B " + cell + fmt(": q=2 %.1f > q=0 %.1f", it.at("scaled_rand_power"), it.at("scaled_rand")));
    summary += cell + fmt(" [%.1f %.1f %.1f]", sc, it.at("nonscaled"), it.at("scaled_rand_power")) + " ";
  }
  if (o.pass) o.detail = "medians scaled/nonscaled/q=2: " + summary;
  report("criterion-8 synthetic iteration ordering", o);
}

void criterion_9() {
  const auto t0 = Clock::now();
  Outcome o;
  FourDVarConfig fc;
  fc.n = 100;
  fc.steps = 20;
  fc.m = 50;
  const FourDVarSystem sys = assemble_heat_4dvar(fc);
  const LinearOperator s = sys.s_operator();
  std::string summary;
  for (Index r : {Index(25), Index(100)}) {
    int sum_s = 0, sum_n = 0;
    for (std::uint64_t k = 0; k < 10; ++k) {
      const FourDVarPreconditioners set = build_4dvar_preconditioners(sys, r, split_seed(k, 1));
      const Vector b = sys.rhs(k);
      const SolveReport rs = pcg_solve(s, b, set.scaled_nystrom, 1e-6, 150);
      const SolveReport rn = pcg_solve(s, b, set.nonscaled_nystrom, 1e-6, 150);
      sum_s += rs.iterations;
      sum_n += rn.iterations;
      o.require(rs.iterations < rn.iterations, fmt("r=%.0f seed %.0f: scaled %.0f", double(r), double(k),
                                                   rs.iterations) +
                                                   fmt(" not below nonscaled %.0f", rn.iterations));
    }
    summary += fmt("r=%.0f mean %.1f vs %.1f; ", double(r), sum_s / 10.0, sum_n / 10.0);
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, fmt("runtime %.1f s", secs));
  if (o.pass) o.detail = summary + fmt("%.1f s", secs);
  report("criterion-9 4D-VAR scaled vs nonscaled Nystrom", o);
}

void criterion_9_full_scale() {
  Outcome o;
  const FourDVarSystem sys = assemble_heat_4dvar(FourDVarConfig{});
  const Preconditioner ldl = build_4dvar_preconditioners(sys, 0, 0).ldl_baseline;
  const auto c = experiments::estimate_condition(sys.s_operator(), ldl, sys.s_one_norm(), 80, 0);
  const double target = 8.1029e5;
  const double err = std::abs(c.kappa2 - target) / target;
  o.require(err <= 0.01, fmt("kappa2 %.6g vs 8.1029e5 (rel %.3g)", c.kappa2, err));
  o.detail += fmt("; kappa1 estimate %.6g", c.kappa1);
  if (o.pass) o.detail = fmt("kappa2 %.6g (rel %.3g)", c.kappa2, err) + fmt(", kappa1 %.6g", c.kappa1);
  report("criterion-9 optional full-scale condition number", o);
}

void criterion_10() {
  Outcome o;
  double margin = 1e300;
  for (std::uint64_t k = 0; k < 10; ++k) {
    std::mt19937_64 gen(k + 4242);
    const Index n = std::uniform_int_distribution<Index>(12, 40)(gen);
    std::vector<Index> sizes;
    for (Index left = n; left > 0;) {
      const Index b = std::min(left, std::uniform_int_distribution<Index>(1, 8)(gen));
      sizes.push_back(b);
      left -= b;
    }
    const Matrix s = random_spd(n, 8000 + k);
    const Matrix pstar = build_block_jacobi(DenseSym(s), BlockPartition{sizes}).dense();
    const double dstar = divergence_ld(DenseSym(s), DenseSym(pstar)).value;
    for (std::uint64_t c = 0; c < 100; ++c) {
      Matrix mblk = Matrix::Zero(n, n);
      Index off = 0;
      for (Index b : sizes) {
        mblk.block(off, off, b, b) = random_matrix(b, b, 100000 * k + 1000 * c + off);
        off += b;
      }
      Matrix pert;
      if (c % 2 == 0) {
        const Matrix mm = Matrix::Identity(n, n) + (0.01 + 0.003 * static_cast<double>(c)) * mblk;
        pert = mm * pstar * mm.transpose();
      } else {
        pert = mblk * mblk.transpose() + 0.1 * Matrix::Identity(n, n);
      }
      const double d = divergence_ld(DenseSym(s), DenseSym(pert)).value;
      margin = std::min(margin, d - dstar);
      o.require(d >= dstar, fmt("instance %.0f: perturbation %.0f gives %.10g", double(k), double(c), d) +
                                fmt(" below %.10g", dstar));
    }
  }
  if (o.pass) o.detail = fmt("10 instances x 100 perturbations, smallest margin %.3g", margin);
  report("criterion-10 block Jacobi minimizer", o);
}

}  // namespace

int main(int argc, char** argv) {
  bool full_scale = false;
  for (int i = 1; i < argc; ++i) full_scale = full_scale || std::strcmp(argv[i], "--full-scale") == 0;

  criterion_1();
  std::vector<Instance> instances;
  for (std::uint64_t k = 0; k < 50; ++k) instances.push_back(make_instance(k));
  criteria_2_3(instances);
  criterion_4(instances);
  criterion_5(instances);
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (full_scale) {
    criterion_9_full_scale();
  } else {
    std::printf("SKIP criterion-9 optional full-scale condition number: pass --full-scale\n");
  }
  criterion_10();
  std::printf("%d failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}
