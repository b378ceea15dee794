#pragma once

// Benchmark pipelines behind the command-line tool: synthetic S = A + B grids,
// the 4D-VAR heat-equation runs, divergence-term dumps and ad-hoc solves.
// Output tables are deterministic for a fixed configuration; wall times are
// kept in a separate table.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bregman.hpp"
#include "linop.hpp"
#include "mmio.hpp"
#include "pcg.hpp"
#include "precond.hpp"
#include "rng.hpp"
#include "sketch.hpp"
#include "testgen.hpp"
#include "types.hpp"

namespace bprec::experiments {

enum class Kind { synthetic, fourdvar, analyze, solve };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::synthetic: return "synthetic";
    case Kind::fourdvar: return "fourdvar";
    case Kind::analyze: return "analyze";
    case Kind::solve: return "solve";
  }
  return "unknown";
}

inline Kind parse_kind(const std::string& s) {
  if (s == "synthetic") return Kind::synthetic;
  if (s == "fourdvar") return Kind::fourdvar;
  if (s == "analyze") return Kind::analyze;
  if (s == "solve") return Kind::solve;
  throw InvalidArgument("unknown experiment kind '" + s + "'");
}

/// The twelve preconditioners compared on S = A + B.
inline const std::vector<std::string>& synthetic_roster() {
  static const std::vector<std::string> names = {
      "identity",     "pchol",          "sgs",           "jacobi",
      "nonscaled",    "nonscaled_rand", "nonscaled_rand_power", "nonscaled_nys",
      "scaled",       "scaled_rand",    "scaled_rand_power",    "scaled_nys"};
  return names;
}

inline const std::vector<std::string>& fourdvar_roster() {
  static const std::vector<std::string> names = {"identity", "ldl", "pchol", "nonscaled_nys",
                                                 "scaled_nys"};
  return names;
}

struct ExperimentConfig {
  Kind kind = Kind::synthetic;

  // synthetic / analyze / solve
  Index n = 1000;
  Index m = 600;
  Index rank = 300;
  Index oversample = 0;
  int power = 2;
  std::vector<int> labels_a{1, 2, 3, 4};
  std::vector<int> labels_b{1, 2};
  std::vector<std::string> preconditioners;  // empty: full roster for the kind

  // fourdvar
  FourDVarConfig fourdvar;
  std::vector<Index> ranks{25, 100};
  bool full_scale = false;
  int lanczos_steps = 80;
  double memory_budget_mb = 2560.0;

  // solve
  std::string a_path;
  std::string b_path;
  std::string rhs_path;

  double tol = 1e-7;
  int maxit = 1000;
  int trials = 25;
  std::uint64_t seed = 0;
  Index dense_cap = kDefaultDenseCap;
  bool divergence = true;
  bool kappa = true;
  int threads = 1;
  std::string out;

  const std::vector<std::string>& roster() const {
    if (!preconditioners.empty()) return preconditioners;
    return kind == Kind::fourdvar ? fourdvar_roster() : synthetic_roster();
  }

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("config: tol must be positive");
    if (maxit < 0) throw InvalidArgument("config: maxit must be >= 0");
    if (trials < 1) throw InvalidArgument("config: trials must be >= 1");
    if (threads < 1) throw InvalidArgument("config: threads must be >= 1");
    if (oversample < 0) throw InvalidArgument("config: oversample must be >= 0");
    if (power < 0) throw InvalidArgument("config: power must be >= 0");
    const auto& valid = kind == Kind::fourdvar ? fourdvar_roster() : synthetic_roster();
    for (const auto& name : roster())
      if (std::find(valid.begin(), valid.end(), name) == valid.end())
        throw InvalidArgument("config: unknown preconditioner '" + name + "' for " + to_string(kind));
    if (kind == Kind::fourdvar) {
      fourdvar.validate();
      for (Index r : ranks)
        if (r < 1 || r > fourdvar.obs_size())
          throw InvalidArgument("config: rank " + std::to_string(r) + " outside [1, m(N+1)]");
      return;
    }
    if (kind == Kind::solve) {
      if (a_path.empty() || b_path.empty()) throw InvalidArgument("config: solve needs A and B paths");
      if (rank < 1) throw InvalidArgument("config: rank must be >= 1");
      return;
    }
    if (n < 2) throw InvalidArgument("config: n must be >= 2");
    if (m < 1 || m >= n) throw InvalidArgument("config: need 1 <= m < n");
    if (rank < 1 || rank >= m) throw InvalidArgument("config: need 1 <= r < m");
    if (rank + oversample > n) throw InvalidArgument("config: r + p exceeds n");
    for (int a : labels_a) (void)spectrum_label_a(a);
    for (int b : labels_b) (void)spectrum_label_b(b);
    if (kind == Kind::analyze && n > dense_cap)
      throw InvalidArgument("config: analyze needs n <= dense cap (" + std::to_string(dense_cap) + ")");
  }
};

/// Thread count from the configuration, capped by BREGMAN_PRECOND_THREADS.
inline int thread_cap(int requested) {
  int cap = requested;
  if (const char* env = std::getenv("BREGMAN_PRECOND_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) cap = std::min(cap, v);
  }
  return std::max(cap, 1);
}

/// Runs fn(0..count-1) on up to `threads` workers. Each index is handled by
/// exactly one worker; results must be written to per-index slots.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_escape(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ch == ',' ? ';' : ' ';
  return s;
}

/// Header plus rows, all cells preformatted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(std::ostream& out) const {
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }

  std::string str() const {
    std::ostringstream s;
    write(s);
    return s.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    write(out);
  }
};

struct RunOutput {
  Table results;
  Table timings;
  /// Extra files (name suffix -> table), e.g. term matrices from analyze.
  std::map<std::string, Table> extra;
};

// ---------------------------------------------------------------------------
// Per-cell measurements.

struct CellResult {
  bool ok = false;
  std::string error;
  double iterations = 0.0;
  double residual = 0.0;
  std::string termination;
  double divergence = std::numeric_limits<double>::quiet_NaN();
  double build_products = 0.0;
  double build_solves = 0.0;
  double applications = 0.0;
  double seconds = 0.0;
};

struct Aggregate {
  int succeeded = 0;
  std::string status = "ok";
  double iterations = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  double divergence = std::numeric_limits<double>::quiet_NaN();
  double build_products = std::numeric_limits<double>::quiet_NaN();
  double build_solves = std::numeric_limits<double>::quiet_NaN();
  double applications = std::numeric_limits<double>::quiet_NaN();
  double seconds = std::numeric_limits<double>::quiet_NaN();
  int converged = 0;
};

inline Aggregate aggregate(const std::vector<CellResult>& cells) {
  Aggregate a;
  std::vector<double> it, res, div, prod, sol, app, sec;
  for (const auto& c : cells) {
    if (!c.ok) {
      if (a.status == "ok") a.status = "error: " + csv_escape(c.error);
      continue;
    }
    ++a.succeeded;
    a.converged += c.termination == "converged";
    it.push_back(c.iterations);
    res.push_back(c.residual);
    if (!std::isnan(c.divergence)) div.push_back(c.divergence);
    prod.push_back(c.build_products);
    sol.push_back(c.build_solves);
    app.push_back(c.applications);
    sec.push_back(c.seconds);
  }
  a.iterations = median(it);
  a.residual = median(res);
  a.divergence = median(div);
  a.build_products = median(prod);
  a.build_solves = median(sol);
  a.applications = median(app);
  a.seconds = median(sec);
  return a;
}

inline CellResult measure(const std::function<Preconditioner()>& build, const LinearOperator& s,
                          const Vector& b, const std::optional<DenseSym>& s_dense,
                          const ExperimentConfig& cfg) {
  CellResult cell;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Preconditioner p = build();
    const SolveReport rep = pcg_solve(s, b, p, cfg.tol, cfg.maxit);
    cell.iterations = rep.iterations;
    cell.residual = rep.final_residual();
    cell.termination = std::string(to_string(rep.termination));
    cell.build_products = static_cast<double>(p.build_stats().operator_products);
    cell.build_solves = static_cast<double>(p.build_stats().factor_solves);
    cell.applications = static_cast<double>(p.applications());
    if (s_dense && cfg.divergence && s_dense->dim() <= cfg.dense_cap)
      cell.divergence = divergence_ld(DenseSym(p.dense()), *s_dense).value;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

// ---------------------------------------------------------------------------
// S = A + B preconditioners by name.

struct SplitProblem {
  DenseSym s;
  DenseSym b;
  FactoredSpd q;
  DenseSym g;  // Q^{-1} B Q^{-T}
};

/// Q^{-1} M Q^{-T} for symmetric M, formed by factor solves.
inline Matrix whiten(const FactoredSpd& q, const Matrix& m) {
  const Index n = m.rows();
  Matrix left(n, n);
  for (Index j = 0; j < n; ++j) left.col(j) = q.solve_q(Vector(m.col(j)));
  Matrix out(n, n);
  const Matrix left_t = left.transpose();  // M Q^{-T}
  for (Index j = 0; j < n; ++j) out.col(j) = q.solve_q(Vector(left_t.col(j)));
  return out;
}

inline Preconditioner build_named(const std::string& name, const SplitProblem& prob,
                                  const ExperimentConfig& cfg, std::uint64_t sketch_seed) {
  const Index n = prob.s.dim();
  const Index r = cfg.rank;
  if (name == "identity") return identity_preconditioner(n);
  if (name == "pchol") return build_partial_cholesky(prob.s, r);
  if (name == "sgs") return build_sgs(prob.s);
  if (name == "jacobi") return build_jacobi(prob.s);

  const bool scaled = name.rfind("scaled", 0) == 0;
  const DenseSym& target = scaled ? prob.g : prob.b;
  const std::string variant = name.substr(name.find('_') == std::string::npos ? name.size()
                                                                              : name.find('_') + 1);
  LowRankEig approx;
  std::uint64_t products = 0;
  if (name == "scaled" || name == "nonscaled") {
    approx = truncated_evd(target, r);
  } else {
    const LinearOperator op = dense_operator(target);
    SketchConfig sc{r, cfg.oversample, 0, sketch_seed};
    if (variant == "rand") {
      approx = randomized_evd(op, sc);
    } else if (variant == "rand_power") {
      sc.power = cfg.power;
      approx = randomized_evd(op, sc);
    } else if (variant == "nys") {
      approx = nystrom(op, sc, NystromRange::qr_of_sketch);
    } else {
      throw InvalidArgument("unknown preconditioner '" + name + "'");
    }
    products = op.products();
  }
  Preconditioner p = scaled ? build_scaled(prob.q, approx) : build_nonscaled(prob.q, approx);
  BuildStats stats = p.build_stats();
  stats.operator_products = products;
  return p.with_build_stats(stats);
}

inline Vector gaussian_rhs(Index n, std::uint64_t seed) {
  Vector b = GaussianStream(seed, 3).vector(n);
  return b / b.norm();
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& cell_header() {
  static const std::vector<std::string> h = {
      "preconditioner", "rank",           "trials_ok", "converged",     "iterations",
      "relative_residual", "D_LD",        "build_products", "build_factor_solves",
      "applications",   "status"};
  return h;
}

inline std::vector<std::string> cell_columns(const std::string& name, std::optional<Index> rank,
                                             const Aggregate& a) {
  return {name,
          rank ? std::to_string(*rank) : std::string("NA"),
          std::to_string(a.succeeded),
          std::to_string(a.converged),
          format_number(a.iterations),
          format_number(a.residual),
          format_number(a.divergence),
          format_number(a.build_products),
          format_number(a.build_solves),
          format_number(a.applications),
          a.status};
}

inline std::optional<Index> roster_rank(const std::string& name, Index r) {
  if (name == "identity" || name == "sgs" || name == "jacobi" || name == "ldl") return std::nullopt;
  return r;
}

/// Median over trials of every (A label, B label, preconditioner) cell.
inline RunOutput run_synthetic(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& roster = cfg.roster();
  const int threads = thread_cap(cfg.threads);
  const bool dense_ok = cfg.n <= cfg.dense_cap;

  RunOutput out;
  out.results.header = {"A", "B", "n", "m", "kappa2_S"};
  for (const auto& h : cell_header()) out.results.header.push_back(h);
  out.timings.header = {"A", "B", "preconditioner", "median_wall_time_s"};

  for (int la : cfg.labels_a)
    for (int lb : cfg.labels_b) {
      std::vector<std::vector<CellResult>> cells(roster.size(),
                                                 std::vector<CellResult>(static_cast<std::size_t>(cfg.trials)));
      std::vector<double> kappas(static_cast<std::size_t>(cfg.trials), std::numeric_limits<double>::quiet_NaN());
      parallel_for(cfg.trials, threads, [&](int t) {
        const std::uint64_t trial_seed = split_seed(cfg.seed, static_cast<std::uint64_t>(t));
        const SyntheticProblem sp = assemble_synthetic(la, lb, cfg.n, cfg.m, trial_seed);
        const SplitProblem prob{sp.s, sp.b, sp.q, sp.g_dense()};
        if (cfg.kappa && dense_ok) kappas[static_cast<std::size_t>(t)] = condition_number(dense_eig_sym(sp.s).values);
        const LinearOperator s_op = dense_operator(sp.s);
        const Vector rhs = gaussian_rhs(cfg.n, trial_seed);
        const std::optional<DenseSym> s_dense = dense_ok ? std::optional<DenseSym>(sp.s) : std::nullopt;
        const std::uint64_t sketch_seed = split_seed(trial_seed, 1);
        for (std::size_t c = 0; c < roster.size(); ++c)
          cells[c][static_cast<std::size_t>(t)] = measure(
              [&] { return build_named(roster[c], prob, cfg, sketch_seed); }, s_op, rhs, s_dense, cfg);
      });
      const double kappa = median(kappas);
      for (std::size_t c = 0; c < roster.size(); ++c) {
        const Aggregate a = aggregate(cells[c]);
        std::vector<std::string> row = {std::to_string(la), std::to_string(lb), std::to_string(cfg.n),
                                        std::to_string(cfg.m), format_number(kappa)};
        for (auto& col : cell_columns(roster[c], roster_rank(roster[c], cfg.rank), a)) row.push_back(col);
        if (!dense_ok && cfg.divergence) row[row.size() - 5] = "skipped_dense_cap";
        out.results.rows.push_back(std::move(row));
        out.timings.rows.push_back(
            {std::to_string(la), std::to_string(lb), roster[c], format_number(a.seconds)});
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// 4D-VAR

struct ConditionEstimate {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double kappa2 = 0.0;
  double kappa1 = 0.0;
};

/// kappa_2 from Lanczos on S and on S^{-1} (inner PCG with `p`), and
/// ||S||_1 times a block estimate of ||S^{-1}||_1.
inline ConditionEstimate estimate_condition(const LinearOperator& s, const Preconditioner& p,
                                            double s_one_norm, int lanczos_steps,
                                            std::uint64_t seed) {
  auto solve = [&](const Vector& x) -> Vector {
    PcgOptions opts;
    opts.tol = 1e-10;
    opts.maxit = 5000;
    SolveReport rep = pcg_solve(s, x, p, opts);
    if (rep.termination != Termination::converged)
      throw NoConvergence("estimate_condition: inner solve did not converge");
    return std::move(rep.solution);
  };
  const LinearOperator s_inv(s.dim(), solve, OperatorFlavor::callback);
  ConditionEstimate out;
  out.lambda_max = extreme_eigenvalues(s, lanczos_steps, seed).largest;
  out.lambda_min = 1.0 / extreme_eigenvalues(s_inv, lanczos_steps, seed + 1).largest;
  out.kappa2 = out.lambda_max / out.lambda_min;
  out.kappa1 = s_one_norm * one_norm_estimate(solve, s.dim());
  return out;
}

inline ExperimentConfig full_scale_fourdvar(ExperimentConfig cfg) {
  cfg.fourdvar.n = 1000;
  cfg.fourdvar.steps = 99;
  cfg.fourdvar.m = 500;
  cfg.fourdvar.dt = 1e-4;
  cfg.fourdvar.dx = 2e-2;
  cfg.fourdvar.tau_d = 1.0;
  cfg.fourdvar.tau_r = 1.0;
  cfg.ranks = {500, 2000, 4000};
  return cfg;
}

/// Dense n x r blocks held at once while sketching (test matrix, sketch,
/// factor, basis and workspace).
inline double sketch_memory_mb(Index s, Index r) {
  return 6.0 * 8.0 * static_cast<double>(s) * static_cast<double>(r) / (1024.0 * 1024.0);
}

inline RunOutput run_fourdvar(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.full_scale ? full_scale_fourdvar(cfg_in) : cfg_in;
  cfg.validate();
  const FourDVarSystem sys = assemble_heat_4dvar(cfg.fourdvar);
  const Index s_dim = sys.dim();
  const LinearOperator s_op = sys.s_operator();
  const int threads = thread_cap(cfg.threads);
  const auto& roster = cfg.roster();

  ConditionEstimate cond{};
  if (cfg.kappa) {
    const Preconditioner ldl = build_4dvar_preconditioners(sys, 0, cfg.seed).ldl_baseline;
    cond = estimate_condition(s_op, ldl, sys.s_one_norm(), cfg.lanczos_steps, cfg.seed);
  }

  struct Job {
    std::string name;
    std::optional<Index> rank;
  };
  std::vector<Job> jobs;
  for (const auto& name : roster) {
    if (name == "identity" || name == "ldl") {
      jobs.push_back({name, std::nullopt});
    } else {
      for (Index r : cfg.ranks) jobs.push_back({name, r});
    }
  }

  std::vector<std::vector<CellResult>> cells(jobs.size(),
                                             std::vector<CellResult>(static_cast<std::size_t>(cfg.trials)));
  const Vector diag = sys.s_diagonal();
  parallel_for(cfg.trials, threads, [&](int t) {
    const std::uint64_t trial_seed = split_seed(cfg.seed, static_cast<std::uint64_t>(t));
    const Vector rhs = sys.rhs(trial_seed);
    const std::uint64_t sketch_seed = split_seed(trial_seed, 1);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const Job& job = jobs[j];
      CellResult& cell = cells[j][static_cast<std::size_t>(t)];
      if (job.rank && sketch_memory_mb(s_dim, *job.rank) > cfg.memory_budget_mb) {
        cell.error = "skipped: rank " + std::to_string(*job.rank) + " exceeds memory budget";
        continue;
      }
      cell = measure(
          [&]() -> Preconditioner {
            if (job.name == "identity") return identity_preconditioner(s_dim);
            if (job.name == "ldl") return build_4dvar_preconditioners(sys, 0, sketch_seed).ldl_baseline;
            if (job.name == "pchol")
              return build_partial_cholesky(
                  diag, [&](Index col) { return sys.apply_s(Vector::Unit(s_dim, col)); }, *job.rank);
            const FourDVarPreconditioners set = build_4dvar_preconditioners(sys, *job.rank, sketch_seed);
            return job.name == "scaled_nys" ? set.scaled_nystrom : set.nonscaled_nystrom;
          },
          s_op, rhs, std::nullopt, cfg);
    }
  });

  RunOutput out;
  out.results.header = {"n", "N", "m", "s", "kappa2_S_estimate", "kappa1_S_estimate"};
  for (const auto& h : cell_header()) out.results.header.push_back(h);
  out.timings.header = {"preconditioner", "rank", "median_wall_time_s"};
  const auto& fc = cfg.fourdvar;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Aggregate a = aggregate(cells[j]);
    std::vector<std::string> row = {std::to_string(fc.n), std::to_string(fc.steps), std::to_string(fc.m),
                                    std::to_string(s_dim),
                                    cfg.kappa ? format_number(cond.kappa2) : "NA",
                                    cfg.kappa ? format_number(cond.kappa1) : "NA"};
    for (auto& col : cell_columns(jobs[j].name, jobs[j].rank, a)) row.push_back(col);
    row[row.size() - 5] = "NA";  // D_LD needs dense S^{-1}
    out.results.rows.push_back(std::move(row));
    out.timings.rows.push_back({jobs[j].name, jobs[j].rank ? std::to_string(*jobs[j].rank) : "NA",
                                format_number(a.seconds)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Divergence terms and generalized eigenvalues.

inline Table matrix_table(const Matrix& m) {
  Table t;
  for (Index j = 0; j < m.cols(); ++j) t.header.push_back("c" + std::to_string(j + 1));
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row;
    for (Index j = 0; j < m.cols(); ++j) row.push_back(format_number(m(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// One instance per (A, B) label pair, seeded with `cfg.seed`.
inline RunOutput run_analyze(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& roster = cfg.roster();
  RunOutput out;
  out.results.header = {"A", "B", "preconditioner", "rank", "D_LD", "term_total",
                        "gen_eig_max", "gen_eig_min", "status"};
  out.timings.header = {"A", "B", "preconditioner", "wall_time_s"};
  for (int la : cfg.labels_a)
    for (int lb : cfg.labels_b) {
      const SyntheticProblem sp = assemble_synthetic(la, lb, cfg.n, cfg.m, cfg.seed);
      const SplitProblem prob{sp.s, sp.b, sp.q, sp.g_dense()};
      const std::uint64_t sketch_seed = split_seed(cfg.seed, 1);
      const DenseSym y(Matrix(Matrix::Identity(cfg.n, cfg.n) + prob.g.matrix()));
      const std::string stem = std::to_string(la) + "_" + std::to_string(lb);
      Table eigs;
      eigs.header = {"index"};
      std::vector<Vector> columns;
      for (const auto& name : roster) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::string> row = {std::to_string(la), std::to_string(lb), name};
        const auto rank = roster_rank(name, cfg.rank);
        row.push_back(rank ? std::to_string(*rank) : "NA");
        try {
          const Preconditioner p = build_named(name, prob, cfg, sketch_seed);
          const DenseSym p_dense(p.dense());
          const double d = divergence_ld(p_dense, sp.s).value;
          const TermMatrix terms = divergence_terms(DenseSym(whiten(sp.q, p_dense.matrix())), y);
          const Vector ge = generalized_eigs(p, sp.s, cfg.dense_cap);
          out.extra[stem + "_" + name + "_alignment"] = matrix_table(terms.alignment);
          out.extra[stem + "_" + name + "_scalar"] = matrix_table(terms.scalar_terms);
          eigs.header.push_back(name);
          columns.push_back(ge);
          row.insert(row.end(), {format_number(d), format_number(terms.total()), format_number(ge(0)),
                                 format_number(ge(ge.size() - 1)), "ok"});
        } catch (const std::exception& e) {
          row.insert(row.end(), {"NA", "NA", "NA", "NA", "error: " + csv_escape(e.what())});
        }
        out.results.rows.push_back(std::move(row));
        out.timings.rows.push_back(
            {std::to_string(la), std::to_string(lb), name,
             format_number(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())});
      }
      for (Index i = 0; i < cfg.n; ++i) {
        std::vector<std::string> row = {std::to_string(i + 1)};
        for (const auto& c : columns) row.push_back(format_number(c(i)));
        eigs.rows.push_back(std::move(row));
      }
      out.extra[stem + "_generalized_eigs"] = eigs;
    }
  return out;
}

// ---------------------------------------------------------------------------

/// One user-supplied S = A + B from Matrix Market files; A is Cholesky-factored.
inline RunOutput run_solve(const ExperimentConfig& cfg) {
  cfg.validate();
  const DenseSym a = read_matrix_market_sym(cfg.a_path);
  const DenseSym b = read_matrix_market_sym(cfg.b_path);
  check_dim(a.dim(), b.dim(), "solve: A and B");
  const Index n = a.dim();
  if (cfg.rank > n) throw InvalidArgument("config: rank exceeds dimension");

  Vector rhs;
  if (!cfg.rhs_path.empty()) {
    const Matrix r = read_matrix_market(cfg.rhs_path);
    if (r.cols() != 1) throw InvalidArgument("solve: right-hand side must be a single column");
    check_dim(n, r.rows(), "solve: right-hand side");
    rhs = r.col(0);
  } else {
    rhs = gaussian_rhs(n, cfg.seed);
  }

  const FactoredSpd q = cholesky_factor(a);
  const DenseSym s(Matrix(a.matrix() + b.matrix()));
  const SplitProblem prob{s, b, q, DenseSym(whiten(q, b.matrix()))};
  const LinearOperator s_op = dense_operator(s);
  const bool dense_ok = n <= cfg.dense_cap;
  const std::optional<DenseSym> s_dense = dense_ok ? std::optional<DenseSym>(s) : std::nullopt;
  const std::uint64_t sketch_seed = split_seed(cfg.seed, 1);

  RunOutput out;
  out.results.header = {"n", "kappa2_S"};
  for (const auto& h : cell_header()) out.results.header.push_back(h);
  out.timings.header = {"preconditioner", "wall_time_s"};
  const double kappa =
      cfg.kappa && dense_ok ? condition_number(dense_eig_sym(s).values) : std::numeric_limits<double>::quiet_NaN();
  for (const auto& name : cfg.roster()) {
    const CellResult cell =
        measure([&] { return build_named(name, prob, cfg, sketch_seed); }, s_op, rhs, s_dense, cfg);
    const Aggregate agg = aggregate({cell});
    std::vector<std::string> row = {std::to_string(n), format_number(kappa)};
    for (auto& col : cell_columns(name, roster_rank(name, cfg.rank), agg)) row.push_back(col);
    out.results.rows.push_back(std::move(row));
    out.timings.rows.push_back({name, format_number(cell.seconds)});
  }
  return out;
}

inline RunOutput run(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case Kind::synthetic: return run_synthetic(cfg);
    case Kind::fourdvar: return run_fourdvar(cfg);
    case Kind::analyze: return run_analyze(cfg);
    case Kind::solve: return run_solve(cfg);
  }
  throw InvalidArgument("unknown experiment kind");
}

}  // namespace bprec::experiments
