// bregman-precond: experiment runner.
//
//   bregman-precond synthetic --config grid.json --out results/synthetic.csv
//   bregman-precond fourdvar --rank 100 --trials 10
//   bregman-precond analyze --out terms/summary.csv
//   bregman-precond solve --a A.mtx --b B.mtx --rank 20
//
// Each run writes <out>, <out stem>.timings.csv and <out stem>.config.json.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bregman_precond/experiments.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using bprec::Index;
using bprec::experiments::ExperimentConfig;
using bprec::experiments::Kind;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Index> rank;
  std::optional<Index> oversample;
  std::optional<int> power;
  std::optional<double> tol;
  std::optional<int> maxit;
  std::optional<int> trials;
  bool full_scale = false;
  std::optional<std::string> a_path, b_path, rhs_path;
};

ExperimentConfig defaults_for(Kind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  switch (kind) {
    case Kind::synthetic:
      break;
    case Kind::fourdvar:
      cfg.fourdvar.n = 100;
      cfg.fourdvar.steps = 20;
      cfg.fourdvar.m = 50;
      cfg.ranks = {25, 100};
      cfg.tol = 1e-6;
      cfg.maxit = 150;
      cfg.trials = 10;
      break;
    case Kind::analyze:
      cfg.n = 100;
      cfg.m = 60;
      cfg.rank = 30;
      cfg.labels_a = {4};
      cfg.labels_b = {1};
      cfg.trials = 1;
      break;
    case Kind::solve:
      cfg.rank = 10;
      cfg.trials = 1;
      break;
  }
  cfg.out = bprec::experiments::to_string(kind) + ".csv";
  return cfg;
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void apply_json(const json& j, ExperimentConfig& cfg) {
  static const std::vector<std::string> known = {
      "n", "m", "rank", "oversample", "power", "labels_a", "labels_b", "preconditioners",
      "fourdvar", "ranks", "full_scale", "lanczos_steps", "memory_budget_mb", "a", "b", "rhs",
      "tol", "maxit", "trials", "seed", "dense_cap", "divergence", "kappa", "threads", "out"};
  for (const auto& item : j.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw bprec::InvalidArgument("config: unknown key '" + item.key() + "'");
  take(j, "n", cfg.n);
  take(j, "m", cfg.m);
  take(j, "rank", cfg.rank);
  take(j, "oversample", cfg.oversample);
  take(j, "power", cfg.power);
  take(j, "labels_a", cfg.labels_a);
  take(j, "labels_b", cfg.labels_b);
  take(j, "preconditioners", cfg.preconditioners);
  take(j, "ranks", cfg.ranks);
  take(j, "full_scale", cfg.full_scale);
  take(j, "lanczos_steps", cfg.lanczos_steps);
  take(j, "memory_budget_mb", cfg.memory_budget_mb);
  take(j, "a", cfg.a_path);
  take(j, "b", cfg.b_path);
  take(j, "rhs", cfg.rhs_path);
  take(j, "tol", cfg.tol);
  take(j, "maxit", cfg.maxit);
  take(j, "trials", cfg.trials);
  take(j, "seed", cfg.seed);
  take(j, "dense_cap", cfg.dense_cap);
  take(j, "divergence", cfg.divergence);
  take(j, "kappa", cfg.kappa);
  take(j, "threads", cfg.threads);
  take(j, "out", cfg.out);
  if (j.contains("fourdvar")) {
    const json& f = j.at("fourdvar");
    take(f, "n", cfg.fourdvar.n);
    take(f, "N", cfg.fourdvar.steps);
    take(f, "m", cfg.fourdvar.m);
    take(f, "dt", cfg.fourdvar.dt);
    take(f, "dx", cfg.fourdvar.dx);
    take(f, "tau_d", cfg.fourdvar.tau_d);
    take(f, "tau_r", cfg.fourdvar.tau_r);
  }
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["kind"] = bprec::experiments::to_string(cfg.kind);
  if (cfg.kind == Kind::fourdvar) {
    j["fourdvar"] = {{"n", cfg.fourdvar.n},     {"N", cfg.fourdvar.steps},   {"m", cfg.fourdvar.m},
                     {"dt", cfg.fourdvar.dt},   {"dx", cfg.fourdvar.dx},     {"tau_d", cfg.fourdvar.tau_d},
                     {"tau_r", cfg.fourdvar.tau_r}};
    j["ranks"] = cfg.ranks;
    j["full_scale"] = cfg.full_scale;
    j["lanczos_steps"] = cfg.lanczos_steps;
    j["memory_budget_mb"] = cfg.memory_budget_mb;
  } else {
    if (cfg.kind == Kind::solve) {
      j["a"] = cfg.a_path;
      j["b"] = cfg.b_path;
      j["rhs"] = cfg.rhs_path;
    } else {
      j["n"] = cfg.n;
      j["m"] = cfg.m;
      j["labels_a"] = cfg.labels_a;
      j["labels_b"] = cfg.labels_b;
    }
    j["rank"] = cfg.rank;
    j["oversample"] = cfg.oversample;
    j["power"] = cfg.power;
  }
  j["preconditioners"] = cfg.roster();
  j["tol"] = cfg.tol;
  j["maxit"] = cfg.maxit;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["dense_cap"] = cfg.dense_cap;
  j["divergence"] = cfg.divergence;
  j["kappa"] = cfg.kappa;
  j["out"] = cfg.out;
  return j;
}

ExperimentConfig resolve(Kind kind, const Overrides& o) {
  ExperimentConfig cfg = defaults_for(kind);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw bprec::InvalidArgument("cannot open config " + o.config_path);
    apply_json(json::parse(in), cfg);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.rank) {
    cfg.rank = *o.rank;
    if (kind == Kind::fourdvar) cfg.ranks = {*o.rank};
  }
  if (o.oversample) cfg.oversample = *o.oversample;
  if (o.power) cfg.power = *o.power;
  if (o.tol) cfg.tol = *o.tol;
  if (o.maxit) cfg.maxit = *o.maxit;
  if (o.trials) cfg.trials = *o.trials;
  if (o.full_scale) cfg.full_scale = true;
  if (o.a_path) cfg.a_path = *o.a_path;
  if (o.b_path) cfg.b_path = *o.b_path;
  if (o.rhs_path) cfg.rhs_path = *o.rhs_path;
  if (kind == Kind::fourdvar && cfg.full_scale) cfg = bprec::experiments::full_scale_fourdvar(cfg);
  cfg.validate();
  return cfg;
}

void write_outputs(const ExperimentConfig& cfg, const bprec::experiments::RunOutput& out) {
  const fs::path path(cfg.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path stem = path.parent_path() / path.stem();
  out.results.write(path.string());
  out.timings.write(stem.string() + ".timings.csv");
  for (const auto& [name, table] : out.extra) table.write(stem.string() + "_" + name + ".csv");
  std::ofstream echo(stem.string() + ".config.json");
  echo << to_json(cfg).dump(2) << '\n';
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Base seed (u64)");
  sub->add_option("--out", o.out, "Output CSV path");
  sub->add_option("--rank", o.rank, "Target rank r");
  sub->add_option("--oversample", o.oversample, "Oversampling p");
  sub->add_option("--power", o.power, "Power iterations q");
  sub->add_option("--tol", o.tol, "PCG relative residual tolerance");
  sub->add_option("--maxit", o.maxit, "PCG iteration limit");
  sub->add_option("--trials", o.trials, "Random instances per cell");
  sub->add_flag("--full-scale", o.full_scale, "4D-VAR at full size: n=1000, N=99, m=500 (s = 1e5)");
}

const char* describe(Kind k) {
  switch (k) {
    case Kind::synthetic: return "Preconditioner grid on synthetic A + B spectra";
    case Kind::fourdvar: return "Heat-equation 4D-VAR: Nystrom preconditioners vs baselines";
    case Kind::analyze: return "Divergence term matrices and generalized eigenvalues";
    case Kind::solve: return "PCG on A + B read from Matrix Market files";
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioner experiments for S = A + B"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<CLI::App*, Kind>> subs;
  for (Kind k : {Kind::synthetic, Kind::fourdvar, Kind::analyze, Kind::solve}) {
    const std::string name = bprec::experiments::to_string(k);
    CLI::App* sub = app.add_subcommand(name, describe(k));
    add_common(sub, o);
    if (k == Kind::solve) {
      sub->add_option("--a", o.a_path, "Matrix Market file for A (SPD)");
      sub->add_option("--b", o.b_path, "Matrix Market file for B (PSD)");
      sub->add_option("--rhs", o.rhs_path, "Matrix Market column for b (default: seeded Gaussian)");
    }
    subs.emplace_back(sub, k);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, kind] : subs) {
      if (!sub->parsed()) continue;
      const ExperimentConfig cfg = resolve(kind, o);
      const auto out = bprec::experiments::run(cfg);
      write_outputs(cfg, out);
      std::cout << out.results.str();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
