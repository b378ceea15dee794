// Solve one scaled-down heat-equation 4D-VAR system with three preconditioners.

#include <iostream>

#include "bregman_precond/pcg.hpp"
#include "bregman_precond/testgen.hpp"

int main() {
  using namespace bprec;
  FourDVarConfig cfg;
  cfg.n = 100;
  cfg.steps = 20;
  cfg.m = 50;
  const FourDVarSystem sys = assemble_heat_4dvar(cfg);
  const LinearOperator s = sys.s_operator();
  const Vector b = sys.rhs(7);

  for (Index r : {25, 100}) {
    const FourDVarPreconditioners p = build_4dvar_preconditioners(sys, r, 11);
    const auto scaled = pcg_solve(s, b, p.scaled_nystrom, 1e-6, 150);
    const auto nonscaled = pcg_solve(s, b, p.nonscaled_nystrom, 1e-6, 150);
    std::cout << "r=" << r << "  scaled Nystrom: " << scaled.iterations
              << " its, nonscaled Nystrom: " << nonscaled.iterations << " its\n";
  }
  const auto base = pcg_solve(s, b, build_4dvar_preconditioners(sys, 0, 0).ldl_baseline, 1e-6, 150);
  std::cout << "L^T D^-1 L baseline: " << base.iterations << " its ("
            << to_string(base.termination) << ")\n";
}
