#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l0flow/l0_geometry.hpp"

namespace l0flow {

struct InvariantCheck {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // largest violation measure seen, floored at 0; passes while <= tolerance
  double tolerance = 0.0;
  int samples = 0;
  std::string detail;  // first failing sample, if any
};

struct InvariantReport {
  Model model = Model::torus;
  int d = 0;
  std::uint64_t seed = 0;
  std::vector<InvariantCheck> checks;
  bool all_passed() const;
};

struct InvariantOptions {
  int pairs = 100;          // random endpoint pairs for the bounds suite
  int solver_pairs = 10;    // pairs for solver and transport checks
  int hessian_pairs = 3;
  SolverOptions solver;
};

/// Lower bound, upper bound and minimizer speed bound for L0 on `pairs`
/// random (t', t'', m', m'') drawn from `seed`.
std::vector<InvariantCheck> l0_bounds_suite(const MetricFamily& fam, std::uint64_t seed, int pairs,
                                            const SolverOptions& opts = {});

/// Curvature identities, the flow equation, exp/log consistency, the L0
/// bounds, solver versus closed form, transport isometry, the Hessian
/// inequality and the shape of the built-in phi.
InvariantReport run_invariants(const MetricFamily& fam, std::uint64_t seed,
                               const InvariantOptions& opts = {});

}  // namespace l0flow
