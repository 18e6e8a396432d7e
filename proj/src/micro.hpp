#pragma once

#include <memory>
#include <vector>

#include "fem.hpp"
#include "problem.hpp"

namespace tl {

struct StepDiagnostics {
  int step = 0;
  double time = 0.0;
  double residual = 0.0;       // relative residual of the step system on all unknowns
  int picard_iterations = 0;
  double flux_jump = 0.0;      // relative residual restricted to the B_L / B_R nodes
};

struct MicroSolution {
  ProblemConfig config;
  std::shared_ptr<const TaggedMesh> mesh;
  TransientField v;  // transformed field, zero on Gamma_L and Gamma_R
  TransientField u;  // physical field u = v - u_b
  std::vector<StepDiagnostics> diagnostics;

  double eps() const { return config.geometry.eps; }
  double kappa() const { return config.geometry.kappa(); }
  double delta() const { return config.drift.delta; }
};

// y = (x1/kappa, x2/eps mod 1).
Point layer_cell_coordinates(const LayerGeometry& geom, Point x);

TaggedMesh build_micro_mesh(const ProblemConfig& config);

MicroSolution solve_micro(const ProblemConfig& config);

struct EnergyReport {
  double e1 = 0.0;  // L2 norms at the final time, eps^alpha on the layer
  double e2 = 0.0;  // time-integrated gradient norms, eps^beta on the layer
  double e3 = 0.0;  // time-integrated backward difference quotients, eps^alpha on the layer
  double e4 = 0.0;  // drift norms at the final time, eps^gamma on the layer
};

EnergyReport energy_report(const MicroSolution& sol, const ScalingExponents& exponents);
// Per level: e1 and e4 at that level, e2 and e3 accumulated up to it.
std::vector<EnergyReport> energy_series(const MicroSolution& sol, const ScalingExponents& exponents);

// (1/|Omega_M|) int_{Omega_M} u per time level.
std::vector<double> layer_average_series(const MicroSolution& sol);

}  // namespace tl
