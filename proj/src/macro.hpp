#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fem.hpp"
#include "problem.hpp"

namespace tl {

// Heat operator on the periodic cell Z with Dirichlet data on Z_L and Z_R, shared by
// every interface point. Responses to unit traces are precomputed, so a step costs one
// solve plus an affine combination.
class CellOperator {
 public:
  CellOperator(const StandardCell& cell, const std::function<Diag2(Point)>& D_M, double target_edge, double dt,
               double tol_lin);

  const std::shared_ptr<const TaggedMesh>& mesh() const { return mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const SpMat& mass() const { return mass_; }
  double dt() const { return dt_; }
  double measure() const { return measure_; }

  // Cell load int_Z f phi_i.
  Vec load(const std::function<double(Point)>& f) const;
  Vec constant_state(double c) const { return Vec::Constant(dofs_.num_dofs, c); }

  // State with zero traces for the right-hand side M w_prev/dt + load.
  Vec homogeneous_step(const Vec& w_prev, const Vec& load) const;
  // w0 + tau_l w_L + tau_r w_R.
  Vec combine(const Vec& w0, double tau_l, double tau_r) const;
  Vec step(const Vec& w_prev, const Vec& load, double tau_l, double tau_r) const;

  // Fluxes of a state: into the cell through Z_L (+y1 direction) and out through Z_R (+y1 direction).
  struct Fluxes {
    double in_left = 0.0;
    double out_right = 0.0;
  };
  Fluxes fluxes(const Vec& w, const Vec& w_prev, const Vec& load) const;
  // Flux response of unit traces: in_left = c_ll tau_l + c_lr tau_r, out_right = -(c_rl tau_l + c_rr tau_r).
  double c_ll() const { return c_ll_; }
  double c_lr() const { return c_lr_; }
  double c_rl() const { return c_rl_; }
  double c_rr() const { return c_rr_; }

  double mean(const Vec& w) const;  // (1/|Z|) int_Z w
  const std::vector<int>& left_dofs() const { return left_dofs_; }
  const std::vector<int>& right_dofs() const { return right_dofs_; }

 private:
  std::shared_ptr<const TaggedMesh> mesh_;
  DofMap dofs_;
  SpMat mass_, stiff_, system_;
  std::unique_ptr<TransientOperator> op_;
  std::vector<int> left_dofs_, right_dofs_;
  Vec w_left_, w_right_, mass_row_sums_;
  double c_ll_ = 0, c_lr_ = 0, c_rl_ = 0, c_rr_ = 0;
  double dt_ = 0, measure_ = 0;
};

// Standalone cell evolution with prescribed traces per time level (level 0 ignored).
TransientField solve_cell_problem_S1(const CellOperator& op, const std::vector<double>& trace_left,
                                     const std::vector<double>& trace_right,
                                     const std::function<double(double, Point)>& f_a0,
                                     const std::function<double(Point)>& initial, const std::vector<double>& times);

struct S1StepDiagnostics {
  int step = 0;
  double time = 0.0;
  int sweeps = 0;
  double trace_change = 0.0;
  double matching_residual = 0.0;  // cell traces on Z_L, Z_R against bulk segment traces, incl. last sweep change
  double flux_residual = 0.0;  // bulk flux at Sigma against cell boundary flux, both sides
  double jump_residual = 0.0;  // flux jump against the cell flux difference
};

struct MacroS1Solution {
  ProblemConfig config;
  TransientField u_l, u_r;                // physical bulk fields
  std::shared_ptr<const TaggedMesh> cell_mesh;
  DofMap cell_dofs;
  std::vector<double> segment_edges;      // N_Sigma + 1 breakpoints along Sigma
  std::vector<double> sigma_points;       // segment midpoints
  std::vector<std::vector<std::vector<double>>> cells;  // [level][segment][cell dof]
  std::vector<double> layer_average;      // per level, mean over Sigma x Z
  std::vector<S1StepDiagnostics> diagnostics;
  double max_matching_residual = 0.0;
  double max_flux_residual = 0.0;
};

MacroS1Solution solve_macro_S1(const ProblemConfig& config);

struct S2Options {
  bool decoupled_interface = false;  // interface ODE without bulk flux (bulk sees it as Dirichlet data)
};

struct MacroS2Solution {
  ProblemConfig config;
  TransientField u;                       // physical field on the strip with Sigma as internal line
  std::vector<int> sigma_vertices;        // sorted by x2
  std::vector<double> sigma_y;
  std::vector<std::vector<double>> sigma_values;  // [level][sigma vertex]
  std::vector<double> layer_average;
  std::vector<double> jump_residual;      // per step
  double cell_measure = 0.0;
};

MacroS2Solution solve_macro_S2(const ProblemConfig& config, const S2Options& options = {});

struct MacroS3Solution {
  ProblemConfig config;
  LambdaSwitches lambda;
  TransientField u_l, u_r;
  std::vector<double> columns;            // x1 positions, endpoints +-kappa slaved to the bulk traces
  std::vector<double> column_widths;      // x1 extent owned by each column, 0 at the endpoints
  std::vector<double> rows;               // x2 positions
  std::vector<double> cell_centers;       // y2 finite-volume centers
  std::vector<double> cell_widths;
  std::vector<std::vector<bool>> active;  // [column][cell]
  // [level][column][row][cell], inactive cells hold NaN.
  std::vector<std::vector<std::vector<std::vector<double>>>> layer;
  std::vector<double> layer_average;
  std::vector<std::string> warnings;
};

MacroS3Solution solve_macro_S3S4(const ProblemConfig& config);

// Bulk meshes of the limit problems; the right one is the mirror image of the left.
TaggedMesh build_bulk_mesh_left(const ProblemConfig& config, double x_right, EdgeTag right_tag,
                                const std::vector<double>& y_lines);

}  // namespace tl
