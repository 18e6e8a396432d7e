#pragma once

#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "drift.hpp"
#include "geometry.hpp"
#include "problem.hpp"

namespace tl {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Vertex-to-unknown map. Periodic identification merges vertices on y = y0 with
// their partners on y = y1.
struct DofMap {
  std::vector<int> vertex_to_dof;
  int num_dofs = 0;

  static DofMap identity(const TaggedMesh& mesh);
  static DofMap periodic_y(const TaggedMesh& mesh, double y0, double y1);

  int operator[](int vertex) const { return vertex_to_dof[static_cast<std::size_t>(vertex)]; }
  // Gathers nodal (per-vertex) values from a dof vector.
  std::vector<double> to_vertices(const Vec& dofs) const;
};

// Per-region scalar weight (scaling multipliers such as eps^alpha on Middle).
struct RegionWeights {
  double left = 1.0, middle = 1.0, right = 1.0, cell = 1.0;

  double operator()(Region r) const;
  static RegionWeights uniform(double w) { return {w, w, w, w}; }
};

using DiffusionField = std::function<Diag2(Region, Point)>;
using VectorField = std::function<Vec2(Region, Point)>;

DiffusionField constant_diffusion(Diag2 d);
VectorField constant_vector(Vec2 b);

// Three-point rule on triangles, barycentric (2/3,1/6,1/6) and permutations, weights 1/3.
inline constexpr std::array<std::array<double, 3>, 3> kTriangleRule = {{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                                                        {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                                                        {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}}};

struct TriangleGeometry {
  std::array<Point, 3> p;
  double area = 0.0;
  std::array<Vec2, 3> grad;  // gradients of the barycentric basis functions

  Point at(const std::array<double, 3>& bary) const;
};

TriangleGeometry triangle_geometry(const TaggedMesh& mesh, std::size_t t);

SpMat assemble_mass(const TaggedMesh& mesh, const DofMap& dofs, const RegionWeights& w);
SpMat assemble_stiffness(const TaggedMesh& mesh, const DofMap& dofs, const DiffusionField& D, const RegionWeights& w);

// Values at the three quadrature points of every triangle.
using QuadratureValues = std::vector<std::array<double, 3>>;

// P_delta(arg) at quadrature points, arg interpolated from per-vertex values.
QuadratureValues drift_at_quadrature(const TaggedMesh& mesh, const std::vector<double>& vertex_arg,
                                     const RegularizedDrift& drift);

// Entries sum_K w(K) int_K B P grad(phi_i).
Vec assemble_drift_load(const TaggedMesh& mesh, const DofMap& dofs, const VectorField& B, const QuadratureValues& p,
                        const RegionWeights& w);

// Entries scaling * int_tag g phi_i ds (two-point Gauss per edge).
Vec assemble_boundary_load(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Point)>& g,
                           EdgeTag tag, double scaling);

// Entries int_K w f phi_i.
Vec assemble_volume_load(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Region, Point)>& f,
                         const RegionWeights& w);

// One-dimensional mass matrix along the edges carrying `tag`.
SpMat assemble_edge_mass(const TaggedMesh& mesh, const DofMap& dofs, EdgeTag tag, double weight);

// Nodal interpolant (per dof; the first vertex mapped to each dof wins).
Vec interpolate(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Point)>& f);

// Factorized symmetric positive definite operator with residual-checked solves.
class SpdSolver {
 public:
  SpdSolver();
  explicit SpdSolver(const SpMat& a, double tol_lin = 1e-10);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Vec solve(const Vec& rhs) const;
  double last_relative_residual() const { return last_residual_; }
  int size() const { return static_cast<int>(a_.rows()); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SpMat a_;
  double tol_ = 1e-10;
  mutable double last_residual_ = 0.0;
};

Vec linear_solve(const SpMat& a, const Vec& rhs, double tol_lin = 1e-10);

// Implicit Euler operator (M/dt + A) with Dirichlet unknowns eliminated.
class TransientOperator {
 public:
  TransientOperator(SpMat mass, SpMat stiffness, std::vector<int> dirichlet_dofs, double dt, double tol_lin);

  int size() const { return static_cast<int>(mass_.rows()); }
  double dt() const { return dt_; }
  const SpMat& mass() const { return mass_; }
  const SpMat& stiffness() const { return stiffness_; }
  const std::vector<int>& dirichlet_dofs() const { return dirichlet_; }
  bool is_dirichlet(int dof) const { return is_dirichlet_[static_cast<std::size_t>(dof)]; }

  // Solves (M/dt + A) v = M v_prev/dt + load on free unknowns with v = dirichlet_values on constrained ones.
  Vec solve(const Vec& v_prev, const Vec& load, const Vec& dirichlet_values) const;
  // Solves (M/dt + A) v = rhs directly (rhs already contains the M v_prev/dt term).
  Vec solve_rhs(const Vec& rhs, const Vec& dirichlet_values) const;
  // (M/dt + A) v - M v_prev/dt - load, zeroed on constrained unknowns.
  Vec residual(const Vec& v, const Vec& v_prev, const Vec& load) const;
  double last_relative_residual() const { return solver_.last_relative_residual(); }

 private:
  SpMat mass_, stiffness_, system_, k_fd_;
  std::vector<int> dirichlet_;
  std::vector<bool> is_dirichlet_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  double dt_;
  SpdSolver solver_;
};

struct StepStats {
  int picard_iterations = 0;
  double residual = 0.0;
};

// Drift load N(v*) as a function of the current iterate.
using DriftLoadFn = std::function<Vec(const Vec&)>;

// Time series of per-vertex values on a mesh.
struct TransientField {
  std::shared_ptr<const TaggedMesh> mesh;
  std::vector<double> times;
  std::vector<std::vector<double>> values;

  std::size_t levels() const { return times.size(); }
};

// One implicit Euler step; lagged mode evaluates the drift at v_prev, picard mode iterates.
Vec time_step(const TransientOperator& op, const Vec& v_prev, const Vec& load, const DriftLoadFn& drift,
              DriftMode mode, const Vec& dirichlet_values, double tol_picard, int max_picard,
              StepStats* stats = nullptr);

}  // namespace tl
