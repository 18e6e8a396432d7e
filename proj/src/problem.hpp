#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drift.hpp"
#include "geometry.hpp"

namespace tl {

struct Diag2 {
  double d1 = 1.0;
  double d2 = 1.0;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// f(t, x)
using SpaceTimeFn = std::function<double(double, Point)>;
// f(t, x, y): layer data depending on the slow variable x and the cell variable y.
using TwoScaleFn = std::function<double(double, Point, Point)>;
// U(t, x2): Dirichlet data on a vertical boundary.
using BoundaryFn = std::function<double(double, double)>;

SpaceTimeFn zero_field();
TwoScaleFn zero_two_scale();
BoundaryFn constant_boundary(double c);

struct CoefficientSet {
  Diag2 D_L;
  Diag2 D_R;
  Vec2 B_L;
  Vec2 B_R;
  std::function<Diag2(Point)> D_M = [](Point) { return Diag2{}; };  // cell function of y
  std::function<Vec2(Point)> B_M = [](Point) { return Vec2{}; };

  // Smallest diagonal entry over D_L, D_R and D_M sampled on the cell.
  double theta() const;
};

struct SourceData {
  SpaceTimeFn f_l = zero_field();
  SpaceTimeFn f_r = zero_field();
  TwoScaleFn f_m = zero_two_scale();  // micro layer source, f_m^eps(t,x) = f_m(t, x, x/eps)
  SpaceTimeFn g_l = zero_field();     // outward physical flux on Gamma_h of the left bulk
  SpaceTimeFn g_r = zero_field();
  TwoScaleFn g_0 = zero_two_scale();  // outward flux on the obstacle boundaries (before eps^xi)
  SpaceTimeFn h_l = zero_field();     // initial data (time argument ignored)
  SpaceTimeFn h_r = zero_field();
  SpaceTimeFn h_m = zero_field();
  BoundaryFn U_L = constant_boundary(0.0);
  BoundaryFn U_R = constant_boundary(0.0);

  // Uses one profile for h_l, h_r and h_m.
  void set_initial_profile(const SpaceTimeFn& h);
};

struct ScalingExponents {
  double alpha = -1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double xi = 1.0;
};

// u_b(t,x) = ((x1 - ell/2)/ell) U_L(t,x2) - ((x1 + ell/2)/ell) U_R(t,x2).
class BoundaryLift {
 public:
  BoundaryLift() = default;
  BoundaryLift(double ell, BoundaryFn U_L, BoundaryFn U_R);

  double ell() const { return ell_; }
  double operator()(double t, Point x) const;
  Vec2 gradient(double t, Point x) const;
  double time_derivative(double t, Point x) const;
  // Second derivative in x2 (u_b is affine in x1).
  double d22(double t, Point x) const;

 private:
  double ell_ = 2.0;
  BoundaryFn U_L_ = constant_boundary(0.0);
  BoundaryFn U_R_ = constant_boundary(0.0);
};

double boundary_lift_eval(const BoundaryLift& lift, double t, Point x);

// Data of the transformed (homogeneous Dirichlet) problem, sign conventions as printed
// in the transformed system. Layer coefficients are evaluated at the cell point y and
// treated as locally constant when differentiating.
struct TransformedSources {
  SpaceTimeFn f_bl, f_br;
  TwoScaleFn f_am;  // d_t u_b + f_m
  TwoScaleFn f_bm;  // -div(D_M grad u_b)
  std::function<Vec2(double, Point, Point)> g_b0;  // -D_M grad u_b
  std::function<Vec2(double, Point)> g_bl;         // D_L grad u_b
  std::function<Vec2(double, Point)> g_br;         // D_R grad u_b
  SpaceTimeFn h_bl, h_br, h_bm;                    // h_i - u_b(0, .)
};

TransformedSources derive_transformed_sources(const BoundaryLift& lift, const CoefficientSet& coeffs,
                                              const SourceData& sources);

enum class ScalingChoice { S1, S2, S3, S4, Unclassified };

const char* scaling_choice_name(ScalingChoice c);
std::optional<ScalingChoice> parse_scaling_choice(const std::string& name);

ScalingChoice classify_scaling(const ScalingExponents& e);

struct LambdaSwitches {
  int lambda1 = 1;
  int lambda2 = 0;
};

// Switches of the fixed-width limit model; only meaningful for S3 and S4.
LambdaSwitches lambda_switches(ScalingChoice choice, const ScalingExponents& e);

struct DriftSpec {
  std::vector<double> coeffs{0.0};
  double delta = 0.1;
  int quadrature_nodes = 64;

  RegularizedDrift build() const { return RegularizedDrift(DriftPolynomial(coeffs), delta, quadrature_nodes); }
};

enum class DriftMode { Lagged, Picard };

struct TimeParams {
  double T = 1.0;
  double dt = 0.01;
  DriftMode drift_mode = DriftMode::Lagged;
  double tol_picard = 1e-10;
  int max_picard = 50;
  double tol_lin = 1e-10;
  int output_every = 0;  // snapshot every n steps (0: only the final state)

  int steps() const;
};

struct MeshParams {
  double target_edge = 0.05;       // micro and bulk meshes
  double cell_target_edge = 0.1;   // S1 cell mesh
  int n_sigma = 16;                // S1/S2 interface points
  int layer_columns = 12;          // S3/S4: approximate x1 columns across the layer, trace columns included
  int cell_line_cells = 32;        // S3/S4: finite volumes per unit of y2
  double tol_iface = 1e-8;
  int max_sweeps = 30;
};

struct ProblemConfig {
  LayerGeometry geometry;
  ScalingExponents scalings;
  CoefficientSet coefficients;
  SourceData sources;
  DriftSpec drift;
  TimeParams time;
  MeshParams mesh;
  bool allow_violations = false;

  BoundaryLift lift() const { return BoundaryLift(geometry.ell, sources.U_L, sources.U_R); }
};

struct Violation {
  std::string rule;
  std::string detail;
  bool warning = false;  // demoted violations do not block a run
};

std::vector<Violation> validate_assumptions(const ProblemConfig& config);

// Throws AssumptionViolation unless every blocking violation is acknowledged by allow_violations.
void require_assumptions(const ProblemConfig& config);

}  // namespace tl
