#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "fixtures.hpp"
#include "macro.hpp"

using namespace tl;
using tl::testing::base_config;

namespace {

std::vector<double> time_grid(double dt, int steps) {
  std::vector<double> t;
  for (int n = 0; n <= steps; ++n) t.push_back(n * dt);
  return t;
}

// L2(Z) distance of a field on `coarse` to a field on `fine`, on the fine quadrature.
double cross_mesh_l2(const TaggedMesh& coarse, const std::vector<double>& uc, const TaggedMesh& fine,
                     const std::vector<double>& uf) {
  const PointLocator loc(coarse);
  double s = 0.0;
  for (std::size_t t = 0; t < fine.num_triangles(); ++t) {
    const TriangleGeometry g = triangle_geometry(fine, t);
    for (const auto& b : kTriangleRule) {
      double vf = 0.0;
      for (int k = 0; k < 3; ++k) vf += b[k] * uf[static_cast<std::size_t>(fine.triangles[t][k])];
      const auto hit = loc.locate(g.at(b));
      REQUIRE(hit.has_value());
      double vc = 0.0;
      for (int k = 0; k < 3; ++k)
        vc += hit->bary[k] * uc[static_cast<std::size_t>(coarse.triangles[static_cast<std::size_t>(hit->triangle)][k])];
      s += g.area / 3.0 * (vf - vc) * (vf - vc);
    }
  }
  return std::sqrt(s);
}

double max_abs(const TransientField& f) {
  double m = 0.0;
  for (const auto& l : f.values)
    for (double v : l) m = std::max(m, std::abs(v));
  return m;
}

ProblemConfig fixed_width(ScalingExponents e) {
  ProblemConfig c = base_config(0.25);
  c.geometry.width_mode = WidthMode::Fixed;
  c.geometry.kappa_fixed = 0.5;
  c.scalings = e;
  c.mesh.cell_line_cells = 16;
  c.mesh.layer_columns = 8;
  return c;
}

// Trapezoid-in-x2, column-width-in-x1, cell-width-in-y2 L2 norm over (0,T) x Omega_M x Y.
double layer_l2_difference(const MacroS3Solution& a, const MacroS3Solution& b) {
  double s = 0.0;
  for (std::size_t n = 1; n < a.layer.size(); ++n) {
    const double dt = a.u_l.times[n] - a.u_l.times[n - 1];
    for (std::size_t i = 0; i < a.columns.size(); ++i)
      for (std::size_t k = 0; k < a.rows.size(); ++k) {
        const double dy = 0.5 * ((k + 1 < a.rows.size() ? a.rows[k + 1] : a.rows[k]) - (k > 0 ? a.rows[k - 1] : a.rows[k]));
        for (std::size_t c = 0; c < a.cell_centers.size(); ++c) {
          if (!a.active[i][c]) continue;
          const double d = a.layer[n][i][k][c] - b.layer[n][i][k][c];
          s += dt * a.column_widths[i] * dy * a.cell_widths[c] * d * d;
        }
      }
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("cell problem keeps a constant state") {
  const StandardCell cell = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  const CellOperator op(cell, [](Point) { return Diag2{1, 1}; }, 0.1, 0.05, 1e-12);
  const auto times = time_grid(0.05, 10);
  const TransientField w = solve_cell_problem_S1(op, std::vector<double>(11, 0.4), std::vector<double>(11, 0.4),
                                                 [](double, Point) { return 0.0; }, [](Point) { return 0.4; }, times);
  for (const auto& l : w.values)
    for (double v : l) CHECK(std::abs(v - 0.4) < 1e-12);
  const CellOperator::Fluxes f = op.fluxes(op.constant_state(0.4), op.constant_state(0.4), op.load([](Point) { return 0.0; }));
  CHECK(std::abs(f.in_left) < 1e-12);
  CHECK(std::abs(f.out_right) < 1e-12);
}

TEST_CASE("cell problem steady linear profile") {
  const CellOperator op(empty_standard_cell(), [](Point) { return Diag2{1, 1}; }, 0.1, 1e6, 1e-12);
  const auto times = time_grid(1e6, 3);
  const TransientField w = solve_cell_problem_S1(op, {0, 0, 0, 0}, {1, 1, 1, 1}, [](double, Point) { return 0.0; },
                                                 [](Point) { return 0.0; }, times);
  double dev = 0.0;
  for (std::size_t v = 0; v < w.mesh->num_vertices(); ++v) {
    dev = std::max(dev, std::abs(w.values.back()[v] - 0.5 * (1.0 + w.mesh->vertices[v].x)));
  }
  CHECK(dev < 1e-8);
  // Flux of the steady profile: D d/dy1 ((1+y1)/2) over a unit-length edge.
  const Vec state = op.combine(op.homogeneous_step(op.constant_state(0.0), op.load([](Point) { return 0.0; })), 0.0, 1.0);
  CHECK(op.c_ll() > 0.0);
  CHECK(op.measure() == doctest::Approx(2.0));
  (void)state;
}

TEST_CASE("cell problem self-convergence with an obstacle") {
  const StandardCell cell = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  auto steady = [&](double h) {
    const CellOperator op(cell, [](Point) { return Diag2{1, 1}; }, h, 1e6, 1e-12);
    return solve_cell_problem_S1(op, {0, 0, 0}, {0, 0, 0}, [](double, Point) { return 1.0; }, [](Point) { return 0.0; },
                                 time_grid(1e6, 2));
  };
  const TransientField c = steady(0.1), m = steady(0.05), f = steady(0.025);
  const double ec = cross_mesh_l2(*c.mesh, c.values.back(), *f.mesh, f.values.back());
  const double em = cross_mesh_l2(*m.mesh, m.values.back(), *f.mesh, f.values.back());
  MESSAGE("coarse/fine " << ec << ", medium/fine " << em);
  CHECK(ec < 0.5 * 0.1 * 0.1);
  CHECK(em < ec / 2.5);
}

TEST_CASE("S1 with zero data") {
  ProblemConfig c = base_config();
  c.drift.delta = 0.0;
  const MacroS1Solution s = solve_macro_S1(c);
  CHECK(max_abs(s.u_l) == 0.0);
  CHECK(max_abs(s.u_r) == 0.0);
  for (const auto& level : s.cells)
    for (const auto& seg : level)
      for (double v : seg) CHECK(v == 0.0);
}

TEST_CASE("S1 constant state") {
  ProblemConfig c = base_config();
  c.sources.U_L = c.sources.U_R = constant_boundary(3.0);
  c.sources.set_initial_profile([](double, Point) { return 3.0; });
  const MacroS1Solution s = solve_macro_S1(c);
  for (const auto& level : s.cells)
    for (const auto& seg : level)
      for (double v : seg) CHECK(std::abs(v - 3.0) < 1e-10);
  for (const auto& l : s.u_l.values)
    for (double v : l) CHECK(std::abs(v - 3.0) < 1e-10);
  CHECK(s.max_flux_residual < 1e-10);
  for (double a : s.layer_average) CHECK(a == doctest::Approx(3.0));
}

TEST_CASE("S1 reflection symmetry") {
  ProblemConfig c = base_config();
  c.sources.U_L = c.sources.U_R = constant_boundary(1.0);
  c.sources.f_l = [](double, Point x) { return std::exp(-8.0 * ((x.x + 0.5) * (x.x + 0.5) + (x.y - 0.3) * (x.y - 0.3))); };
  c.sources.f_r = [](double, Point x) { return std::exp(-8.0 * ((x.x - 0.5) * (x.x - 0.5) + (x.y - 0.3) * (x.y - 0.3))); };
  c.sources.f_m = [](double, Point, Point y) { return 1.0 + y.y; };
  const MacroS1Solution s = solve_macro_S1(c);
  const TaggedMesh& ml = *s.u_l.mesh;
  const TaggedMesh& mr = *s.u_r.mesh;
  REQUIRE(ml.num_vertices() == mr.num_vertices());
  const PointLocator loc(mr);
  double dev = 0.0;
  for (std::size_t v = 0; v < ml.num_vertices(); ++v) {
    const Point p{-ml.vertices[v].x, ml.vertices[v].y};
    const auto hit = loc.locate(p);
    REQUIRE(hit.has_value());
    double ur = 0.0;
    for (int k = 0; k < 3; ++k)
      ur += hit->bary[k] * s.u_r.values.back()[static_cast<std::size_t>(mr.triangles[static_cast<std::size_t>(hit->triangle)][k])];
    dev = std::max(dev, std::abs(s.u_l.values.back()[v] - ur));
  }
  CHECK(dev < 1e-8);
  CHECK(max_abs(s.u_l) > 0.1);
}

TEST_CASE("S1 interface residuals") {
  const MacroS1Solution s = solve_macro_S1(tl::testing::smooth_s1(0.25));
  CHECK(s.max_matching_residual <= 10 * s.config.mesh.tol_iface);
  CHECK(s.max_flux_residual <= 10 * s.config.mesh.tol_iface);
  for (const S1StepDiagnostics& d : s.diagnostics) CHECK(d.sweeps <= s.config.mesh.max_sweeps);
  CHECK(s.sigma_points.size() == static_cast<std::size_t>(s.config.mesh.n_sigma));
}

TEST_CASE("S1 refuses other scalings") {
  ProblemConfig c = base_config();
  c.scalings = {-1.0, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(solve_macro_S1(c), Error);
}

TEST_CASE("S2 decoupled interface ODE") {
  ProblemConfig c = base_config();
  c.scalings = {-1.0, 0.5, 0.5, 0.0};
  c.sources.f_m = [](double, Point, Point) { return 0.8; };
  c.sources.h_m = [](double, Point) { return 0.3; };
  S2Options opt;
  opt.decoupled_interface = true;
  const MacroS2Solution s = solve_macro_S2(c, opt);
  for (std::size_t n = 0; n < s.sigma_values.size(); ++n)
    for (double v : s.sigma_values[n]) CHECK(std::abs(v - (0.3 + 0.8 * s.u.times[n])) < 1e-10);
}

TEST_CASE("S2 zero data") {
  ProblemConfig c = base_config();
  c.scalings = {-1.0, 0.5, 0.5, 0.0};
  c.drift.delta = 0.0;
  const MacroS2Solution s = solve_macro_S2(c);
  CHECK(max_abs(s.u) == 0.0);
}

TEST_CASE("S2 steady two-slab transmission") {
  ProblemConfig c = base_config();
  c.scalings = {-1.0, 0.5, 0.5, 0.0};
  c.coefficients.D_L = {1.0, 1.0};
  c.coefficients.D_R = {0.25, 0.25};
  c.sources.U_L = constant_boundary(1.0);
  c.sources.U_R = constant_boundary(0.2);
  c.time.T = 1e8;
  c.time.dt = 1e7;
  const MacroS2Solution s = solve_macro_S2(c);
  const double expected = (1.0 * 1.0 + 0.25 * 0.2) / (1.0 + 0.25);
  for (double v : s.sigma_values.back()) CHECK(std::abs(v - expected) < 1e-6);
  for (double r : s.jump_residual) CHECK(r <= 10 * c.mesh.tol_iface);
}

TEST_CASE("S2 interface value under shrinking obstacles") {
  auto run = [](StandardCell cell) {
    ProblemConfig c = base_config();
    c.scalings = {-1.0, 0.5, 0.5, 0.0};
    c.geometry.cell = cell;
    c.sources.U_L = c.sources.U_R = constant_boundary(1.0);
    c.time.T = 0.2;
    return solve_macro_S2(c).sigma_values.back()[4];
  };
  const double limit = run(empty_standard_cell());
  std::vector<double> gaps;
  for (double s : {0.8, 0.4, 0.1}) gaps.push_back(std::abs(run(build_standard_cell(-s, s, 0.5 - s / 2, 0.5 + s / 2)) - limit));
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
  CHECK(gaps[2] < 0.05 * gaps[0]);
}

TEST_CASE("fixed-width model, pure time integration") {
  ProblemConfig c = fixed_width({0.0, 3.0, 2.0, 1.0});
  REQUIRE(classify_scaling(c.scalings) == ScalingChoice::S4);
  c.sources.f_m = [](double, Point, Point) { return 0.6; };
  c.sources.h_m = [](double, Point x) { return 0.1 + 0.2 * x.y; };
  const MacroS3Solution s = solve_macro_S3S4(c);
  CHECK(s.lambda.lambda1 == 0);
  CHECK(s.lambda.lambda2 == 0);
  CHECK(std::any_of(s.warnings.begin(), s.warnings.end(),
                    [](const std::string& w) { return w.find("DegenerateCellOperator") != std::string::npos; }));
  const std::size_t last = s.layer.size() - 1;
  const double t = s.u_l.times[last];
  for (std::size_t i = 1; i + 1 < s.columns.size(); ++i)
    for (std::size_t k = 0; k < s.rows.size(); ++k)
      for (std::size_t cc = 0; cc < s.cell_centers.size(); ++cc) {
        if (!s.active[i][cc]) continue;
        CHECK(std::abs(s.layer[last][i][k][cc] - (0.1 + 0.2 * s.rows[k] + 0.6 * t)) < 1e-12);
      }
}

TEST_CASE("fixed-width model without obstacle stays constant in y2") {
  ProblemConfig c = fixed_width({0.0, 2.0, 2.0, 1.0});
  c.geometry.cell = empty_standard_cell();
  c.sources.f_m = [](double, Point, Point) { return 1.0; };
  c.sources.f_l = [](double, Point) { return 0.5; };
  const MacroS3Solution s = solve_macro_S3S4(c);
  CHECK(s.lambda.lambda1 == 1);
  CHECK(s.lambda.lambda2 == 0);
  for (const auto& level : s.layer)
    for (std::size_t i = 0; i < s.columns.size(); ++i)
      for (const auto& row : level[i]) {
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        CHECK(*hi - *lo < 1e-10);
      }
}

TEST_CASE("fixed-width model, drift switch stays within the energy bound") {
  ProblemConfig on = fixed_width({0.0, 2.0, 1.0, 1.0});
  on.coefficients.B_M = [](Point) { return Vec2{0.0, 0.5}; };
  on.sources.h_m = [](double, Point x) { return 0.5 + 0.25 * std::sin(6.0 * x.y); };
  ProblemConfig off = on;
  off.scalings = {0.0, 2.0, 2.0, 1.0};
  const MacroS3Solution a = solve_macro_S3S4(on), b = solve_macro_S3S4(off);
  REQUIRE(a.lambda.lambda2 == 1);
  REQUIRE(b.lambda.lambda2 == 0);
  const double diff = layer_l2_difference(a, b);
  const double sup_p = on.drift.build().polynomial().sup_abs_on_unit_interval();
  const double measure = 2.0 * on.geometry.kappa() * on.geometry.h * cell_measure(on.geometry.cell) / 2.0;
  const double bound = on.time.T * 0.5 * sup_p * std::sqrt(measure);
  MESSAGE("drift on/off difference " << diff << ", bound " << bound);
  CHECK(diff > 0.0);
  CHECK(diff <= bound);
}

TEST_CASE("fixed-width model needs fixed width") {
  ProblemConfig c = base_config();
  c.scalings = {0.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(solve_macro_S3S4(c), Error);
}
