#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "fixtures.hpp"
#include "micro.hpp"

using namespace tl;
using tl::testing::base_config;

namespace {

double max_abs(const std::vector<std::vector<double>>& levels) {
  double m = 0.0;
  for (const auto& l : levels)
    for (double v : l) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("zero data gives the zero solution") {
  ProblemConfig c = base_config();
  c.drift.delta = 0.0;  // the mollified drift does not vanish at 0
  const MicroSolution s = solve_micro(c);
  CHECK(s.v.levels() == 6);
  CHECK(max_abs(s.v.values) == 0.0);
  CHECK(max_abs(s.u.values) == 0.0);
  const EnergyReport e = energy_report(s, s.config.scalings);
  CHECK(e.e1 == 0.0);
  CHECK(e.e2 == 0.0);
  CHECK(e.e3 == 0.0);
  CHECK(e.e4 == 0.0);
}

TEST_CASE("compatible constant data is preserved") {
  for (DriftMode mode : {DriftMode::Lagged, DriftMode::Picard}) {
    ProblemConfig c = base_config();
    c.time.drift_mode = mode;
    c.sources.U_L = c.sources.U_R = constant_boundary(0.7);
    c.sources.set_initial_profile([](double, Point) { return 0.7; });
    const MicroSolution s = solve_micro(c);
    for (const auto& level : s.u.values)
      for (double v : level) CHECK(std::abs(v - 0.7) < 1e-9);
  }
}

TEST_CASE("Dirichlet exactness, transmission and residuals") {
  ProblemConfig c = tl::testing::smooth_s1(0.25);
  c.time.T = 0.1;
  const MicroSolution s = solve_micro(c);
  const TaggedMesh& m = *s.mesh;
  std::vector<int> dir = m.tag_vertices(EdgeTag::GammaL);
  const std::vector<int> right = m.tag_vertices(EdgeTag::GammaR);
  dir.insert(dir.end(), right.begin(), right.end());
  for (const auto& level : s.v.values)
    for (int v : dir) CHECK(level[static_cast<std::size_t>(v)] == 0.0);
  // Physical boundary values recover the Dirichlet data.
  for (int v : m.tag_vertices(EdgeTag::GammaL)) CHECK(s.u.values.back()[static_cast<std::size_t>(v)] == doctest::Approx(1.0));
  REQUIRE(s.diagnostics.size() == 5);
  for (const StepDiagnostics& d : s.diagnostics) {
    CHECK(d.residual <= c.time.tol_lin);
    CHECK(d.flux_jump <= 10.0 * c.time.tol_lin);
  }
  // The initial level is the interpolated initial data away from the Dirichlet nodes.
  std::vector<bool> constrained(m.num_vertices(), false);
  for (int v : dir) constrained[static_cast<std::size_t>(v)] = true;
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    if (!constrained[v]) CHECK(s.u.values.front()[v] == 0.0);
  }
  const auto avg = layer_average_series(s);
  CHECK(avg.size() == s.u.levels());
  CHECK(avg.back() > 0.0);
}

TEST_CASE("energy of a constant transformed field") {
  MicroSolution s;
  s.config = base_config(0.25);
  s.mesh = std::make_shared<const TaggedMesh>(build_micro_mesh(s.config));
  const std::size_t nv = s.mesh->num_vertices();
  s.v.mesh = s.u.mesh = s.mesh;
  s.v.times = s.u.times = {0.0, 0.1};
  s.v.values = {std::vector<double>(nv, 1.0), std::vector<double>(nv, 1.0)};
  s.u.values = {std::vector<double>(nv, 5.0), std::vector<double>(nv, 5.0)};
  const EnergyReport e = energy_report(s, s.config.scalings);
  const TaggedMesh& m = *s.mesh;
  const double expected = m.region_area(Region::Left) + m.region_area(Region::Right) +
                          std::pow(0.25, -1.0) * m.region_area(Region::Middle);
  CHECK(e.e1 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(e.e2) < 1e-12);
  CHECK(e.e3 == 0.0);
  CHECK(e.e4 == 0.0);  // u = 5 is outside the drift support
  const auto series = energy_series(s, s.config.scalings);
  CHECK(series.size() == 2);
  CHECK(series.back().e1 == doctest::Approx(e.e1));
}

TEST_CASE("manufactured solution converges in space and time") {
  const tl::testing::Manufactured space{true};
  std::vector<double> es;
  for (double hm : {0.1, 0.05, 0.025}) {
    const MicroSolution s = solve_micro(space.config(hm, 0.05, 0.2));
    es.push_back(tl::testing::nodal_l2_error(*s.mesh, s.u.values.back(),
                                             [&](Point x) { return space.exact(0.2, x); }));
  }
  CHECK(es[0] > es[1]);
  CHECK(es[1] > es[2]);
  MESSAGE("spatial order " << std::log2(es[1] / es[2]));
  CHECK(std::abs(std::log2(es[1] / es[2]) - 2.0) < 0.4);

  const tl::testing::Manufactured time{false};
  std::vector<double> et;
  for (double dt : {0.1, 0.05, 0.025}) {
    const MicroSolution s = solve_micro(time.config(0.1, dt, 0.4));
    et.push_back(tl::testing::nodal_l2_error(*s.mesh, s.u.values.back(),
                                             [&](Point x) { return time.exact(0.4, x); }));
  }
  CHECK(et[0] > et[1]);
  CHECK(et[1] > et[2]);
  MESSAGE("temporal order " << std::log2(et[1] / et[2]));
  CHECK(std::abs(std::log2(et[1] / et[2]) - 1.0) < 0.3);
}

TEST_CASE("layer cell coordinates") {
  LayerGeometry g;
  g.eps = 0.25;
  const Point y = layer_cell_coordinates(g, Point{0.125, 0.3});
  CHECK(y.x == doctest::Approx(0.5));
  CHECK(y.y == doctest::Approx(0.2));
}

TEST_CASE("violations stop the run unless acknowledged") {
  ProblemConfig c = base_config();
  c.scalings = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(solve_micro(c), Error);
  c.allow_violations = true;
  CHECK_NOTHROW(solve_micro(c));
}
