#include <doctest.h>

#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "geometry.hpp"

using namespace tl;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

LayerGeometry strip(double eps, WidthMode mode = WidthMode::Vanishing, double kappa = 0.5) {
  LayerGeometry g;
  g.ell = 2.0;
  g.h = 1.0;
  g.eps = eps;
  g.width_mode = mode;
  g.kappa_fixed = kappa;
  g.cell = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  return g;
}

}  // namespace

TEST_CASE("standard cell validation") {
  const StandardCell c = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  CHECK(c.has_obstacle());
  CHECK(c.a1() == -0.5);
  CHECK(c.b2() == 0.75);
  CHECK(code_of([] { build_standard_cell(-0.5, 0.5, 0.0, 0.75); }) == ErrorCode::ObstacleTouchesBoundary);
  CHECK(code_of([] { build_standard_cell(0.5, -0.5, 0.25, 0.75); }) == ErrorCode::DegenerateObstacle);
  CHECK(code_of([] { build_standard_cell(-1.0, 0.5, 0.25, 0.75); }) == ErrorCode::ObstacleTouchesBoundary);
  CHECK(code_of([] { build_standard_cell(-0.5, 0.5, 0.5, 0.5); }) == ErrorCode::DegenerateObstacle);
}

TEST_CASE("cell measure") {
  CHECK(cell_measure(build_standard_cell(-0.5, 0.5, 0.25, 0.75)) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(cell_measure(build_standard_cell(-0.01, 0.01, 0.49, 0.51)) == doctest::Approx(1.9996).epsilon(1e-14));
  CHECK(cell_measure(build_standard_cell(-0.9, 0.9, 0.05, 0.95)) == doctest::Approx(0.38).epsilon(1e-14));
  CHECK(cell_measure(empty_standard_cell()) == 2.0);
}

TEST_CASE("micro domain holes, vanishing width") {
  const LayerGeometry g = strip(0.25);
  const DomainDescription d = build_micro_domain(g);
  REQUIRE(d.holes.size() == 4);
  for (const Rect& r : d.holes) {
    CHECK(r.width() == doctest::Approx(0.25));
    CHECK(r.height() == doctest::Approx(0.125));
  }
  REQUIRE(d.interfaces.size() == 2);
  CHECK(d.interfaces[0].first == doctest::Approx(-0.25));
  CHECK(d.interfaces[0].second == EdgeTag::BL);
  CHECK(d.interfaces[1].first == doctest::Approx(0.25));
  CHECK(d.interfaces[1].second == EdgeTag::BR);
  CHECK(d.hole_tag == EdgeTag::Gamma0);
}

TEST_CASE("micro domain holes, fixed width") {
  const DomainDescription d = build_micro_domain(strip(0.25, WidthMode::Fixed, 0.5));
  REQUIRE(d.holes.size() == 4);
  for (int k = 0; k < 4; ++k) {
    // Enumerated directly: x1 in 0.5*[a1,b1], x2 in 0.25*[k+a2, k+b2].
    const Rect& r = d.holes[static_cast<std::size_t>(k)];
    CHECK(r.x0 == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(r.x1 == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.y0 == doctest::Approx(0.25 * (k + 0.25)).epsilon(1e-14));
    CHECK(r.y1 == doctest::Approx(0.25 * (k + 0.75)).epsilon(1e-14));
  }
}

TEST_CASE("micro domain errors") {
  CHECK(code_of([] { build_micro_domain(strip(0.3)); }) == ErrorCode::NonIntegerPeriodCount);
  CHECK(code_of([] { build_micro_domain(strip(0.25, WidthMode::Fixed, 1.0)); }) == ErrorCode::LayerTooWide);
  CHECK(code_of([] { triangulate(build_micro_domain(strip(0.25)), 0.6); }) == ErrorCode::FeatureUnderresolved);
}

TEST_CASE("unit square triangulation") {
  const TaggedMesh m = triangulate(rectangle_domain(Rect{0, 1, 0, 1}), 0.5);
  CHECK(m.check_invariants().empty());
  CHECK(m.num_triangles() >= 8);
  CHECK(std::abs(m.total_area() - 1.0) < 1e-12);
  CHECK(m.tag_length(EdgeTag::GammaL) == doctest::Approx(1.0));
  CHECK(m.tag_length(EdgeTag::GammaH) == doctest::Approx(2.0));
}

TEST_CASE("cell mesh area equals |Z|") {
  const StandardCell c = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  const TaggedMesh m = triangulate(cell_domain(c), 0.1);
  CHECK(m.check_invariants().empty());
  CHECK(std::abs(m.total_area() - cell_measure(c)) < 1e-10);
  CHECK(m.tag_length(EdgeTag::ZL) == doctest::Approx(1.0));
  CHECK(m.tag_length(EdgeTag::CellObstacle) == doctest::Approx(3.0));
  // At least 8 boundary edges around the hole.
  int hole_edges = 0;
  for (const TaggedEdge& e : m.edges) hole_edges += e.tag == EdgeTag::CellObstacle;
  CHECK(hole_edges >= 8);
}

TEST_CASE("strip partition and layer area") {
  for (const LayerGeometry& g : {strip(0.25), strip(0.125), strip(0.25, WidthMode::Fixed, 0.5)}) {
    const TaggedMesh m = triangulate(build_micro_domain(g), std::min(0.05, g.kappa()));
    CHECK(m.check_invariants().empty());
    double holes = 0.0;
    for (const Rect& r : g.obstacles()) holes += r.area();
    const double total = m.region_area(Region::Left) + m.region_area(Region::Middle) + m.region_area(Region::Right);
    CHECK(std::abs(total + holes - g.ell * g.h) < 1e-10);
    const double k = g.kappa();
    const double layer = 2.0 * k * g.h - (g.h / g.eps) * k * 1.0 * g.eps * 0.5;
    CHECK(std::abs(m.region_area(Region::Middle) - layer) < 1e-10);
    if (g.width_mode == WidthMode::Vanishing) {
      CHECK(std::abs(m.region_area(Region::Middle) - g.eps * g.h * cell_measure(g.cell)) < 1e-10);
    }
    int hole_edges = 0;
    for (const TaggedEdge& e : m.edges) hole_edges += e.tag == EdgeTag::Gamma0;
    CHECK(hole_edges >= 8 * static_cast<int>(g.obstacles().size()));
  }
}

TEST_CASE("tag lengths are refinement invariant") {
  const DomainDescription d = build_micro_domain(strip(0.25));
  const TaggedMesh coarse = triangulate(d, 0.1);
  const TaggedMesh fine = triangulate(d, 0.05);
  for (EdgeTag tag : kAllEdgeTags) {
    CHECK(std::abs(coarse.tag_length(tag) - fine.tag_length(tag)) < 1e-10);
  }
  CHECK(coarse.tag_length(EdgeTag::BL) == doctest::Approx(1.0));
}

TEST_CASE("interfaces are unions of mesh edges") {
  const TaggedMesh m = triangulate(build_micro_domain(strip(0.125)), 0.05);
  for (const TaggedEdge& e : m.edges) {
    if (!is_interface_tag(e.tag)) continue;
    const double x = e.tag == EdgeTag::BL ? -0.125 : 0.125;
    CHECK(std::abs(m.vertices[static_cast<std::size_t>(e.v0)].x - x) < 1e-14);
    CHECK(std::abs(m.vertices[static_cast<std::size_t>(e.v1)].x - x) < 1e-14);
  }
}

TEST_CASE("mesh round trip and mirror") {
  const TaggedMesh m = triangulate(build_micro_domain(strip(0.25)), 0.1);
  std::stringstream ss;
  write_mesh(ss, m);
  const TaggedMesh r = read_mesh(ss);
  CHECK(r.num_vertices() == m.num_vertices());
  CHECK(r.num_triangles() == m.num_triangles());
  CHECK(r.edges.size() == m.edges.size());
  CHECK(r.total_area() == doctest::Approx(m.total_area()).epsilon(1e-12));
  CHECK(r.check_invariants().empty());

  const TaggedMesh mm = mirror_mesh(m);
  CHECK(mm.check_invariants().empty());
  CHECK(mm.region_area(Region::Left) == doctest::Approx(m.region_area(Region::Right)));
  CHECK(mm.tag_length(EdgeTag::GammaL) == doctest::Approx(m.tag_length(EdgeTag::GammaR)));

  std::stringstream bad("not a mesh");
  CHECK_THROWS_AS(read_mesh(bad), Error);
}

TEST_CASE("point location") {
  const TaggedMesh m = triangulate(build_micro_domain(strip(0.25)), 0.1);
  const PointLocator loc(m);
  for (Point p : {Point{-0.9, 0.1}, Point{0.0, 0.05}, Point{0.7, 0.99}, Point{-0.25, 0.5}}) {
    const auto hit = loc.locate(p);
    REQUIRE(hit.has_value());
    const auto& tri = m.triangles[static_cast<std::size_t>(hit->triangle)];
    double x = 0, y = 0, s = 0;
    for (int k = 0; k < 3; ++k) {
      x += hit->bary[k] * m.vertices[static_cast<std::size_t>(tri[k])].x;
      y += hit->bary[k] * m.vertices[static_cast<std::size_t>(tri[k])].y;
      s += hit->bary[k];
    }
    CHECK(s == doctest::Approx(1.0));
    CHECK(x == doctest::Approx(p.x));
    CHECK(y == doctest::Approx(p.y));
  }
  // Inside an obstacle and outside the strip.
  CHECK_FALSE(loc.locate(Point{0.0, 0.125}).has_value());
  CHECK_FALSE(loc.locate(Point{1.5, 0.5}).has_value());
}

TEST_CASE("tag names round trip") {
  for (EdgeTag t : kAllEdgeTags) CHECK(parse_edge_tag(edge_tag_name(t)) == t);
  CHECK_FALSE(parse_edge_tag("nope").has_value());
  CHECK(parse_region(region_name(Region::Middle)) == Region::Middle);
}
