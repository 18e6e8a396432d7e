#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tl {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains_strictly(Point p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
};

// Reference cell Z = Y \ Y0 with Y = (-1,1) x (0,1) and obstacle Y0 = [a1,b1] x [a2,b2].
class StandardCell {
 public:
  StandardCell() = default;

  double a1() const { return a1_; }
  double b1() const { return b1_; }
  double a2() const { return a2_; }
  double b2() const { return b2_; }
  bool has_obstacle() const { return has_obstacle_; }
  double obstacle_area() const { return has_obstacle_ ? (b1_ - a1_) * (b2_ - a2_) : 0.0; }

  friend StandardCell build_standard_cell(double a1, double b1, double a2, double b2);
  friend StandardCell empty_standard_cell();

 private:
  double a1_ = -0.5, b1_ = 0.5, a2_ = 0.25, b2_ = 0.75;
  bool has_obstacle_ = true;
};

StandardCell build_standard_cell(double a1, double b1, double a2, double b2);

// Cell without obstacle (Z = Y); used for the un-perforated verification problems.
StandardCell empty_standard_cell();

// |Z| = 2 - (b1-a1)(b2-a2).
double cell_measure(const StandardCell& cell);

enum class WidthMode { Vanishing, Fixed };

struct LayerGeometry {
  double ell = 2.0;
  double h = 1.0;
  double eps = 0.25;
  WidthMode width_mode = WidthMode::Vanishing;
  double kappa_fixed = 0.5;  // used when width_mode == Fixed
  StandardCell cell;

  double kappa() const { return width_mode == WidthMode::Vanishing ? eps : kappa_fixed; }
  // h/eps rounded; validity is checked by period_count_checked.
  int period_count() const;
  int period_count_checked() const;
  std::vector<Rect> obstacles() const;
};

enum class EdgeTag { GammaL, GammaR, GammaH, Gamma0, BL, BR, ZL, ZR, CellObstacle, CellOuter };
enum class Region { Left, Middle, Right, Cell };

inline constexpr std::array<EdgeTag, 10> kAllEdgeTags = {
    EdgeTag::GammaL, EdgeTag::GammaR, EdgeTag::GammaH,       EdgeTag::Gamma0,   EdgeTag::BL,
    EdgeTag::BR,     EdgeTag::ZL,     EdgeTag::ZR,           EdgeTag::CellObstacle, EdgeTag::CellOuter};

const char* edge_tag_name(EdgeTag tag);
const char* region_name(Region region);
std::optional<EdgeTag> parse_edge_tag(const std::string& name);
std::optional<Region> parse_region(const std::string& name);

// Interface tags mark internal edges shared by two triangles.
inline bool is_interface_tag(EdgeTag tag) { return tag == EdgeTag::BL || tag == EdgeTag::BR; }

// Polygonal description of an axis-aligned rectangle with rectangular holes.
struct DomainDescription {
  Rect outer;
  std::vector<Rect> holes;
  std::vector<std::pair<double, EdgeTag>> interfaces;  // internal vertical lines x = c
  std::vector<double> x_lines;                         // extra vertical grid lines (untagged)
  std::vector<double> y_lines;                         // extra horizontal grid lines (untagged)

  EdgeTag left_tag = EdgeTag::GammaL;
  EdgeTag right_tag = EdgeTag::GammaR;
  EdgeTag horizontal_tag = EdgeTag::GammaH;
  EdgeTag layer_horizontal_tag = EdgeTag::Gamma0;  // outer horizontal edges with x in (middle_x0, middle_x1)
  EdgeTag hole_tag = EdgeTag::Gamma0;

  // Triangles with centroid x < middle_x0 are Left, > middle_x1 Right, otherwise Middle.
  double middle_x0 = 0.0;
  double middle_x1 = 0.0;
  bool single_region_cell = false;

  // Largest admissible target edge length.
  double max_target_edge = 0.0;
};

DomainDescription build_micro_domain(const LayerGeometry& geom);
DomainDescription cell_domain(const StandardCell& cell);
// Plain rectangle tagged GammaL/GammaR/GammaH (all triangles Left unless centered on 0).
DomainDescription rectangle_domain(const Rect& r);

struct TaggedEdge {
  int v0 = 0;
  int v1 = 0;
  EdgeTag tag = EdgeTag::GammaH;
};

struct TaggedMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Region> regions;
  std::vector<TaggedEdge> edges;  // boundary edges plus internal interface edges

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double triangle_area(std::size_t t) const;
  double total_area() const;
  double region_area(Region r) const;
  double tag_length(EdgeTag tag) const;
  bool has_tag(EdgeTag tag) const;
  std::vector<int> tag_vertices(EdgeTag tag) const;  // sorted, unique
  std::vector<int> boundary_vertices() const;        // vertices on non-interface tagged edges

  // Checks conformity, orientation and edge multiplicity. Returns a description
  // of the first violation, or an empty string.
  std::string check_invariants() const;
};

// Deterministic feature-aligned triangulation of a rectangle-with-holes domain.
TaggedMesh triangulate(const DomainDescription& domain, double target_edge);

// Mirror image x -> -x (keeps counter-clockwise orientation, swaps Left/Right and GammaL/GammaR, BL/BR).
TaggedMesh mirror_mesh(const TaggedMesh& mesh);

void write_mesh(std::ostream& os, const TaggedMesh& mesh);
TaggedMesh read_mesh(std::istream& is);
void write_tag_statistics_csv(std::ostream& os, const TaggedMesh& mesh);

// Bucketed point location on a triangle mesh.
class PointLocator {
 public:
  explicit PointLocator(const TaggedMesh& mesh);

  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };

  // Returns the containing triangle (tolerant to points on edges), if any.
  std::optional<Hit> locate(Point p) const;

 private:
  const TaggedMesh* mesh_;
  double x0_ = 0, y0_ = 0, dx_ = 1, dy_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace tl
