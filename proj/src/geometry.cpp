#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "errors.hpp"

namespace tl {

namespace {

constexpr double kCoordTol = 1e-12;

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || std::abs(x - out.back()) > kCoordTol * (1.0 + std::abs(x))) out.push_back(x);
  }
  return out;
}

// Subdivides each breakpoint interval into max(2, ceil(len/target)) uniform pieces.
// Returns the grid coordinates; breakpoints are reproduced exactly.
std::vector<double> subdivide(const std::vector<double>& breaks, double target) {
  std::vector<double> grid;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    const int n = std::max(2, static_cast<int>(std::ceil((b - a) / target - 1e-9)));
    grid.push_back(a);
    for (int i = 1; i < n; ++i) grid.push_back(a + (b - a) * static_cast<double>(i) / n);
  }
  grid.push_back(breaks.back());
  return grid;
}

int index_of(const std::vector<double>& grid, double x) {
  auto it = std::lower_bound(grid.begin(), grid.end(), x - kCoordTol * (1.0 + std::abs(x)));
  if (it == grid.end() || std::abs(*it - x) > kCoordTol * (1.0 + std::abs(x))) return -1;
  return static_cast<int>(it - grid.begin());
}

double cross(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

}  // namespace

StandardCell build_standard_cell(double a1, double b1, double a2, double b2) {
  if (!(a1 < b1) || !(a2 < b2)) {
    throw Error(ErrorCode::DegenerateObstacle, "obstacle needs a1 < b1 and a2 < b2");
  }
  if (!(a1 > -1.0 && b1 < 1.0 && a2 > 0.0 && b2 < 1.0)) {
    throw Error(ErrorCode::ObstacleTouchesBoundary,
                "obstacle must lie strictly inside Y = (-1,1) x (0,1)");
  }
  StandardCell c;
  c.a1_ = a1;
  c.b1_ = b1;
  c.a2_ = a2;
  c.b2_ = b2;
  c.has_obstacle_ = true;
  return c;
}

StandardCell empty_standard_cell() {
  StandardCell c;
  c.has_obstacle_ = false;
  return c;
}

double cell_measure(const StandardCell& cell) { return 2.0 - cell.obstacle_area(); }

int LayerGeometry::period_count() const { return static_cast<int>(std::lround(h / eps)); }

int LayerGeometry::period_count_checked() const {
  if (!(eps > 0.0) || !(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps and h must be positive");
  const double ratio = h / eps;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "h/eps = " << ratio << " is not a positive integer";
    throw Error(ErrorCode::NonIntegerPeriodCount, os.str());
  }
  return static_cast<int>(n);
}

std::vector<Rect> LayerGeometry::obstacles() const {
  std::vector<Rect> out;
  if (!cell.has_obstacle()) return out;
  const int n = period_count_checked();
  const double k = kappa();
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(Rect{k * cell.a1(), k * cell.b1(), eps * (i + cell.a2()), eps * (i + cell.b2())});
  }
  return out;
}

const char* edge_tag_name(EdgeTag tag) {
  switch (tag) {
    case EdgeTag::GammaL: return "GammaL";
    case EdgeTag::GammaR: return "GammaR";
    case EdgeTag::GammaH: return "GammaH";
    case EdgeTag::Gamma0: return "Gamma0";
    case EdgeTag::BL: return "BL";
    case EdgeTag::BR: return "BR";
    case EdgeTag::ZL: return "ZL";
    case EdgeTag::ZR: return "ZR";
    case EdgeTag::CellObstacle: return "CellObstacle";
    case EdgeTag::CellOuter: return "CellOuter";
  }
  return "?";
}

const char* region_name(Region region) {
  switch (region) {
    case Region::Left: return "Left";
    case Region::Middle: return "Middle";
    case Region::Right: return "Right";
    case Region::Cell: return "Cell";
  }
  return "?";
}

std::optional<EdgeTag> parse_edge_tag(const std::string& name) {
  for (EdgeTag t : kAllEdgeTags) {
    if (name == edge_tag_name(t)) return t;
  }
  return std::nullopt;
}

std::optional<Region> parse_region(const std::string& name) {
  for (Region r : {Region::Left, Region::Middle, Region::Right, Region::Cell}) {
    if (name == region_name(r)) return r;
  }
  return std::nullopt;
}

DomainDescription build_micro_domain(const LayerGeometry& geom) {
  if (!(geom.ell > 0.0)) throw Error(ErrorCode::InvalidArgument, "strip length must be positive");
  geom.period_count_checked();
  const double k = geom.kappa();
  if (!(k > 0.0)) throw Error(ErrorCode::InvalidArgument, "layer half-width must be positive");
  if (k >= geom.ell / 2.0) {
    throw Error(ErrorCode::LayerTooWide, "kappa(eps) must be smaller than ell/2");
  }
  DomainDescription d;
  d.outer = Rect{-geom.ell / 2.0, geom.ell / 2.0, 0.0, geom.h};
  d.holes = geom.obstacles();
  d.interfaces = {{-k, EdgeTag::BL}, {k, EdgeTag::BR}};
  // One grid line per period boundary keeps the layer periodic structure visible in the mesh.
  const int n = geom.period_count();
  for (int i = 1; i < n; ++i) d.y_lines.push_back(geom.eps * i);
  d.left_tag = EdgeTag::GammaL;
  d.right_tag = EdgeTag::GammaR;
  d.horizontal_tag = EdgeTag::GammaH;
  d.layer_horizontal_tag = EdgeTag::Gamma0;
  d.hole_tag = EdgeTag::Gamma0;
  d.middle_x0 = -k;
  d.middle_x1 = k;
  d.max_target_edge = k;
  return d;
}

DomainDescription cell_domain(const StandardCell& cell) {
  DomainDescription d;
  d.outer = Rect{-1.0, 1.0, 0.0, 1.0};
  if (cell.has_obstacle()) d.holes.push_back(Rect{cell.a1(), cell.b1(), cell.a2(), cell.b2()});
  d.left_tag = EdgeTag::ZL;
  d.right_tag = EdgeTag::ZR;
  d.horizontal_tag = EdgeTag::CellOuter;
  d.layer_horizontal_tag = EdgeTag::CellOuter;
  d.hole_tag = EdgeTag::CellObstacle;
  d.single_region_cell = true;
  d.x_lines.push_back(0.0);  // keeps the cell mesh mirror-symmetric
  d.max_target_edge = 0.5;
  return d;
}

DomainDescription rectangle_domain(const Rect& r) {
  DomainDescription d;
  d.outer = r;
  d.left_tag = EdgeTag::GammaL;
  d.right_tag = EdgeTag::GammaR;
  d.horizontal_tag = EdgeTag::GammaH;
  d.layer_horizontal_tag = EdgeTag::GammaH;
  d.middle_x0 = 0.0;
  d.middle_x1 = 0.0;
  d.max_target_edge = 0.5 * std::min(r.width(), r.height());
  return d;
}

double TaggedMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return 0.5 * cross(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double TaggedMesh::total_area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
  return a;
}

double TaggedMesh::region_area(Region r) const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    if (regions[t] == r) a += triangle_area(t);
  }
  return a;
}

double TaggedMesh::tag_length(EdgeTag tag) const {
  double len = 0.0;
  for (const auto& e : edges) {
    if (e.tag != tag) continue;
    len += std::hypot(vertices[e.v1].x - vertices[e.v0].x, vertices[e.v1].y - vertices[e.v0].y);
  }
  return len;
}

bool TaggedMesh::has_tag(EdgeTag tag) const {
  return std::any_of(edges.begin(), edges.end(), [tag](const TaggedEdge& e) { return e.tag == tag; });
}

std::vector<int> TaggedMesh::tag_vertices(EdgeTag tag) const {
  std::vector<int> out;
  for (const auto& e : edges) {
    if (e.tag != tag) continue;
    out.push_back(e.v0);
    out.push_back(e.v1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> TaggedMesh::boundary_vertices() const {
  std::vector<int> out;
  for (const auto& e : edges) {
    if (is_interface_tag(e.tag)) continue;
    out.push_back(e.v0);
    out.push_back(e.v1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string TaggedMesh::check_invariants() const {
  if (regions.size() != triangles.size()) return "region tag count differs from triangle count";
  std::map<std::pair<int, int>, int> use;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int v : tri) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertices.size()) return "triangle references missing vertex";
    }
    if (!(triangle_area(t) > 0.0)) return "non-positive triangle area at triangle " + std::to_string(t);
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++use[{a, b}];
    }
  }
  for (const auto& [edge, count] : use) {
    if (count > 2) return "edge shared by more than two triangles";
  }
  std::map<std::pair<int, int>, int> tagged;
  for (const auto& e : edges) {
    int a = e.v0, b = e.v1;
    if (a > b) std::swap(a, b);
    auto it = use.find({a, b});
    if (it == use.end()) return "tagged edge is not a triangle edge";
    // Interface tags are internal in the layered mesh and boundary edges of the limit-problem bulks.
    const bool ok = is_interface_tag(e.tag) ? it->second >= 1 : it->second == 1;
    if (!ok) {
      return std::string("tagged edge ") + edge_tag_name(e.tag) + " has wrong multiplicity";
    }
    ++tagged[{a, b}];
  }
  for (const auto& [edge, count] : use) {
    if (count == 1 && tagged.find(edge) == tagged.end()) return "untagged boundary edge";
  }
  return {};
}

TaggedMesh triangulate(const DomainDescription& domain, double target_edge) {
  if (!(target_edge > 0.0)) throw Error(ErrorCode::InvalidArgument, "target edge length must be positive");
  if (target_edge > domain.max_target_edge * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "target edge length " << target_edge << " exceeds the admissible " << domain.max_target_edge;
    throw Error(ErrorCode::FeatureUnderresolved, os.str());
  }
  const Rect& o = domain.outer;
  std::vector<double> xb{o.x0, o.x1};
  std::vector<double> yb{o.y0, o.y1};
  for (const auto& hole : domain.holes) {
    if (!(hole.x0 > o.x0 && hole.x1 < o.x1 && hole.y0 > o.y0 && hole.y1 < o.y1)) {
      throw Error(ErrorCode::InvalidArgument, "hole must lie strictly inside the outer rectangle");
    }
    xb.insert(xb.end(), {hole.x0, hole.x1});
    yb.insert(yb.end(), {hole.y0, hole.y1});
  }
  for (const auto& [x, tag] : domain.interfaces) xb.push_back(x);
  for (double x : domain.x_lines) {
    if (x > o.x0 && x < o.x1) xb.push_back(x);
  }
  for (double y : domain.y_lines) {
    if (y > o.y0 && y < o.y1) yb.push_back(y);
  }
  const std::vector<double> xs = subdivide(unique_sorted(xb), target_edge);
  const std::vector<double> ys = subdivide(unique_sorted(yb), target_edge);
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  // Cell (i,j) spans [xs[i],xs[i+1]] x [ys[j],ys[j+1]].
  std::vector<char> solid(static_cast<std::size_t>(nx) * ny, 1);
  auto cell_id = [nx](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Point c{0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])};
      for (const auto& hole : domain.holes) {
        if (hole.contains_strictly(c)) {
          solid[cell_id(i, j)] = 0;
          break;
        }
      }
    }
  }
  auto is_solid = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < nx && j < ny && solid[cell_id(i, j)] != 0;
  };

  // Number grid nodes row by row, keeping only nodes touched by a solid cell.
  std::vector<int> node_index(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
  auto node_id = [nx](int i, int j) { return static_cast<std::size_t>(j) * (nx + 1) + i; };
  TaggedMesh mesh;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      if (is_solid(i - 1, j - 1) || is_solid(i, j - 1) || is_solid(i - 1, j) || is_solid(i, j)) {
        node_index[node_id(i, j)] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(Point{xs[i], ys[j]});
      }
    }
  }
  auto node = [&](int i, int j) { return node_index[node_id(i, j)]; };

  auto classify = [&](double cx) {
    if (domain.single_region_cell) return Region::Cell;
    if (cx < domain.middle_x0) return Region::Left;
    if (cx > domain.middle_x1) return Region::Right;
    return Region::Middle;
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!is_solid(i, j)) continue;
      const int p00 = node(i, j), p10 = node(i + 1, j), p11 = node(i + 1, j + 1), p01 = node(i, j + 1);
      const double cx = 0.5 * (xs[i] + xs[i + 1]);
      const Region region = classify(cx);
      if (cx < 0.0) {
        mesh.triangles.push_back({p00, p10, p11});
        mesh.triangles.push_back({p00, p11, p01});
      } else {
        mesh.triangles.push_back({p00, p10, p01});
        mesh.triangles.push_back({p10, p11, p01});
      }
      mesh.regions.push_back(region);
      mesh.regions.push_back(region);
    }
  }

  // Boundary edges, oriented counter-clockwise with respect to the meshed region.
  auto horizontal_outer_tag = [&](int i) {
    const double cx = 0.5 * (xs[i] + xs[i + 1]);
    if (!domain.single_region_cell && cx > domain.middle_x0 && cx < domain.middle_x1) {
      return domain.layer_horizontal_tag;
    }
    return domain.horizontal_tag;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!is_solid(i, j)) continue;
      if (!is_solid(i, j - 1)) {
        mesh.edges.push_back({node(i, j), node(i + 1, j), j == 0 ? horizontal_outer_tag(i) : domain.hole_tag});
      }
      if (!is_solid(i + 1, j)) {
        mesh.edges.push_back({node(i + 1, j), node(i + 1, j + 1), i + 1 == nx ? domain.right_tag : domain.hole_tag});
      }
      if (!is_solid(i, j + 1)) {
        mesh.edges.push_back(
            {node(i + 1, j + 1), node(i, j + 1), j + 1 == ny ? horizontal_outer_tag(i) : domain.hole_tag});
      }
      if (!is_solid(i - 1, j)) {
        mesh.edges.push_back({node(i, j + 1), node(i, j), i == 0 ? domain.left_tag : domain.hole_tag});
      }
    }
  }
  // Internal interface lines, oriented bottom to top.
  for (const auto& [x, tag] : domain.interfaces) {
    const int i = index_of(xs, x);
    if (i <= 0 || i >= nx) throw Error(ErrorCode::Internal, "interface line missing from grid");
    for (int j = 0; j < ny; ++j) {
      if (is_solid(i - 1, j) && is_solid(i, j)) mesh.edges.push_back({node(i, j), node(i, j + 1), tag});
    }
  }
  return mesh;
}

TaggedMesh mirror_mesh(const TaggedMesh& mesh) {
  auto swap_tag = [](EdgeTag t) {
    switch (t) {
      case EdgeTag::GammaL: return EdgeTag::GammaR;
      case EdgeTag::GammaR: return EdgeTag::GammaL;
      case EdgeTag::BL: return EdgeTag::BR;
      case EdgeTag::BR: return EdgeTag::BL;
      case EdgeTag::ZL: return EdgeTag::ZR;
      case EdgeTag::ZR: return EdgeTag::ZL;
      default: return t;
    }
  };
  TaggedMesh out = mesh;
  for (auto& p : out.vertices) p.x = -p.x;
  for (auto& tri : out.triangles) std::swap(tri[1], tri[2]);
  for (auto& r : out.regions) {
    if (r == Region::Left) {
      r = Region::Right;
    } else if (r == Region::Right) {
      r = Region::Left;
    }
  }
  for (auto& e : out.edges) {
    std::swap(e.v0, e.v1);
    e.tag = swap_tag(e.tag);
  }
  return out;
}

void write_mesh(std::ostream& os, const TaggedMesh& mesh) {
  os << "vertices " << mesh.vertices.size() << " / triangles " << mesh.triangles.size() << " / edges "
     << mesh.edges.size() << '\n';
  os.precision(17);
  for (const auto& p : mesh.vertices) os << "v " << p.x << ' ' << p.y << '\n';
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    os << "t " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << region_name(mesh.regions[t]) << '\n';
  }
  for (const auto& e : mesh.edges) os << "e " << e.v0 << ' ' << e.v1 << ' ' << edge_tag_name(e.tag) << '\n';
}

TaggedMesh read_mesh(std::istream& is) {
  std::string w1, s1, w2, s2, w3;
  std::size_t nv = 0, nt = 0, ne = 0;
  if (!(is >> w1 >> nv >> s1 >> w2 >> nt >> s2 >> w3 >> ne) || w1 != "vertices" || w2 != "triangles" ||
      w3 != "edges") {
    throw Error(ErrorCode::IoError, "bad mesh header");
  }
  TaggedMesh mesh;
  mesh.vertices.resize(nv);
  mesh.triangles.resize(nt);
  mesh.regions.resize(nt);
  mesh.edges.resize(ne);
  std::string key, name;
  for (auto& p : mesh.vertices) {
    if (!(is >> key >> p.x >> p.y) || key != "v") throw Error(ErrorCode::IoError, "bad vertex record");
  }
  for (std::size_t t = 0; t < nt; ++t) {
    auto& tri = mesh.triangles[t];
    if (!(is >> key >> tri[0] >> tri[1] >> tri[2] >> name) || key != "t") {
      throw Error(ErrorCode::IoError, "bad triangle record");
    }
    auto r = parse_region(name);
    if (!r) throw Error(ErrorCode::IoError, "unknown region " + name);
    mesh.regions[t] = *r;
  }
  for (auto& e : mesh.edges) {
    if (!(is >> key >> e.v0 >> e.v1 >> name) || key != "e") throw Error(ErrorCode::IoError, "bad edge record");
    auto tag = parse_edge_tag(name);
    if (!tag) throw Error(ErrorCode::IoError, "unknown tag " + name);
    e.tag = *tag;
  }
  return mesh;
}

void write_tag_statistics_csv(std::ostream& os, const TaggedMesh& mesh) {
  os << "tag,edges,length\n";
  os.precision(17);
  for (EdgeTag t : kAllEdgeTags) {
    const auto n = std::count_if(mesh.edges.begin(), mesh.edges.end(), [t](const TaggedEdge& e) { return e.tag == t; });
    if (n == 0) continue;
    os << edge_tag_name(t) << ',' << n << ',' << mesh.tag_length(t) << '\n';
  }
}

PointLocator::PointLocator(const TaggedMesh& mesh) : mesh_(&mesh) {
  if (mesh.vertices.empty()) return;
  double x1 = mesh.vertices[0].x, y1 = mesh.vertices[0].y;
  x0_ = x1;
  y0_ = y1;
  for (const auto& p : mesh.vertices) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double n = std::max(1.0, std::sqrt(static_cast<double>(mesh.triangles.size()) / 2.0));
  const double w = std::max(x1 - x0_, 1e-300), hgt = std::max(y1 - y0_, 1e-300);
  nx_ = std::max(1, static_cast<int>(std::ceil(n * std::sqrt(w / hgt))));
  ny_ = std::max(1, static_cast<int>(std::ceil(n * std::sqrt(hgt / w))));
  dx_ = w / nx_;
  dy_ = hgt / ny_;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    double bx0 = 1e300, bx1 = -1e300, by0 = 1e300, by1 = -1e300;
    for (int v : mesh.triangles[t]) {
      bx0 = std::min(bx0, mesh.vertices[v].x);
      bx1 = std::max(bx1, mesh.vertices[v].x);
      by0 = std::min(by0, mesh.vertices[v].y);
      by1 = std::max(by1, mesh.vertices[v].y);
    }
    const int i0 = std::clamp(static_cast<int>(std::floor((bx0 - x0_) / dx_ - 1e-9)), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor((bx1 - x0_) / dx_ + 1e-9)), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>(std::floor((by0 - y0_) / dy_ - 1e-9)), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>(std::floor((by1 - y0_) / dy_ + 1e-9)), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
    }
  }
}

std::optional<PointLocator::Hit> PointLocator::locate(Point p) const {
  if (buckets_.empty()) return std::nullopt;
  const int i = static_cast<int>(std::floor((p.x - x0_) / dx_));
  const int j = static_cast<int>(std::floor((p.y - y0_) / dy_));
  if (i < -1 || j < -1 || i > nx_ || j > ny_) return std::nullopt;
  const int ic = std::clamp(i, 0, nx_ - 1), jc = std::clamp(j, 0, ny_ - 1);
  std::optional<Hit> best;
  double best_min = -1e300;
  for (int t : buckets_[static_cast<std::size_t>(jc) * nx_ + ic]) {
    const auto& tri = mesh_->triangles[t];
    const Point a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
    const double area2 = cross(a, b, c);
    const double l0 = cross(p, b, c) / area2;
    const double l1 = cross(a, p, c) / area2;
    const double l2 = 1.0 - l0 - l1;
    const double m = std::min({l0, l1, l2});
    if (m > best_min) {
      best_min = m;
      best = Hit{t, {l0, l1, l2}};
    }
  }
  if (!best || best_min < -1e-9) return std::nullopt;
  return best;
}

}  // namespace tl
