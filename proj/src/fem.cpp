#include "fem.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace tl {

DofMap DofMap::identity(const TaggedMesh& mesh) {
  DofMap m;
  m.num_dofs = static_cast<int>(mesh.num_vertices());
  m.vertex_to_dof.resize(mesh.num_vertices());
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) m.vertex_to_dof[i] = static_cast<int>(i);
  return m;
}

DofMap DofMap::periodic_y(const TaggedMesh& mesh, double y0, double y1) {
  const double tol = 1e-10 * std::max(1.0, std::abs(y1 - y0));
  std::map<long long, int> bottom;  // quantized x -> vertex on y0
  auto key = [](double x) { return std::llround(x * 1e9); };
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    if (std::abs(mesh.vertices[i].y - y0) <= tol) bottom[key(mesh.vertices[i].x)] = static_cast<int>(i);
  }
  DofMap m;
  m.vertex_to_dof.assign(mesh.num_vertices(), -1);
  int next = 0;
  std::vector<int> partner(mesh.num_vertices(), -1);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    if (std::abs(mesh.vertices[i].y - y1) <= tol) {
      auto it = bottom.find(key(mesh.vertices[i].x));
      if (it == bottom.end()) throw Error(ErrorCode::GeometryMeshMismatch, "periodic partner vertex missing");
      partner[i] = it->second;
    }
  }
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    if (partner[i] < 0) m.vertex_to_dof[i] = next++;
  }
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    if (partner[i] >= 0) m.vertex_to_dof[i] = m.vertex_to_dof[static_cast<std::size_t>(partner[i])];
  }
  m.num_dofs = next;
  return m;
}

std::vector<double> DofMap::to_vertices(const Vec& dofs) const {
  std::vector<double> out(vertex_to_dof.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dofs[vertex_to_dof[i]];
  return out;
}

double RegionWeights::operator()(Region r) const {
  switch (r) {
    case Region::Left: return left;
    case Region::Middle: return middle;
    case Region::Right: return right;
    case Region::Cell: return cell;
  }
  return 0.0;
}

DiffusionField constant_diffusion(Diag2 d) {
  return [d](Region, Point) { return d; };
}

VectorField constant_vector(Vec2 b) {
  return [b](Region, Point) { return b; };
}

Point TriangleGeometry::at(const std::array<double, 3>& b) const {
  return Point{b[0] * p[0].x + b[1] * p[1].x + b[2] * p[2].x, b[0] * p[0].y + b[1] * p[1].y + b[2] * p[2].y};
}

TriangleGeometry triangle_geometry(const TaggedMesh& mesh, std::size_t t) {
  TriangleGeometry g;
  const auto& tri = mesh.triangles[t];
  for (int k = 0; k < 3; ++k) g.p[k] = mesh.vertices[static_cast<std::size_t>(tri[k])];
  const double det = (g.p[1].x - g.p[0].x) * (g.p[2].y - g.p[0].y) - (g.p[2].x - g.p[0].x) * (g.p[1].y - g.p[0].y);
  g.area = 0.5 * det;
  for (int k = 0; k < 3; ++k) {
    const Point& a = g.p[(k + 1) % 3];
    const Point& b = g.p[(k + 2) % 3];
    g.grad[k] = Vec2{(a.y - b.y) / det, (b.x - a.x) / det};
  }
  return g;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat from_triplets(int n, const Triplets& t) {
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SpMat assemble_mass(const TaggedMesh& mesh, const DofMap& dofs, const RegionWeights& w) {
  Triplets t;
  t.reserve(mesh.num_triangles() * 9);
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const double wk = w(mesh.regions[k]);
    if (wk == 0.0) continue;
    const double a = mesh.triangle_area(k) * wk / 12.0;
    const auto& tri = mesh.triangles[k];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) t.emplace_back(dofs[tri[i]], dofs[tri[j]], i == j ? 2.0 * a : a);
    }
  }
  return from_triplets(dofs.num_dofs, t);
}

SpMat assemble_stiffness(const TaggedMesh& mesh, const DofMap& dofs, const DiffusionField& D,
                         const RegionWeights& w) {
  Triplets t;
  t.reserve(mesh.num_triangles() * 9);
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const double wk = w(mesh.regions[k]);
    const TriangleGeometry g = triangle_geometry(mesh, k);
    double d1 = 0.0, d2 = 0.0;
    for (const auto& q : kTriangleRule) {
      const Diag2 d = D(mesh.regions[k], g.at(q));
      if (!(d.d1 > 0.0) || !(d.d2 > 0.0)) {
        std::ostringstream os;
        os << "diffusion entry not positive in triangle " << k;
        throw Error(ErrorCode::NonPositiveDiffusion, os.str());
      }
      d1 += d.d1 / 3.0;
      d2 += d.d2 / 3.0;
    }
    if (wk == 0.0) continue;
    const auto& tri = mesh.triangles[k];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double v = wk * g.area * (d1 * g.grad[i].x * g.grad[j].x + d2 * g.grad[i].y * g.grad[j].y);
        t.emplace_back(dofs[tri[i]], dofs[tri[j]], v);
      }
    }
  }
  return from_triplets(dofs.num_dofs, t);
}

QuadratureValues drift_at_quadrature(const TaggedMesh& mesh, const std::vector<double>& vertex_arg,
                                     const RegularizedDrift& drift) {
  QuadratureValues out(mesh.num_triangles());
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const auto& tri = mesh.triangles[k];
    for (int q = 0; q < 3; ++q) {
      double r = 0.0;
      for (int i = 0; i < 3; ++i) r += kTriangleRule[q][i] * vertex_arg[static_cast<std::size_t>(tri[i])];
      out[k][q] = drift(r);
    }
  }
  return out;
}

Vec assemble_drift_load(const TaggedMesh& mesh, const DofMap& dofs, const VectorField& B, const QuadratureValues& p,
                        const RegionWeights& w) {
  Vec out = Vec::Zero(dofs.num_dofs);
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const double wk = w(mesh.regions[k]);
    if (wk == 0.0) continue;
    const TriangleGeometry g = triangle_geometry(mesh, k);
    Vec2 flux{0.0, 0.0};
    for (int q = 0; q < 3; ++q) {
      if (p[k][q] == 0.0) continue;
      const Vec2 b = B(mesh.regions[k], g.at(kTriangleRule[q]));
      flux.x += b.x * p[k][q] / 3.0;
      flux.y += b.y * p[k][q] / 3.0;
    }
    if (flux.x == 0.0 && flux.y == 0.0) continue;
    const auto& tri = mesh.triangles[k];
    for (int i = 0; i < 3; ++i) out[dofs[tri[i]]] += wk * g.area * (flux.x * g.grad[i].x + flux.y * g.grad[i].y);
  }
  return out;
}

Vec assemble_boundary_load(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Point)>& g,
                           EdgeTag tag, double scaling) {
  if (!mesh.has_tag(tag)) {
    throw Error(ErrorCode::UnknownTag, std::string("mesh has no edges tagged ") + edge_tag_name(tag));
  }
  Vec out = Vec::Zero(dofs.num_dofs);
  const double s = 0.5 / std::sqrt(3.0);
  for (const TaggedEdge& e : mesh.edges) {
    if (e.tag != tag) continue;
    const Point a = mesh.vertices[static_cast<std::size_t>(e.v0)];
    const Point b = mesh.vertices[static_cast<std::size_t>(e.v1)];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (double lam : {0.5 - s, 0.5 + s}) {
      const Point x{(1.0 - lam) * a.x + lam * b.x, (1.0 - lam) * a.y + lam * b.y};
      const double v = scaling * 0.5 * len * g(x);
      out[dofs[e.v0]] += (1.0 - lam) * v;
      out[dofs[e.v1]] += lam * v;
    }
  }
  return out;
}

Vec assemble_volume_load(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Region, Point)>& f,
                         const RegionWeights& w) {
  Vec out = Vec::Zero(dofs.num_dofs);
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const double wk = w(mesh.regions[k]);
    if (wk == 0.0) continue;
    const TriangleGeometry g = triangle_geometry(mesh, k);
    const auto& tri = mesh.triangles[k];
    for (const auto& q : kTriangleRule) {
      const double v = wk * g.area / 3.0 * f(mesh.regions[k], g.at(q));
      for (int i = 0; i < 3; ++i) out[dofs[tri[i]]] += q[i] * v;
    }
  }
  return out;
}

SpMat assemble_edge_mass(const TaggedMesh& mesh, const DofMap& dofs, EdgeTag tag, double weight) {
  if (!mesh.has_tag(tag)) {
    throw Error(ErrorCode::UnknownTag, std::string("mesh has no edges tagged ") + edge_tag_name(tag));
  }
  Triplets t;
  for (const TaggedEdge& e : mesh.edges) {
    if (e.tag != tag) continue;
    const Point a = mesh.vertices[static_cast<std::size_t>(e.v0)];
    const Point b = mesh.vertices[static_cast<std::size_t>(e.v1)];
    const double len = std::hypot(b.x - a.x, b.y - a.y) * weight;
    const int i = dofs[e.v0], j = dofs[e.v1];
    t.emplace_back(i, i, len / 3.0);
    t.emplace_back(j, j, len / 3.0);
    t.emplace_back(i, j, len / 6.0);
    t.emplace_back(j, i, len / 6.0);
  }
  return from_triplets(dofs.num_dofs, t);
}

Vec interpolate(const TaggedMesh& mesh, const DofMap& dofs, const std::function<double(Point)>& f) {
  Vec out = Vec::Zero(dofs.num_dofs);
  std::vector<bool> set(static_cast<std::size_t>(dofs.num_dofs), false);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const int d = dofs[static_cast<int>(i)];
    if (set[static_cast<std::size_t>(d)]) continue;
    out[d] = f(mesh.vertices[i]);
    set[static_cast<std::size_t>(d)] = true;
  }
  return out;
}

struct SpdSolver::Impl {
  Eigen::SimplicialLDLT<SpMat> ldlt;
};

SpdSolver::SpdSolver(const SpMat& a, double tol_lin) : impl_(std::make_unique<Impl>()), a_(a), tol_(tol_lin) {
  if (a.rows() == 0) return;
  impl_->ldlt.compute(a_);
  if (impl_->ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::LinearSolveFailure, "sparse factorization failed (matrix not positive definite?)");
  }
  const auto& d = impl_->ldlt.vectorD();
  if (d.minCoeff() <= 0.0) throw Error(ErrorCode::LinearSolveFailure, "matrix is not positive definite");
}

SpdSolver::SpdSolver() = default;
SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Vec SpdSolver::solve(const Vec& rhs) const {
  if (a_.rows() == 0) return Vec();
  if (!impl_) throw Error(ErrorCode::Internal, "solver not initialized");
  const double bn = rhs.norm();
  if (bn == 0.0) {
    last_residual_ = 0.0;
    return Vec::Zero(rhs.size());
  }
  Vec x = impl_->ldlt.solve(rhs);
  double rel = (rhs - a_ * x).norm() / bn;
  for (int it = 0; it < 5 && rel > tol_; ++it) {
    x += impl_->ldlt.solve(rhs - a_ * x);
    rel = (rhs - a_ * x).norm() / bn;
  }
  last_residual_ = rel;
  if (!(rel <= tol_)) {
    std::ostringstream os;
    os << "relative residual " << rel << " above tolerance " << tol_;
    throw Error(ErrorCode::LinearSolveFailure, os.str());
  }
  return x;
}

Vec linear_solve(const SpMat& a, const Vec& rhs, double tol_lin) {
  if (a.rows() != a.cols() || a.rows() != rhs.size()) {
    throw Error(ErrorCode::InvalidArgument, "matrix and right-hand side sizes differ");
  }
  return SpdSolver(a, tol_lin).solve(rhs);
}

TransientOperator::TransientOperator(SpMat mass, SpMat stiffness, std::vector<int> dirichlet_dofs, double dt,
                                     double tol_lin)
    : mass_(std::move(mass)), stiffness_(std::move(stiffness)), dirichlet_(std::move(dirichlet_dofs)), dt_(dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  const int n = static_cast<int>(mass_.rows());
  std::sort(dirichlet_.begin(), dirichlet_.end());
  dirichlet_.erase(std::unique(dirichlet_.begin(), dirichlet_.end()), dirichlet_.end());
  is_dirichlet_.assign(static_cast<std::size_t>(n), false);
  for (int d : dirichlet_) is_dirichlet_[static_cast<std::size_t>(d)] = true;
  free_index_.assign(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    if (!is_dirichlet_[static_cast<std::size_t>(i)]) {
      free_index_[static_cast<std::size_t>(i)] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(i);
    }
  }
  system_ = mass_ / dt_ + stiffness_;
  const int nf = static_cast<int>(free_dofs_.size());
  Triplets ff, fd;
  for (int k = 0; k < system_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(system_, k); it; ++it) {
      const int fi = free_index_[static_cast<std::size_t>(it.row())];
      if (fi < 0) continue;
      const int fj = free_index_[static_cast<std::size_t>(it.col())];
      if (fj >= 0) {
        ff.emplace_back(fi, fj, it.value());
      } else {
        fd.emplace_back(fi, static_cast<int>(it.col()), it.value());
      }
    }
  }
  SpMat kff(nf, nf);
  kff.setFromTriplets(ff.begin(), ff.end());
  k_fd_.resize(nf, n);
  k_fd_.setFromTriplets(fd.begin(), fd.end());
  solver_ = SpdSolver(kff, tol_lin);
}

Vec TransientOperator::solve_rhs(const Vec& rhs, const Vec& dirichlet_values) const {
  const int nf = static_cast<int>(free_dofs_.size());
  Vec xd = Vec::Zero(size());
  for (int d : dirichlet_) xd[d] = dirichlet_values[d];
  Vec bf(nf);
  for (int i = 0; i < nf; ++i) bf[i] = rhs[free_dofs_[static_cast<std::size_t>(i)]];
  if (!dirichlet_.empty()) bf -= k_fd_ * xd;
  const Vec xf = solver_.solve(bf);
  Vec x = xd;
  for (int i = 0; i < nf; ++i) x[free_dofs_[static_cast<std::size_t>(i)]] = xf[i];
  return x;
}

Vec TransientOperator::solve(const Vec& v_prev, const Vec& load, const Vec& dirichlet_values) const {
  return solve_rhs(mass_ * v_prev / dt_ + load, dirichlet_values);
}

Vec TransientOperator::residual(const Vec& v, const Vec& v_prev, const Vec& load) const {
  Vec r = system_ * v - mass_ * v_prev / dt_ - load;
  for (int d : dirichlet_) r[d] = 0.0;
  return r;
}

Vec time_step(const TransientOperator& op, const Vec& v_prev, const Vec& load, const DriftLoadFn& drift,
              DriftMode mode, const Vec& dirichlet_values, double tol_picard, int max_picard, StepStats* stats) {
  const Vec base = op.mass() * v_prev / op.dt() + load;
  if (!drift) {
    Vec v = op.solve_rhs(base, dirichlet_values);
    if (stats) *stats = {0, op.last_relative_residual()};
    return v;
  }
  if (mode == DriftMode::Lagged) {
    Vec v = op.solve_rhs(base + drift(v_prev), dirichlet_values);
    if (stats) *stats = {1, op.last_relative_residual()};
    return v;
  }
  Vec cur = v_prev;
  for (int it = 1; it <= max_picard; ++it) {
    Vec next = op.solve_rhs(base + drift(cur), dirichlet_values);
    const double change = (next - cur).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(change)) break;
    cur = std::move(next);
    if (change < tol_picard) {
      if (stats) *stats = {it, op.last_relative_residual()};
      return cur;
    }
  }
  std::ostringstream os;
  os << "Picard iteration did not reach " << tol_picard << " within " << max_picard << " iterations";
  throw Error(ErrorCode::PicardDivergence, os.str());
}

}  // namespace tl
