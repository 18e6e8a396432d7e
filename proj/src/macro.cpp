#include "macro.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace tl {

namespace {

std::vector<int> unique_dofs(const DofMap& dofs, const std::vector<int>& vertices) {
  std::vector<int> out;
  for (int v : vertices) out.push_back(dofs[v]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double sum_over(const Vec& r, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += r[i];
  return s;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void require_choice(const ProblemConfig& config, ScalingChoice expected) {
  const ScalingChoice got = classify_scaling(config.scalings);
  if (got != expected && !config.allow_violations) {
    std::ostringstream os;
    os << "exponents classify as " << scaling_choice_name(got) << ", not " << scaling_choice_name(expected);
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

std::vector<double> uniform_breaks(double h, int n) {
  std::vector<double> b(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) b[static_cast<std::size_t>(j)] = h * j / n;
  return b;
}

// Bulk pieces shared by the limit solvers: physical loads and Dirichlet data on one bulk mesh.
struct Bulk {
  std::shared_ptr<const TaggedMesh> mesh;
  DofMap dofs;
  SpMat mass, stiff;
  std::vector<int> dirichlet;
  EdgeTag dirichlet_tag = EdgeTag::GammaL;
  Diag2 D;
  Vec2 B;
  const SpaceTimeFn* f = nullptr;
  const SpaceTimeFn* g = nullptr;
  const BoundaryFn* U = nullptr;

  Bulk(TaggedMesh m, EdgeTag dtag, Diag2 d, Vec2 b, const SpaceTimeFn& f_, const SpaceTimeFn& g_, const BoundaryFn& U_)
      : mesh(std::make_shared<TaggedMesh>(std::move(m))), dirichlet_tag(dtag), D(d), B(b), f(&f_), g(&g_), U(&U_) {
    dofs = DofMap::identity(*mesh);
    mass = assemble_mass(*mesh, dofs, RegionWeights::uniform(1.0));
    stiff = assemble_stiffness(*mesh, dofs, constant_diffusion(D), RegionWeights::uniform(1.0));
    dirichlet = mesh->tag_vertices(dtag);
  }

  Vec load(double t) const {
    Vec out = assemble_volume_load(
        *mesh, dofs, [&](Region, Point x) { return (*f)(t, x); }, RegionWeights::uniform(1.0));
    if (mesh->has_tag(EdgeTag::GammaH)) {
      out -= assemble_boundary_load(*mesh, dofs, [&](Point x) { return (*g)(t, x); }, EdgeTag::GammaH, 1.0);
    }
    return out;
  }

  Vec dirichlet_values(double t) const {
    Vec out = Vec::Zero(dofs.num_dofs);
    for (int v : dirichlet) out[dofs[v]] = (*U)(t, mesh->vertices[static_cast<std::size_t>(v)].y);
    return out;
  }

  bool drift_active(const RegularizedDrift& drift) const { return !drift.is_zero() && (B.x != 0.0 || B.y != 0.0); }

  Vec drift_load(const Vec& u, const RegularizedDrift& drift) const {
    const QuadratureValues pq = drift_at_quadrature(*mesh, dofs.to_vertices(u), drift);
    return assemble_drift_load(*mesh, dofs, constant_vector(B), pq, RegionWeights::uniform(1.0));
  }

  Vec initial(const SpaceTimeFn& h) const {
    return interpolate(*mesh, dofs, [&](Point x) { return h(0.0, x); });
  }
};

// Segment vectors m_j[i] = int_{s_j} phi_i along the edges tagged `tag`.
struct SigmaSegments {
  std::vector<std::vector<std::pair<int, double>>> m;
  std::vector<double> length;
  std::vector<int> nodes;  // dofs touched by any segment

  SigmaSegments(const TaggedMesh& mesh, const DofMap& dofs, EdgeTag tag, const std::vector<double>& breaks) {
    const std::size_t n = breaks.size() - 1;
    m.resize(n);
    length.assign(n, 0.0);
    std::vector<std::vector<double>> dense(n);
    for (const TaggedEdge& e : mesh.edges) {
      if (e.tag != tag) continue;
      const Point a = mesh.vertices[static_cast<std::size_t>(e.v0)];
      const Point b = mesh.vertices[static_cast<std::size_t>(e.v1)];
      const double ym = 0.5 * (a.y + b.y);
      const auto it = std::upper_bound(breaks.begin(), breaks.end(), ym);
      const std::size_t j = std::min(n - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - breaks.begin() - 1)));
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      length[j] += len;
      m[j].emplace_back(dofs[e.v0], 0.5 * len);
      m[j].emplace_back(dofs[e.v1], 0.5 * len);
      nodes.push_back(dofs[e.v0]);
      nodes.push_back(dofs[e.v1]);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (std::size_t j = 0; j < n; ++j) {
      if (!(length[j] > 0.0)) throw Error(ErrorCode::GeometryMeshMismatch, "interface segment without mesh edges");
    }
  }

  std::size_t size() const { return m.size(); }

  double average(std::size_t j, const Vec& u) const {
    double s = 0.0;
    for (const auto& [i, w] : m[j]) s += w * u[i];
    return s / length[j];
  }

  void add_to(Vec& out, std::size_t j, double coeff) const {
    for (const auto& [i, w] : m[j]) out[i] += coeff * w;
  }

  SpMat robin(int n, double c) const {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t j = 0; j < m.size(); ++j) {
      for (const auto& [a, wa] : m[j]) {
        for (const auto& [b, wb] : m[j]) t.emplace_back(a, b, c * wa * wb / length[j]);
      }
    }
    SpMat r(n, n);
    r.setFromTriplets(t.begin(), t.end());
    return r;
  }

  // Least-squares fluxes q with r ~ -sum_j q_j m_j on the segment nodes.
  std::vector<double> recover_flux(const Vec& r) const {
    const Eigen::Index nn = static_cast<Eigen::Index>(nodes.size());
    const Eigen::Index ns = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nn, ns);
    Eigen::VectorXd rs(nn);
    for (Eigen::Index k = 0; k < nn; ++k) rs[k] = r[nodes[static_cast<std::size_t>(k)]];
    for (Eigen::Index j = 0; j < ns; ++j) {
      for (const auto& [i, w] : m[static_cast<std::size_t>(j)]) {
        const auto pos = std::lower_bound(nodes.begin(), nodes.end(), i) - nodes.begin();
        g(pos, j) += w;
      }
    }
    const Eigen::VectorXd q = (g.transpose() * g).ldlt().solve(-(g.transpose() * rs));
    return std::vector<double>(q.data(), q.data() + q.size());
  }
};

}  // namespace

CellOperator::CellOperator(const StandardCell& cell, const std::function<Diag2(Point)>& D_M, double target_edge,
                           double dt, double tol_lin)
    : dt_(dt) {
  auto mesh = std::make_shared<TaggedMesh>(triangulate(cell_domain(cell), target_edge));
  mesh_ = mesh;
  dofs_ = DofMap::periodic_y(*mesh, 0.0, 1.0);
  mass_ = assemble_mass(*mesh, dofs_, RegionWeights::uniform(1.0));
  stiff_ = assemble_stiffness(
      *mesh, dofs_, [&](Region, Point y) { return D_M(y); }, RegionWeights::uniform(1.0));
  system_ = mass_ / dt + stiff_;
  left_dofs_ = unique_dofs(dofs_, mesh->tag_vertices(EdgeTag::ZL));
  right_dofs_ = unique_dofs(dofs_, mesh->tag_vertices(EdgeTag::ZR));
  std::vector<int> dir = left_dofs_;
  dir.insert(dir.end(), right_dofs_.begin(), right_dofs_.end());
  op_ = std::make_unique<TransientOperator>(mass_, stiff_, dir, dt, tol_lin);
  const Vec zero = Vec::Zero(dofs_.num_dofs);
  Vec dl = zero, dr = zero;
  for (int i : left_dofs_) dl[i] = 1.0;
  for (int i : right_dofs_) dr[i] = 1.0;
  w_left_ = op_->solve_rhs(zero, dl);
  w_right_ = op_->solve_rhs(zero, dr);
  const Vec rl = system_ * w_left_, rr = system_ * w_right_;
  c_ll_ = sum_over(rl, left_dofs_);
  c_lr_ = sum_over(rr, left_dofs_);
  c_rl_ = sum_over(rl, right_dofs_);
  c_rr_ = sum_over(rr, right_dofs_);
  mass_row_sums_ = mass_ * Vec::Ones(dofs_.num_dofs);
  measure_ = mass_row_sums_.sum();
}

Vec CellOperator::load(const std::function<double(Point)>& f) const {
  return assemble_volume_load(
      *mesh_, dofs_, [&](Region, Point y) { return f(y); }, RegionWeights::uniform(1.0));
}

Vec CellOperator::homogeneous_step(const Vec& w_prev, const Vec& load) const {
  return op_->solve_rhs(mass_ * w_prev / dt_ + load, Vec::Zero(dofs_.num_dofs));
}

Vec CellOperator::combine(const Vec& w0, double tau_l, double tau_r) const {
  return w0 + tau_l * w_left_ + tau_r * w_right_;
}

Vec CellOperator::step(const Vec& w_prev, const Vec& load, double tau_l, double tau_r) const {
  return combine(homogeneous_step(w_prev, load), tau_l, tau_r);
}

CellOperator::Fluxes CellOperator::fluxes(const Vec& w, const Vec& w_prev, const Vec& load) const {
  const Vec r = system_ * w - mass_ * w_prev / dt_ - load;
  return Fluxes{sum_over(r, left_dofs_), -sum_over(r, right_dofs_)};
}

double CellOperator::mean(const Vec& w) const { return mass_row_sums_.dot(w) / measure_; }

TransientField solve_cell_problem_S1(const CellOperator& op, const std::vector<double>& trace_left,
                                     const std::vector<double>& trace_right,
                                     const std::function<double(double, Point)>& f_a0,
                                     const std::function<double(Point)>& initial, const std::vector<double>& times) {
  if (trace_left.size() != times.size() || trace_right.size() != times.size()) {
    throw Error(ErrorCode::InvalidArgument, "one trace value per time level is required");
  }
  for (std::size_t n = 1; n < times.size(); ++n) {
    if (std::abs(times[n] - times[n - 1] - op.dt()) > 1e-9 * std::max(1.0, op.dt())) {
      throw Error(ErrorCode::InvalidArgument, "time grid does not match the cell operator step");
    }
  }
  const TaggedMesh& mesh = *op.mesh();
  TransientField out;
  out.mesh = op.mesh();
  Vec w = interpolate(mesh, op.dofs(), initial);
  out.times.push_back(times.empty() ? 0.0 : times.front());
  out.values.push_back(op.dofs().to_vertices(w));
  for (std::size_t n = 1; n < times.size(); ++n) {
    const double t = times[n];
    const Vec load = op.load([&](Point y) { return f_a0(t, y); });
    w = op.step(w, load, trace_left[n], trace_right[n]);
    out.times.push_back(t);
    out.values.push_back(op.dofs().to_vertices(w));
  }
  return out;
}

TaggedMesh build_bulk_mesh_left(const ProblemConfig& config, double x_right, EdgeTag right_tag,
                                const std::vector<double>& y_lines) {
  const LayerGeometry& g = config.geometry;
  DomainDescription d;
  d.outer = Rect{-0.5 * g.ell, x_right, 0.0, g.h};
  if (!(d.outer.width() > 0.0)) throw Error(ErrorCode::LayerTooWide, "bulk region is empty");
  d.left_tag = EdgeTag::GammaL;
  d.right_tag = right_tag;
  d.horizontal_tag = EdgeTag::GammaH;
  d.layer_horizontal_tag = EdgeTag::GammaH;
  d.middle_x0 = d.middle_x1 = x_right + 1.0;
  d.y_lines = y_lines;
  d.max_target_edge = 0.5 * std::min(d.outer.width(), d.outer.height());
  TaggedMesh mesh = triangulate(d, config.mesh.target_edge);
  const std::string bad = mesh.check_invariants();
  if (!bad.empty()) throw Error(ErrorCode::GeometryMeshMismatch, bad);
  return mesh;
}

MacroS1Solution solve_macro_S1(const ProblemConfig& config) {
  require_assumptions(config);
  require_choice(config, ScalingChoice::S1);
  const LayerGeometry& geom = config.geometry;
  const TimeParams& tp = config.time;
  const MeshParams& mp = config.mesh;
  const SourceData& src = config.sources;
  const int steps = tp.steps();
  const double dt = tp.T / steps;
  const int ns = mp.n_sigma;
  if (ns < 1) throw Error(ErrorCode::InvalidArgument, "n_sigma must be positive");
  const RegularizedDrift drift = config.drift.build();

  MacroS1Solution sol;
  sol.config = config;
  sol.segment_edges = uniform_breaks(geom.h, ns);
  for (int j = 0; j < ns; ++j) sol.sigma_points.push_back(0.5 * (sol.segment_edges[j] + sol.segment_edges[j + 1]));

  TaggedMesh left_mesh = build_bulk_mesh_left(config, 0.0, EdgeTag::BL, sol.segment_edges);
  TaggedMesh right_mesh = mirror_mesh(left_mesh);
  const Bulk bl(std::move(left_mesh), EdgeTag::GammaL, config.coefficients.D_L, config.coefficients.B_L, src.f_l,
                src.g_l, src.U_L);
  const Bulk br(std::move(right_mesh), EdgeTag::GammaR, config.coefficients.D_R, config.coefficients.B_R, src.f_r,
                src.g_r, src.U_R);
  const SigmaSegments sl(*bl.mesh, bl.dofs, EdgeTag::BL, sol.segment_edges);
  const SigmaSegments sr(*br.mesh, br.dofs, EdgeTag::BR, sol.segment_edges);

  const CellOperator cell(geom.cell, config.coefficients.D_M, mp.cell_target_edge, dt, tp.tol_lin);
  sol.cell_mesh = cell.mesh();
  sol.cell_dofs = cell.dofs();

  const TransientOperator opl(bl.mass, bl.stiff + sl.robin(bl.dofs.num_dofs, cell.c_ll()), bl.dirichlet, dt,
                              tp.tol_lin);
  const TransientOperator opr(br.mass, br.stiff + sr.robin(br.dofs.num_dofs, cell.c_rr()), br.dirichlet, dt,
                              tp.tol_lin);
  const SpMat sysl = bl.mass / dt + bl.stiff;
  const SpMat sysr = br.mass / dt + br.stiff;

  Vec ul = bl.initial(src.h_l), ur = br.initial(src.h_r);
  std::vector<Vec> w(static_cast<std::size_t>(ns));
  for (int j = 0; j < ns; ++j) {
    w[static_cast<std::size_t>(j)] = cell.constant_state(src.h_m(0.0, Point{0.0, sol.sigma_points[j]}));
  }
  std::vector<double> tau_l(static_cast<std::size_t>(ns)), tau_r(static_cast<std::size_t>(ns));
  for (int j = 0; j < ns; ++j) {
    tau_l[static_cast<std::size_t>(j)] = sl.average(static_cast<std::size_t>(j), ul);
    tau_r[static_cast<std::size_t>(j)] = sr.average(static_cast<std::size_t>(j), ur);
  }

  sol.u_l.mesh = bl.mesh;
  sol.u_r.mesh = br.mesh;
  auto record = [&](double t) {
    sol.u_l.times.push_back(t);
    sol.u_r.times.push_back(t);
    sol.u_l.values.push_back(bl.dofs.to_vertices(ul));
    sol.u_r.values.push_back(br.dofs.to_vertices(ur));
    std::vector<std::vector<double>> level;
    double avg = 0.0;
    for (int j = 0; j < ns; ++j) {
      const Vec& wj = w[static_cast<std::size_t>(j)];
      level.push_back(to_std(wj));
      avg += cell.mean(wj) * (sol.segment_edges[j + 1] - sol.segment_edges[j]) / geom.h;
    }
    sol.cells.push_back(std::move(level));
    sol.layer_average.push_back(avg);
  };
  record(0.0);

  const bool drift_l = bl.drift_active(drift), drift_r = br.drift_active(drift);
  const bool picard = tp.drift_mode == DriftMode::Picard;
  const int max_sweeps = picard ? std::max(mp.max_sweeps, tp.max_picard) : mp.max_sweeps;

  for (int n = 0; n < steps; ++n) {
    const double t1 = (n + 1) * dt;
    const Vec fl = bl.load(t1), fr = br.load(t1);
    const Vec dl = bl.dirichlet_values(t1), dr = br.dirichlet_values(t1);
    const Vec ml = bl.mass * ul / dt, mr = br.mass * ur / dt;

    std::vector<Vec> cell_load(static_cast<std::size_t>(ns)), w0(static_cast<std::size_t>(ns));
    std::vector<double> a_l(static_cast<std::size_t>(ns)), a_r(static_cast<std::size_t>(ns));
    for (int j = 0; j < ns; ++j) {
      const std::size_t jj = static_cast<std::size_t>(j);
      const Point xbar{0.0, sol.sigma_points[jj]};
      cell_load[jj] = cell.load([&](Point y) { return src.f_m(t1, xbar, y); });
      w0[jj] = cell.homogeneous_step(w[jj], cell_load[jj]);
      const CellOperator::Fluxes f0 = cell.fluxes(w0[jj], w[jj], cell_load[jj]);
      a_l[jj] = f0.in_left;
      a_r[jj] = -f0.out_right;
    }

    Vec nl = drift_l ? bl.drift_load(ul, drift) : Vec::Zero(bl.dofs.num_dofs);
    Vec nr = drift_r ? br.drift_load(ur, drift) : Vec::Zero(br.dofs.num_dofs);
    Vec ul1 = ul, ur1 = ur;
    S1StepDiagnostics diag;
    diag.step = n + 1;
    diag.time = t1;
    bool converged = false;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
      Vec rhs = ml + fl + nl;
      for (int j = 0; j < ns; ++j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        sl.add_to(rhs, jj, -(a_l[jj] + cell.c_lr() * tau_r[jj]));
      }
      const Vec ul_new = opl.solve_rhs(rhs, dl);
      double change = 0.0;
      for (int j = 0; j < ns; ++j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        const double t = sl.average(jj, ul_new);
        change = std::max(change, std::abs(t - tau_l[jj]));
        tau_l[jj] = t;
      }
      rhs = mr + fr + nr;
      for (int j = 0; j < ns; ++j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        sr.add_to(rhs, jj, -(a_r[jj] + cell.c_rl() * tau_l[jj]));
      }
      const Vec ur_new = opr.solve_rhs(rhs, dr);
      for (int j = 0; j < ns; ++j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        const double t = sr.average(jj, ur_new);
        change = std::max(change, std::abs(t - tau_r[jj]));
        tau_r[jj] = t;
      }
      double bulk_change = 0.0;
      if (picard) {
        bulk_change = std::max((ul_new - ul1).lpNorm<Eigen::Infinity>(), (ur_new - ur1).lpNorm<Eigen::Infinity>());
      }
      ul1 = ul_new;
      ur1 = ur_new;
      diag.sweeps = sweep;
      diag.trace_change = change;
      if (!std::isfinite(change)) break;
      const bool bulk_ok = !picard || bulk_change < tp.tol_picard;
      if (change < mp.tol_iface && bulk_ok && sweep > 1) {
        converged = true;
        break;
      }
      if (picard) {
        if (drift_l) nl = bl.drift_load(ul1, drift);
        if (drift_r) nr = br.drift_load(ur1, drift);
      }
    }
    if (!converged) {
      std::ostringstream os;
      os << "interface sweeps did not converge at step " << n + 1 << " (last trace change " << diag.trace_change
         << ")";
      throw Error(ErrorCode::InterfaceIterationDiverged, os.str());
    }

    std::vector<Vec> w1(static_cast<std::size_t>(ns));
    for (int j = 0; j < ns; ++j) {
      const std::size_t jj = static_cast<std::size_t>(j);
      w1[jj] = cell.combine(w0[jj], tau_l[jj], tau_r[jj]);
    }

    // A-posteriori checks from the stored fields. The cell traces are built from the final segment
    // averages, so the last sweep's trace change is what the matching residual actually measures.
    diag.matching_residual = diag.trace_change;
    const Vec rl = sysl * ul1 - ml - fl - nl;
    const Vec rr = sysr * ur1 - mr - fr - nr;
    const std::vector<double> ql = sl.recover_flux(rl);
    const std::vector<double> qr = sr.recover_flux(rr);
    for (int j = 0; j < ns; ++j) {
      const std::size_t jj = static_cast<std::size_t>(j);
      const double avg_l = sl.average(jj, ul1), avg_r = sr.average(jj, ur1);
      for (int i : cell.left_dofs()) diag.matching_residual = std::max(diag.matching_residual, std::abs(w1[jj][i] - avg_l));
      for (int i : cell.right_dofs()) diag.matching_residual = std::max(diag.matching_residual, std::abs(w1[jj][i] - avg_r));
      const CellOperator::Fluxes f = cell.fluxes(w1[jj], w[jj], cell_load[jj]);
      // Outward bulk flux on the left equals the flux entering the cell; on the right it is minus the flux leaving it.
      diag.flux_residual = std::max({diag.flux_residual, std::abs(ql[jj] - f.in_left), std::abs(qr[jj] + f.out_right)});
      diag.jump_residual = std::max(diag.jump_residual, std::abs((ql[jj] + qr[jj]) - (f.in_left - f.out_right)));
    }
    sol.max_matching_residual = std::max(sol.max_matching_residual, diag.matching_residual);
    sol.max_flux_residual = std::max(sol.max_flux_residual, diag.flux_residual);
    sol.diagnostics.push_back(diag);

    ul = ul1;
    ur = ur1;
    w = std::move(w1);
    record(t1);
  }
  return sol;
}

namespace {

// Integration points of the cell Z for y-averages of data.
struct CellQuadrature {
  std::vector<Point> points;
  std::vector<double> weights;

  explicit CellQuadrature(const StandardCell& cell) {
    const TaggedMesh mesh = triangulate(cell_domain(cell), 0.1);
    for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
      const TriangleGeometry g = triangle_geometry(mesh, k);
      for (const auto& q : kTriangleRule) {
        points.push_back(g.at(q));
        weights.push_back(g.area / 3.0);
      }
    }
  }

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * f(points[i]);
    return s;
  }
};

}  // namespace

MacroS2Solution solve_macro_S2(const ProblemConfig& config, const S2Options& options) {
  require_assumptions(config);
  require_choice(config, ScalingChoice::S2);
  const LayerGeometry& geom = config.geometry;
  const TimeParams& tp = config.time;
  const SourceData& src = config.sources;
  const CoefficientSet& co = config.coefficients;
  const int steps = tp.steps();
  const double dt = tp.T / steps;
  const RegularizedDrift drift = config.drift.build();
  const double zmeas = cell_measure(geom.cell);
  const CellQuadrature cq(geom.cell);

  DomainDescription d;
  d.outer = Rect{-0.5 * geom.ell, 0.5 * geom.ell, 0.0, geom.h};
  d.interfaces = {{0.0, EdgeTag::BL}};
  d.middle_x0 = d.middle_x1 = 0.0;
  d.layer_horizontal_tag = EdgeTag::GammaH;
  d.y_lines = uniform_breaks(geom.h, std::max(1, config.mesh.n_sigma));
  d.max_target_edge = 0.5 * std::min(0.5 * geom.ell, geom.h);
  auto mesh = std::make_shared<TaggedMesh>(triangulate(d, config.mesh.target_edge));
  const TaggedMesh& m = *mesh;
  const DofMap dofs = DofMap::identity(m);

  MacroS2Solution sol;
  sol.config = config;
  sol.cell_measure = zmeas;
  sol.u.mesh = mesh;
  sol.sigma_vertices = m.tag_vertices(EdgeTag::BL);
  std::sort(sol.sigma_vertices.begin(), sol.sigma_vertices.end(),
            [&](int a, int b) { return m.vertices[static_cast<std::size_t>(a)].y < m.vertices[static_cast<std::size_t>(b)].y; });
  for (int v : sol.sigma_vertices) sol.sigma_y.push_back(m.vertices[static_cast<std::size_t>(v)].y);

  const DiffusionField D = [&](Region r, Point) { return r == Region::Left ? co.D_L : co.D_R; };
  const VectorField B = [&](Region r, Point) { return r == Region::Left ? co.B_L : co.B_R; };
  const SpMat bulk_mass = assemble_mass(m, dofs, RegionWeights::uniform(1.0));
  const SpMat sigma_mass = assemble_edge_mass(m, dofs, EdgeTag::BL, zmeas);
  const SpMat stiff = assemble_stiffness(m, dofs, D, RegionWeights::uniform(1.0));

  std::vector<int> dirichlet = m.tag_vertices(EdgeTag::GammaL);
  for (int v : m.tag_vertices(EdgeTag::GammaR)) dirichlet.push_back(v);
  if (options.decoupled_interface) dirichlet.insert(dirichlet.end(), sol.sigma_vertices.begin(), sol.sigma_vertices.end());
  const SpMat mass = options.decoupled_interface ? bulk_mass : SpMat(bulk_mass + sigma_mass);
  const TransientOperator op(mass, stiff, dirichlet, dt, tp.tol_lin);

  // Interface ODE on its own: |Z| M_Sigma (s1 - s0)/dt = F_Sigma on the Sigma nodes.
  const Eigen::Index nsig = static_cast<Eigen::Index>(sol.sigma_vertices.size());
  Eigen::MatrixXd msig(nsig, nsig);
  for (Eigen::Index a = 0; a < nsig; ++a) {
    for (Eigen::Index b = 0; b < nsig; ++b) {
      msig(a, b) = sigma_mass.coeff(dofs[sol.sigma_vertices[static_cast<std::size_t>(a)]],
                                    dofs[sol.sigma_vertices[static_cast<std::size_t>(b)]]);
    }
  }
  const Eigen::LDLT<Eigen::MatrixXd> msig_ldlt(msig);

  auto dirichlet_values = [&](double t) {
    Vec out = Vec::Zero(dofs.num_dofs);
    for (int v : m.tag_vertices(EdgeTag::GammaL)) out[dofs[v]] = src.U_L(t, m.vertices[static_cast<std::size_t>(v)].y);
    for (int v : m.tag_vertices(EdgeTag::GammaR)) out[dofs[v]] = src.U_R(t, m.vertices[static_cast<std::size_t>(v)].y);
    return out;
  };
  auto sigma_load = [&](double t) {
    return assemble_boundary_load(
        m, dofs, [&](Point x) { return cq.integrate([&](Point y) { return src.f_m(t, x, y); }); }, EdgeTag::BL, 1.0);
  };
  auto load = [&](double t) {
    Vec f = assemble_volume_load(
        m, dofs, [&](Region r, Point x) { return r == Region::Left ? src.f_l(t, x) : src.f_r(t, x); },
        RegionWeights::uniform(1.0));
    if (m.has_tag(EdgeTag::GammaH)) {
      f -= assemble_boundary_load(
          m, dofs, [&](Point x) { return x.x < 0.0 ? src.g_l(t, x) : src.g_r(t, x); }, EdgeTag::GammaH, 1.0);
    }
    return f;
  };

  Vec u = interpolate(m, dofs, [&](Point x) {
    if (std::abs(x.x) <= 1e-12) return cq.integrate([&](Point) { return src.h_m(0.0, x); }) / zmeas;
    return x.x < 0.0 ? src.h_l(0.0, x) : src.h_r(0.0, x);
  });

  auto record = [&](double t) {
    sol.u.times.push_back(t);
    sol.u.values.push_back(dofs.to_vertices(u));
    std::vector<double> s;
    double avg = 0.0;
    for (Eigen::Index a = 0; a < nsig; ++a) {
      const int dof = dofs[sol.sigma_vertices[static_cast<std::size_t>(a)]];
      s.push_back(u[dof]);
      avg += msig.row(a).sum() * u[dof];
    }
    sol.sigma_values.push_back(std::move(s));
    sol.layer_average.push_back(avg / (zmeas * geom.h));
  };
  record(0.0);

  const bool drift_active = !drift.is_zero() && (co.B_L.x != 0.0 || co.B_L.y != 0.0 || co.B_R.x != 0.0 || co.B_R.y != 0.0);
  DriftLoadFn drift_load;
  if (drift_active) {
    drift_load = [&](const Vec& uu) {
      const QuadratureValues pq = drift_at_quadrature(m, dofs.to_vertices(uu), drift);
      return assemble_drift_load(m, dofs, B, pq, RegionWeights::uniform(1.0));
    };
  }

  for (int n = 0; n < steps; ++n) {
    const double t1 = (n + 1) * dt;
    const Vec fs = sigma_load(t1);
    Vec dv = dirichlet_values(t1);
    Vec f = load(t1);
    if (options.decoupled_interface) {
      Eigen::VectorXd rhs(nsig), s0(nsig);
      for (Eigen::Index a = 0; a < nsig; ++a) {
        const int dof = dofs[sol.sigma_vertices[static_cast<std::size_t>(a)]];
        rhs[a] = fs[dof];
        s0[a] = u[dof];
      }
      const Eigen::VectorXd s1 = s0 + dt * msig_ldlt.solve(rhs);
      for (Eigen::Index a = 0; a < nsig; ++a) dv[dofs[sol.sigma_vertices[static_cast<std::size_t>(a)]]] = s1[a];
    } else {
      f += fs;
    }
    StepStats stats;
    Vec u1 = time_step(op, u, f, drift_load, tp.drift_mode, dv, tp.tol_picard, tp.max_picard, &stats);
    Vec full = f;
    if (drift_load) full += drift_load(tp.drift_mode == DriftMode::Lagged ? u : u1);
    const Vec r = op.residual(u1, u, full);
    // Relative to the size of the terms in each row, so steady runs with huge dt are not penalized.
    const Vec rhs = mass * u / dt + full;
    const Vec lhs = (SpMat(op.mass().cwiseAbs()) / dt + SpMat(op.stiffness().cwiseAbs())) * u1.cwiseAbs();
    double scale = 0.0, jr = 0.0;
    for (int i = 0; i < op.size(); ++i) {
      if (!op.is_dirichlet(i)) scale = std::max({scale, std::abs(rhs[i]), std::abs(lhs[i])});
    }
    for (int v : sol.sigma_vertices) {
      if (!op.is_dirichlet(dofs[v])) jr = std::max(jr, std::abs(r[dofs[v]]));
    }
    sol.jump_residual.push_back(jr / (scale > 0.0 ? scale : 1.0));
    u = std::move(u1);
    record(t1);
  }
  return sol;
}

namespace {

// Finite-volume grid of the y2 cell line with breakpoints at the obstacle ends.
struct LineGrid {
  std::vector<double> faces;  // n+1 positions, faces[0] = 0, faces[n] = 1
  std::vector<double> centers, widths;

  LineGrid(const StandardCell& cell, int per_unit) {
    std::vector<double> breaks{0.0};
    if (cell.has_obstacle()) breaks.insert(breaks.end(), {cell.a2(), cell.b2()});
    breaks.push_back(1.0);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double len = breaks[k + 1] - breaks[k];
      const int n = std::max(1, static_cast<int>(std::ceil(len * per_unit - 1e-9)));
      for (int i = 0; i < n; ++i) faces.push_back(breaks[k] + len * i / n);
    }
    faces.push_back(1.0);
    for (std::size_t i = 0; i + 1 < faces.size(); ++i) {
      centers.push_back(0.5 * (faces[i] + faces[i + 1]));
      widths.push_back(faces[i + 1] - faces[i]);
    }
  }

  std::size_t size() const { return centers.size(); }
};

// Line operator for one layer column: implicit lambda1 diffusion, explicit upwind lambda2 drift.
struct ColumnLine {
  double y1 = 0.0;
  std::vector<bool> active;
  std::vector<int> index;  // cell -> unknown, -1 when inside the obstacle
  int unknowns = 0;
  SpdSolver solver;
};

}  // namespace

MacroS3Solution solve_macro_S3S4(const ProblemConfig& config) {
  require_assumptions(config);
  const ScalingChoice choice = classify_scaling(config.scalings);
  if (choice != ScalingChoice::S3 && choice != ScalingChoice::S4 && !config.allow_violations) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("exponents classify as ") + scaling_choice_name(choice) + ", not S3 or S4");
  }
  const LayerGeometry& geom = config.geometry;
  if (geom.width_mode != WidthMode::Fixed) {
    throw Error(ErrorCode::InvalidArgument, "the fixed-width limit model needs a FixedWidth geometry");
  }
  const double kappa = geom.kappa();
  if (!(kappa > 0.0) || kappa >= 0.5 * geom.ell) throw Error(ErrorCode::LayerTooWide, "kappa must lie in (0, ell/2)");
  const TimeParams& tp = config.time;
  const SourceData& src = config.sources;
  const CoefficientSet& co = config.coefficients;
  const int steps = tp.steps();
  const double dt = tp.T / steps;
  const RegularizedDrift drift = config.drift.build();

  MacroS3Solution sol;
  sol.config = config;
  const ScalingChoice effective = choice == ScalingChoice::S4 ? ScalingChoice::S4 : ScalingChoice::S3;
  sol.lambda = lambda_switches(effective, config.scalings);
  const double l1 = sol.lambda.lambda1, l2 = sol.lambda.lambda2;
  if (sol.lambda.lambda1 == 0 && sol.lambda.lambda2 == 0) {
    sol.warnings.push_back("DegenerateCellOperator: lambda1 = lambda2 = 0, layer reduces to pointwise time integration");
  }

  TaggedMesh left_mesh = build_bulk_mesh_left(config, -kappa, EdgeTag::BL, {});
  TaggedMesh right_mesh = mirror_mesh(left_mesh);
  const Bulk bl(std::move(left_mesh), EdgeTag::GammaL, co.D_L, co.B_L, src.f_l, src.g_l, src.U_L);
  const Bulk br(std::move(right_mesh), EdgeTag::GammaR, co.D_R, co.B_R, src.f_r, src.g_r, src.U_R);
  sol.u_l.mesh = bl.mesh;
  sol.u_r.mesh = br.mesh;

  // Rows: x2 of the interface nodes, matched between both bulk meshes by construction.
  std::vector<int> row_l = bl.mesh->tag_vertices(EdgeTag::BL);
  std::vector<int> row_r = br.mesh->tag_vertices(EdgeTag::BR);
  auto by_y = [](const TaggedMesh& mm) {
    return [&mm](int a, int b) { return mm.vertices[static_cast<std::size_t>(a)].y < mm.vertices[static_cast<std::size_t>(b)].y; };
  };
  std::sort(row_l.begin(), row_l.end(), by_y(*bl.mesh));
  std::sort(row_r.begin(), row_r.end(), by_y(*br.mesh));
  for (int v : row_l) sol.rows.push_back(bl.mesh->vertices[static_cast<std::size_t>(v)].y);
  const std::size_t nrows = sol.rows.size();

  // Interior columns sit at cell centers of a y1 grid with breaks at the obstacle ends; the
  // two outer columns at x1 = -+kappa carry the bulk traces and have no width.
  {
    std::vector<double> breaks{-1.0};
    if (geom.cell.has_obstacle()) breaks.insert(breaks.end(), {geom.cell.a1(), geom.cell.b1()});
    breaks.push_back(1.0);
    const int target = std::max(1, config.mesh.layer_columns - 2);
    sol.columns.push_back(-kappa);
    sol.column_widths.push_back(0.0);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double len = breaks[k + 1] - breaks[k];
      const int n = std::max(1, static_cast<int>(std::lround(0.5 * len * target)));
      for (int i = 0; i < n; ++i) {
        sol.columns.push_back(kappa * (breaks[k] + len * (i + 0.5) / n));
        sol.column_widths.push_back(kappa * len / n);
      }
    }
    sol.columns.push_back(kappa);
    sol.column_widths.push_back(0.0);
  }
  const int ncols = static_cast<int>(sol.columns.size());
  const LineGrid grid(geom.cell, std::max(2, config.mesh.cell_line_cells));
  sol.cell_centers = grid.centers;
  sol.cell_widths = grid.widths;
  const std::size_t ncell = grid.size();

  // Column line operators.
  std::vector<ColumnLine> lines(static_cast<std::size_t>(ncols));
  for (int i = 0; i < ncols; ++i) {
    ColumnLine& L = lines[static_cast<std::size_t>(i)];
    L.y1 = sol.columns[static_cast<std::size_t>(i)] / kappa;
    const bool cut = geom.cell.has_obstacle() && L.y1 > geom.cell.a1() && L.y1 < geom.cell.b1();
    L.active.assign(ncell, true);
    L.index.assign(ncell, -1);
    for (std::size_t c = 0; c < ncell; ++c) {
      if (cut && grid.centers[c] > geom.cell.a2() && grid.centers[c] < geom.cell.b2()) L.active[c] = false;
      if (L.active[c]) L.index[c] = L.unknowns++;
    }
    sol.active.push_back(L.active);
    if (i == 0 || i == ncols - 1) continue;
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t c = 0; c < ncell; ++c) {
      if (L.active[c]) t.emplace_back(L.index[c], L.index[c], grid.widths[c] / dt);
    }
    for (std::size_t c = 0; c < ncell; ++c) {
      const std::size_t d = (c + 1) % ncell;
      if (!L.active[c] || !L.active[d] || l1 == 0.0) continue;
      const double yf = grid.faces[c + 1];
      const double dist = 0.5 * (grid.widths[c] + grid.widths[d]);
      const double k = l1 * co.D_M(Point{L.y1, yf >= 1.0 ? 0.0 : yf}).d2 / dist;
      if (!(k > 0.0)) throw Error(ErrorCode::NonPositiveDiffusion, "cell diffusion not positive");
      const int a = L.index[c], b = L.index[d];
      t.emplace_back(a, a, k);
      t.emplace_back(b, b, k);
      t.emplace_back(a, b, -k);
      t.emplace_back(b, a, -k);
    }
    SpMat mat(L.unknowns, L.unknowns);
    mat.setFromTriplets(t.begin(), t.end());
    L.solver = SpdSolver(mat, tp.tol_lin);
  }

  // Average of B_M1 over Z_L and Z_R.
  auto mean_b1 = [&](double y1) {
    constexpr int kN = 1024;
    double s = 0.0;
    for (int k = 0; k < kN; ++k) s += co.B_M(Point{y1, (k + 0.5) / kN}).x;
    return s / kN;
  };
  const double bbar_l = mean_b1(-1.0), bbar_r = mean_b1(1.0);

  // Outward interface flux load -int q(u) phi with q = coeff * P_delta(u).
  auto interface_load = [&](const Bulk& b, EdgeTag tag, const Vec& u, double coeff) {
    Vec out = Vec::Zero(b.dofs.num_dofs);
    if (coeff == 0.0) return out;
    const double s = 0.5 / std::sqrt(3.0);
    for (const TaggedEdge& e : b.mesh->edges) {
      if (e.tag != tag) continue;
      const Point pa = b.mesh->vertices[static_cast<std::size_t>(e.v0)];
      const Point pb = b.mesh->vertices[static_cast<std::size_t>(e.v1)];
      const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
      const double ua = u[b.dofs[e.v0]], ub = u[b.dofs[e.v1]];
      for (double lam : {0.5 - s, 0.5 + s}) {
        const double val = -coeff * 0.5 * len * drift((1.0 - lam) * ua + lam * ub);
        out[b.dofs[e.v0]] += (1.0 - lam) * val;
        out[b.dofs[e.v1]] += lam * val;
      }
    }
    return out;
  };

  const TransientOperator opl(bl.mass, bl.stiff, bl.dirichlet, dt, tp.tol_lin);
  const TransientOperator opr(br.mass, br.stiff, br.dirichlet, dt, tp.tol_lin);
  const bool dl_active = bl.drift_active(drift), dr_active = br.drift_active(drift);
  const DriftLoadFn drift_l = [&](const Vec& u) {
    Vec n = interface_load(bl, EdgeTag::BL, u, l2 * bbar_l);
    if (dl_active) n += bl.drift_load(u, drift);
    return n;
  };
  const DriftLoadFn drift_r = [&](const Vec& u) {
    Vec n = interface_load(br, EdgeTag::BR, u, -l2 * bbar_r);
    if (dr_active) n += br.drift_load(u, drift);
    return n;
  };

  Vec ul = bl.initial(src.h_l), ur = br.initial(src.h_r);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  using Layer = std::vector<std::vector<std::vector<double>>>;
  Layer layer(static_cast<std::size_t>(ncols), std::vector<std::vector<double>>(nrows, std::vector<double>(ncell, nan)));
  auto slave_boundary_columns = [&](Layer& lay) {
    for (std::size_t k = 0; k < nrows; ++k) {
      const double tl_ = ul[bl.dofs[row_l[k]]], tr_ = ur[br.dofs[row_r[k]]];
      for (std::size_t c = 0; c < ncell; ++c) {
        lay.front()[k][c] = tl_;
        lay.back()[k][c] = tr_;
      }
    }
  };
  for (int i = 1; i + 1 < ncols; ++i) {
    for (std::size_t k = 0; k < nrows; ++k) {
      const double h0 = src.h_m(0.0, Point{sol.columns[static_cast<std::size_t>(i)], sol.rows[k]});
      for (std::size_t c = 0; c < ncell; ++c) {
        if (lines[static_cast<std::size_t>(i)].active[c]) layer[static_cast<std::size_t>(i)][k][c] = h0;
      }
    }
  }
  slave_boundary_columns(layer);

  auto layer_mean = [&](const Layer& lay) {
    double s = 0.0, wsum = 0.0;
    for (int i = 0; i < ncols; ++i) {
      const double wi = sol.column_widths[static_cast<std::size_t>(i)];
      if (wi == 0.0) continue;
      for (std::size_t k = 0; k < nrows; ++k) {
        const double wk = (k == 0 || k + 1 == nrows) ? 0.5 : 1.0;
        for (std::size_t c = 0; c < ncell; ++c) {
          if (!lines[static_cast<std::size_t>(i)].active[c]) continue;
          const double w = wi * wk * grid.widths[c];
          s += w * lay[static_cast<std::size_t>(i)][k][c];
          wsum += w;
        }
      }
    }
    return s / wsum;
  };
  auto record = [&](double t) {
    sol.u_l.times.push_back(t);
    sol.u_r.times.push_back(t);
    sol.u_l.values.push_back(bl.dofs.to_vertices(ul));
    sol.u_r.values.push_back(br.dofs.to_vertices(ur));
    sol.layer.push_back(layer);
    sol.layer_average.push_back(layer_mean(layer));
  };
  record(0.0);

  // Right-hand side of one line (everything except the implicit diffusion).
  auto line_rhs = [&](const ColumnLine& L, double x1, double x2, double t, const std::vector<double>& prev,
                      const std::vector<double>& star) {
    Vec rhs = Vec::Zero(L.unknowns);
    const Point x{x1, x2};
    for (std::size_t c = 0; c < ncell; ++c) {
      if (!L.active[c]) continue;
      rhs[L.index[c]] = grid.widths[c] * (prev[c] / dt + src.f_m(t, x, Point{L.y1, grid.centers[c]}));
    }
    for (std::size_t c = 0; c < ncell; ++c) {
      const std::size_t d = (c + 1) % ncell;
      const double yf = grid.faces[c + 1] >= 1.0 ? 0.0 : grid.faces[c + 1];
      if (L.active[c] && L.active[d]) {
        if (l2 == 0.0) continue;
        const double b2 = co.B_M(Point{L.y1, yf}).y;
        const double up = b2 >= 0.0 ? star[c] : star[d];
        const double flux = l2 * b2 * drift(up);
        rhs[L.index[c]] -= flux;
        rhs[L.index[d]] += flux;
      } else if (L.active[c] && !L.active[d]) {
        rhs[L.index[c]] -= src.g_0(t, x, Point{L.y1, yf});  // top face of the segment below the obstacle
      } else if (!L.active[c] && L.active[d]) {
        rhs[L.index[d]] -= src.g_0(t, x, Point{L.y1, yf});  // bottom face of the segment above the obstacle
      }
    }
    return rhs;
  };

  const bool picard = tp.drift_mode == DriftMode::Picard;
  for (int n = 0; n < steps; ++n) {
    const double t1 = (n + 1) * dt;
    ul = time_step(opl, ul, bl.load(t1), drift_l, tp.drift_mode, bl.dirichlet_values(t1), tp.tol_picard,
                   tp.max_picard);
    ur = time_step(opr, ur, br.load(t1), drift_r, tp.drift_mode, br.dirichlet_values(t1), tp.tol_picard,
                   tp.max_picard);
    Layer next = layer;
    for (int i = 1; i + 1 < ncols; ++i) {
      const ColumnLine& L = lines[static_cast<std::size_t>(i)];
      const double x1 = sol.columns[static_cast<std::size_t>(i)];
      for (std::size_t k = 0; k < nrows; ++k) {
        const std::vector<double>& prev = layer[static_cast<std::size_t>(i)][k];
        std::vector<double> cur = prev;
        const int max_it = picard && l2 != 0.0 ? tp.max_picard : 1;
        bool ok = !picard || l2 == 0.0;
        for (int it = 0; it < max_it; ++it) {
          const Vec sol_line = L.solver.solve(line_rhs(L, x1, sol.rows[k], t1, prev, cur));
          double change = 0.0;
          for (std::size_t c = 0; c < ncell; ++c) {
            if (!L.active[c]) continue;
            change = std::max(change, std::abs(sol_line[L.index[c]] - cur[c]));
            cur[c] = sol_line[L.index[c]];
          }
          if (change < tp.tol_picard) {
            ok = true;
            break;
          }
        }
        if (!ok) throw Error(ErrorCode::PicardDivergence, "layer line iteration did not converge");
        next[static_cast<std::size_t>(i)][k] = std::move(cur);
      }
    }
    layer = std::move(next);
    slave_boundary_columns(layer);
    record(t1);
  }
  return sol;
}

}  // namespace tl
