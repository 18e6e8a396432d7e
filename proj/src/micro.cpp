#include "micro.hpp"

#include <cmath>

#include "errors.hpp"

namespace tl {

Point layer_cell_coordinates(const LayerGeometry& geom, Point x) {
  const double s = x.y / geom.eps;
  return Point{x.x / geom.kappa(), s - std::floor(s)};
}

TaggedMesh build_micro_mesh(const ProblemConfig& config) {
  TaggedMesh mesh = triangulate(build_micro_domain(config.geometry), config.mesh.target_edge);
  const std::string bad = mesh.check_invariants();
  if (!bad.empty()) throw Error(ErrorCode::GeometryMeshMismatch, bad);
  return mesh;
}

namespace {

struct MicroOperators {
  RegionWeights mass_w, stiff_w, drift_w;
  DiffusionField D;
  VectorField B;
};

MicroOperators micro_operators(const ProblemConfig& c) {
  const double eps = c.geometry.eps;
  const ScalingExponents& e = c.scalings;
  MicroOperators ops;
  ops.mass_w = {1.0, std::pow(eps, e.alpha), 1.0, 1.0};
  ops.stiff_w = {1.0, std::pow(eps, e.beta), 1.0, 1.0};
  ops.drift_w = {1.0, std::pow(eps, e.gamma), 1.0, 1.0};
  const LayerGeometry geom = c.geometry;
  const CoefficientSet co = c.coefficients;
  ops.D = [geom, co](Region r, Point x) {
    if (r == Region::Left) return co.D_L;
    if (r == Region::Right) return co.D_R;
    return co.D_M(layer_cell_coordinates(geom, x));
  };
  ops.B = [geom, co](Region r, Point x) {
    if (r == Region::Left) return co.B_L;
    if (r == Region::Right) return co.B_R;
    return co.B_M(layer_cell_coordinates(geom, x));
  };
  return ops;
}

std::vector<int> dirichlet_vertices(const TaggedMesh& mesh) {
  std::vector<int> d = mesh.tag_vertices(EdgeTag::GammaL);
  const std::vector<int> r = mesh.tag_vertices(EdgeTag::GammaR);
  d.insert(d.end(), r.begin(), r.end());
  return d;
}

// Initial profile chosen by position; vertices on B_L/B_R take the layer profile.
double initial_value(const ProblemConfig& c, Point x) {
  const double k = c.geometry.kappa();
  const double tol = 1e-12 * std::max(1.0, k);
  if (x.x < -k - tol) return c.sources.h_l(0.0, x);
  if (x.x > k + tol) return c.sources.h_r(0.0, x);
  return c.sources.h_m(0.0, x);
}

}  // namespace

MicroSolution solve_micro(const ProblemConfig& config) {
  require_assumptions(config);
  MicroSolution sol;
  sol.config = config;
  auto mesh = std::make_shared<TaggedMesh>(build_micro_mesh(config));
  sol.mesh = mesh;
  const TaggedMesh& m = *mesh;
  const DofMap dofs = DofMap::identity(m);
  const MicroOperators ops = micro_operators(config);
  const LayerGeometry geom = config.geometry;
  const double eps = geom.eps;
  const ScalingExponents& e = config.scalings;
  const double eps_alpha = std::pow(eps, e.alpha);
  const double eps_xi = std::pow(eps, e.xi);
  const BoundaryLift lift = config.lift();
  const RegularizedDrift drift = config.drift.build();
  const TimeParams& tp = config.time;
  const int steps = tp.steps();
  const double dt = tp.T / steps;

  const SpMat mass = assemble_mass(m, dofs, ops.mass_w);
  const SpMat stiff = assemble_stiffness(m, dofs, ops.D, ops.stiff_w);
  const TransientOperator op(mass, stiff, dirichlet_vertices(m), dt, tp.tol_lin);
  const bool has_gamma0 = m.has_tag(EdgeTag::Gamma0);
  const bool has_gammah = m.has_tag(EdgeTag::GammaH);

  std::vector<int> interface_dofs = m.tag_vertices(EdgeTag::BL);
  for (int v : m.tag_vertices(EdgeTag::BR)) interface_dofs.push_back(v);

  auto lift_at = [&](double t) { return interpolate(m, dofs, [&](Point x) { return lift(t, x); }); };
  auto physical_load = [&](double t) {
    const SourceData& s = config.sources;
    Vec f = assemble_volume_load(
        m, dofs,
        [&](Region r, Point x) {
          if (r == Region::Left) return s.f_l(t, x);
          if (r == Region::Right) return s.f_r(t, x);
          return eps_alpha * s.f_m(t, x, layer_cell_coordinates(geom, x));
        },
        RegionWeights::uniform(1.0));
    if (has_gammah) {
      f -= assemble_boundary_load(
          m, dofs, [&](Point x) { return x.x < 0.0 ? s.g_l(t, x) : s.g_r(t, x); }, EdgeTag::GammaH, 1.0);
    }
    if (has_gamma0) {
      f -= assemble_boundary_load(
          m, dofs, [&](Point x) { return s.g_0(t, x, layer_cell_coordinates(geom, x)); }, EdgeTag::Gamma0, eps_xi);
    }
    return f;
  };

  Vec ub = lift_at(0.0);
  Vec v = interpolate(m, dofs, [&](Point x) { return initial_value(config, x) + lift(0.0, x); });
  for (int d : op.dirichlet_dofs()) v[d] = 0.0;

  auto record = [&](double t, const Vec& vv, const Vec& ubv) {
    sol.v.times.push_back(t);
    sol.u.times.push_back(t);
    sol.v.values.push_back(dofs.to_vertices(vv));
    sol.u.values.push_back(dofs.to_vertices(vv - ubv));
  };
  sol.v.mesh = mesh;
  sol.u.mesh = mesh;
  record(0.0, v, ub);

  const Vec zero = Vec::Zero(op.size());
  const bool drift_active = !drift.is_zero();
  for (int n = 0; n < steps; ++n) {
    const double t1 = (n + 1) * dt;
    const Vec ub1 = lift_at(t1);
    // Discrete lift: the step is the physical step written for v = u + I_h u_b.
    const Vec load = physical_load(t1) + mass * (ub1 - ub) / dt + stiff * ub1;
    DriftLoadFn drift_load;
    if (drift_active) {
      const Vec& shift = tp.drift_mode == DriftMode::Lagged ? ub : ub1;
      drift_load = [&, shift](const Vec& vv) {
        const QuadratureValues pq = drift_at_quadrature(m, dofs.to_vertices(vv - shift), drift);
        return assemble_drift_load(m, dofs, ops.B, pq, ops.drift_w);
      };
    }
    StepStats stats;
    Vec v1 = time_step(op, v, load, drift_load, tp.drift_mode, zero, tp.tol_picard, tp.max_picard, &stats);

    StepDiagnostics diag;
    diag.step = n + 1;
    diag.time = t1;
    diag.picard_iterations = stats.picard_iterations;
    Vec full_load = load;
    if (drift_load) full_load += drift_load(tp.drift_mode == DriftMode::Lagged ? v : v1);
    const Vec rhs = mass * v / dt + full_load;
    const Vec r = op.residual(v1, v, full_load);
    double rhs_norm = 0.0;
    for (int i = 0; i < op.size(); ++i) {
      if (!op.is_dirichlet(i)) rhs_norm = std::max(rhs_norm, std::abs(rhs[i]));
    }
    const double scale = rhs_norm > 0.0 ? rhs_norm : 1.0;
    diag.residual = r.lpNorm<Eigen::Infinity>() / scale;
    double jump = 0.0;
    for (int d : interface_dofs) {
      if (!op.is_dirichlet(d)) jump = std::max(jump, std::abs(r[d]));
    }
    diag.flux_jump = jump / scale;
    sol.diagnostics.push_back(diag);

    v = std::move(v1);
    ub = ub1;
    record(t1, v, ub);
  }
  return sol;
}

namespace {

std::vector<EnergyReport> energy_levels(const MicroSolution& sol, const ScalingExponents& ex, bool drift_every_level) {
  std::vector<EnergyReport> out;
  if (!sol.mesh || sol.v.levels() == 0) return out;
  const TaggedMesh& m = *sol.mesh;
  const DofMap dofs = DofMap::identity(m);
  const double eps = sol.config.geometry.eps;
  const RegionWeights wa{1.0, std::pow(eps, ex.alpha), 1.0, 1.0};
  const RegionWeights wb{1.0, std::pow(eps, ex.beta), 1.0, 1.0};
  const RegionWeights wg{1.0, std::pow(eps, ex.gamma), 1.0, 1.0};
  const SpMat mass = assemble_mass(m, dofs, wa);
  const SpMat grad = assemble_stiffness(m, dofs, constant_diffusion(Diag2{1.0, 1.0}), wb);
  const RegularizedDrift drift = sol.config.drift.build();
  auto vec = [](const std::vector<double>& x) { return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size())); };

  EnergyReport acc;
  for (std::size_t n = 0; n < sol.v.levels(); ++n) {
    const auto vn = vec(sol.v.values[n]);
    if (n > 0) {
      const double dt = sol.v.times[n] - sol.v.times[n - 1];
      const Vec dv = (vn - vec(sol.v.values[n - 1])) / dt;
      acc.e2 += dt * vn.dot(grad * vn);
      acc.e3 += dt * dv.dot(mass * dv);
    }
    acc.e1 = vn.dot(mass * vn);
    acc.e4 = 0.0;
    if (!drift_every_level && n + 1 < sol.v.levels()) {
      out.push_back(acc);
      continue;
    }
    const QuadratureValues pq = drift_at_quadrature(m, sol.u.values[n], drift);
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
      const double a = m.triangle_area(k) * wg(m.regions[k]) / 3.0;
      for (double p : pq[k]) acc.e4 += a * p * p;
    }
    out.push_back(acc);
  }
  return out;
}

}  // namespace

std::vector<EnergyReport> energy_series(const MicroSolution& sol, const ScalingExponents& ex) {
  return energy_levels(sol, ex, true);
}

EnergyReport energy_report(const MicroSolution& sol, const ScalingExponents& ex) {
  const std::vector<EnergyReport> s = energy_levels(sol, ex, false);
  return s.empty() ? EnergyReport{} : s.back();
}

std::vector<double> layer_average_series(const MicroSolution& sol) {
  std::vector<double> out;
  if (!sol.mesh) return out;
  const TaggedMesh& m = *sol.mesh;
  const double area = m.region_area(Region::Middle);
  if (!(area > 0.0)) throw Error(ErrorCode::RegionMismatch, "micro mesh has no layer triangles");
  for (const auto& vals : sol.u.values) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
      if (m.regions[k] != Region::Middle) continue;
      const auto& tri = m.triangles[k];
      s += m.triangle_area(k) * (vals[tri[0]] + vals[tri[1]] + vals[tri[2]]) / 3.0;
    }
    out.push_back(s / area);
  }
  return out;
}

}  // namespace tl
