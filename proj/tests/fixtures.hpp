#pragma once

#include <cmath>
#include <numbers>

#include "fem.hpp"
#include "geometry.hpp"
#include "problem.hpp"

namespace tl::testing {

// Strip (-1,1) x (0,1) with the centered obstacle, S1 exponents, zero data.
inline ProblemConfig base_config(double eps = 0.25) {
  ProblemConfig c;
  c.geometry.ell = 2.0;
  c.geometry.h = 1.0;
  c.geometry.eps = eps;
  c.geometry.cell = build_standard_cell(-0.5, 0.5, 0.25, 0.75);
  c.scalings = {-1.0, 1.0, 1.0, 1.0};
  c.drift.coeffs = {0.0, 1.0, -1.0};
  c.drift.delta = 0.1;
  c.time.T = 0.1;
  c.time.dt = 0.02;
  c.mesh.target_edge = 0.1;
  c.mesh.cell_target_edge = 0.1;
  c.mesh.n_sigma = 8;
  return c;
}

// S1 configuration with smooth data in every region.
inline ProblemConfig smooth_s1(double eps) {
  ProblemConfig c = base_config(eps);
  c.coefficients.D_R = {0.5, 0.5};
  c.coefficients.B_L = {0.5, 0.0};
  c.coefficients.B_R = {0.5, 0.0};
  c.coefficients.B_M = [](Point) { return Vec2{0.5, 0.0}; };
  c.sources.f_l = [](double, Point x) {
    return std::exp(-((x.x + 0.5) * (x.x + 0.5) + (x.y - 0.5) * (x.y - 0.5)) / 0.08);
  };
  c.sources.f_m = [](double, Point, Point) { return 0.5; };
  c.sources.U_L = constant_boundary(1.0);
  c.time.T = 0.2;
  c.time.dt = 0.02;
  return c;
}

inline ProblemConfig smooth_s2(double eps) {
  ProblemConfig c = smooth_s1(eps);
  c.scalings = {-1.0, 0.5, 0.5, 0.0};
  return c;
}

// Discrete L2(region) norm of u_h - exact at one level, three-point rule per triangle.
template <class F>
double nodal_l2_error(const TaggedMesh& m, const std::vector<double>& u, F&& exact) {
  double s = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const TriangleGeometry g = triangle_geometry(m, t);
    for (const auto& b : kTriangleRule) {
      double uh = 0.0;
      for (int k = 0; k < 3; ++k) uh += b[k] * u[static_cast<std::size_t>(m.triangles[t][k])];
      const double e = uh - exact(g.at(b));
      s += g.area / 3.0 * e * e;
    }
  }
  return std::sqrt(s);
}

// Manufactured problem on the un-perforated strip with uniform weights, no drift and zero
// flux on the horizontal edges: u* = T(t) S(x).
//   space-order variant: T = 1 + t (implicit Euler is exact), S = cos(pi x2) cos(pi x1 / 4)
//   time-order variant:  T = exp(-t), S = 1 + x1 / 2 (P1 Galerkin is exact in space)
struct Manufactured {
  bool space_variant = true;

  double time_factor(double t) const { return space_variant ? 1.0 + t : std::exp(-t); }
  double time_rate(double t) const { return space_variant ? 1.0 : -std::exp(-t); }
  double space(Point x) const {
    if (!space_variant) return 1.0 + 0.5 * x.x;
    return std::cos(std::numbers::pi * x.y) * std::cos(std::numbers::pi * x.x / 4.0);
  }
  double minus_laplace(Point x) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return space_variant ? (pi2 + pi2 / 16.0) * space(x) : 0.0;
  }
  double exact(double t, Point x) const { return time_factor(t) * space(x); }
  double source(double t, Point x) const { return time_rate(t) * space(x) + time_factor(t) * minus_laplace(x); }

  ProblemConfig config(double target_edge, double dt, double T) const {
    ProblemConfig c;
    c.geometry.ell = 2.0;
    c.geometry.h = 1.0;
    c.geometry.eps = 0.25;
    c.geometry.cell = empty_standard_cell();
    c.scalings = {0.0, 0.0, 0.0, 0.0};
    c.allow_violations = true;
    c.drift.coeffs = {0.0};
    c.drift.delta = 0.0;
    const Manufactured self = *this;
    c.sources.f_l = c.sources.f_r = [self](double t, Point x) { return self.source(t, x); };
    c.sources.f_m = [self](double t, Point x, Point) { return self.source(t, x); };
    c.sources.set_initial_profile([self](double, Point x) { return self.exact(0.0, x); });
    c.sources.U_L = [self](double t, double x2) { return self.exact(t, Point{-1.0, x2}); };
    c.sources.U_R = [self](double t, double x2) { return self.exact(t, Point{1.0, x2}); };
    c.time.T = T;
    c.time.dt = dt;
    c.time.tol_lin = 1e-12;
    c.mesh.target_edge = target_edge;
    return c;
  }
};

}  // namespace tl::testing
