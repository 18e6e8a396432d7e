#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tl {

// Gauss-Legendre nodes and weights on (-1, 1).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int n);

// Truncated polynomial drift: sum a_k r^k on [0,1], zero elsewhere.
class DriftPolynomial {
 public:
  DriftPolynomial() : coeffs_{0.0} {}
  explicit DriftPolynomial(std::vector<double> coeffs);

  const std::vector<double>& coeffs() const { return coeffs_; }
  double sup_abs_on_unit_interval() const;

  // Polynomial value without truncation.
  double raw(double r) const;

 private:
  std::vector<double> coeffs_;
};

double eval_P(const DriftPolynomial& poly, double r);

// rho(x) = C exp(1/(x^2-1)) on |x| < 1; rho_delta(x) = rho(x/delta)/delta.
class Mollifier {
 public:
  Mollifier(double delta, int quadrature_nodes = 64);

  double delta() const { return delta_; }
  double normalization() const { return c_; }
  int quadrature_nodes() const { return static_cast<int>(rule_.nodes.size()); }
  const GaussLegendre& rule() const { return rule_; }

  double rho(double x) const;       // unit-width mollifier
  double rho_delta(double x) const; // scaled mollifier
  double sup_rho_delta() const { return c_ * 0.36787944117144233 / delta_; }

 private:
  double delta_;
  double c_ = 0.0;
  GaussLegendre rule_;
};

double eval_mollifier(const Mollifier& moll, double x);

// Scalar drift P_delta = rho_delta * P. delta == 0 evaluates P directly.
// Convolution weights are precomputed so repeated evaluation costs one
// polynomial evaluation per quadrature node.
class RegularizedDrift {
 public:
  RegularizedDrift() = default;
  RegularizedDrift(DriftPolynomial poly, double delta, int quadrature_nodes = 64);

  double operator()(double r) const;
  double delta() const { return delta_; }
  const DriftPolynomial& polynomial() const { return poly_; }
  bool regularized() const { return delta_ > 0.0; }
  bool is_zero() const;

 private:
  DriftPolynomial poly_;
  double delta_ = 0.0;
  std::vector<double> shifts_;   // y_k = delta * node_k
  std::vector<double> weights_;  // rho(node_k) * w_k, normalized to sum one
  std::vector<double> rule_nodes_;
  std::vector<double> rule_weights_;
  double scale_ = 1.0;  // C divided by the discrete weight sum
};

double eval_P_delta(const DriftPolynomial& poly, const Mollifier& moll, double r);

// ||P_delta - P||_{L2(a,b)} with P_delta built from (poly, delta, nodes); delta == 0 gives 0.
// The interval is split at the kinks {-delta, 0, delta, 1-delta, 1, 1+delta} and each piece
// integrated with a composite Gauss-Legendre rule.
double p_delta_l2_distance(const DriftPolynomial& poly, double delta, int quadrature_nodes,
                           std::pair<double, double> interval);

// CSV with columns r, P, P_delta on n equispaced samples of [r0, r1].
std::string drift_samples_csv(const RegularizedDrift& drift, double r0, double r1, int n);

}  // namespace tl
