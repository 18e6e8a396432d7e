#include "drift.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "errors.hpp"

namespace tl {

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "quadrature needs at least one node");
  GaussLegendre g;
  g.nodes.resize(static_cast<std::size_t>(n));
  g.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged root.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.nodes[static_cast<std::size_t>(i)] = -x;
    g.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    g.weights[static_cast<std::size_t>(i)] = w;
    g.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) g.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return g;
}

DriftPolynomial::DriftPolynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw Error(ErrorCode::InvalidArgument, "drift polynomial needs at least one coefficient");
}

double DriftPolynomial::raw(double r) const {
  double v = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) v = v * r + *it;
  return v;
}

double DriftPolynomial::sup_abs_on_unit_interval() const {
  double s = 0.0;
  constexpr int kSamples = 4096;
  for (int i = 0; i <= kSamples; ++i) s = std::max(s, std::abs(raw(static_cast<double>(i) / kSamples)));
  return s;
}

double eval_P(const DriftPolynomial& poly, double r) {
  if (r < 0.0 || r > 1.0) return 0.0;
  return poly.raw(r);
}

namespace {

double bump(double x) {
  const double d = x * x - 1.0;
  if (d >= 0.0) return 0.0;
  return std::exp(1.0 / d);
}

// Integral of exp(1/(x^2-1)) over (-1,1), composite 64-point Gauss-Legendre on 64 panels.
double bump_integral() {
  static const double value = [] {
    const GaussLegendre g = gauss_legendre(64);
    constexpr int kPanels = 64;
    double sum = 0.0;
    for (int p = 0; p < kPanels; ++p) {
      const double a = -1.0 + 2.0 * p / kPanels;
      const double b = a + 2.0 / kPanels;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (std::size_t k = 0; k < g.nodes.size(); ++k) sum += half * g.weights[k] * bump(mid + half * g.nodes[k]);
    }
    return sum;
  }();
  return value;
}

}  // namespace

Mollifier::Mollifier(double delta, int quadrature_nodes) : delta_(delta), rule_(gauss_legendre(quadrature_nodes)) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "mollifier width must be positive");
  c_ = 1.0 / bump_integral();
}

double Mollifier::rho(double x) const { return c_ * bump(x); }

double Mollifier::rho_delta(double x) const { return rho(x / delta_) / delta_; }

double eval_mollifier(const Mollifier& moll, double x) { return moll.rho(x); }

RegularizedDrift::RegularizedDrift(DriftPolynomial poly, double delta, int quadrature_nodes)
    : poly_(std::move(poly)), delta_(delta) {
  if (delta < 0.0) throw Error(ErrorCode::InvalidArgument, "delta must be non-negative");
  if (delta == 0.0) return;
  const Mollifier moll(delta, quadrature_nodes);
  const auto& rule = moll.rule();
  shifts_.resize(rule.nodes.size());
  weights_.resize(rule.nodes.size());
  double total = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    shifts_[k] = delta * rule.nodes[k];
    weights_[k] = moll.rho(rule.nodes[k]) * rule.weights[k];
    total += weights_[k];
  }
  // Discrete weights sum to one so that constants are reproduced exactly.
  for (double& w : weights_) w /= total;
  rule_nodes_ = rule.nodes;
  rule_weights_ = rule.weights;
  scale_ = moll.normalization() / total;
}

double RegularizedDrift::operator()(double r) const {
  if (delta_ == 0.0) return eval_P(poly_, r);
  if (r <= -delta_ || r >= 1.0 + delta_) return 0.0;
  if (r - delta_ >= 0.0 && r + delta_ <= 1.0) {
    // Window inside [0,1]: the integrand is smooth, use the precomputed weights.
    double s = 0.0;
    for (std::size_t k = 0; k < shifts_.size(); ++k) s += weights_[k] * poly_.raw(r - shifts_[k]);
    return s;
  }
  // P(r - y) jumps at y = r and y = r - 1; integrate only over its support.
  const double lo = std::max(-delta_, r - 1.0);
  const double hi = std::min(delta_, r);
  if (!(hi > lo)) return 0.0;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double s = 0.0;
  for (std::size_t k = 0; k < rule_nodes_.size(); ++k) {
    const double y = mid + half * rule_nodes_[k];
    const double u = y / delta_;
    const double d = u * u - 1.0;
    if (d >= 0.0) continue;
    s += rule_weights_[k] * std::exp(1.0 / d) * poly_.raw(r - y);
  }
  return s * half * scale_ / delta_;
}

bool RegularizedDrift::is_zero() const {
  return std::all_of(poly_.coeffs().begin(), poly_.coeffs().end(), [](double a) { return a == 0.0; });
}

double eval_P_delta(const DriftPolynomial& poly, const Mollifier& moll, double r) {
  const RegularizedDrift drift(poly, moll.delta(), moll.quadrature_nodes());
  return drift(r);
}

double p_delta_l2_distance(const DriftPolynomial& poly, double delta, int quadrature_nodes,
                           std::pair<double, double> interval) {
  if (delta == 0.0) return 0.0;
  const auto [a, b] = interval;
  if (!(a <= -delta && b >= 1.0 + delta)) {
    throw Error(ErrorCode::InvalidArgument, "integration interval must contain (-delta, 1+delta)");
  }
  const RegularizedDrift drift(poly, delta, quadrature_nodes);
  std::vector<double> breaks{a, -delta, 0.0, delta, 1.0 - delta, 1.0, 1.0 + delta, b};
  std::sort(breaks.begin(), breaks.end());
  const GaussLegendre g = gauss_legendre(32);
  constexpr int kPanels = 16;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(breaks[i], -delta), hi = std::min(breaks[i + 1], 1.0 + delta);
    if (!(hi > lo)) continue;
    for (int p = 0; p < kPanels; ++p) {
      const double pa = lo + (hi - lo) * p / kPanels;
      const double pb = lo + (hi - lo) * (p + 1) / kPanels;
      const double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
      for (std::size_t k = 0; k < g.nodes.size(); ++k) {
        const double r = mid + half * g.nodes[k];
        const double diff = drift(r) - eval_P(poly, r);
        sum += half * g.weights[k] * diff * diff;
      }
    }
  }
  return std::sqrt(sum);
}

std::string drift_samples_csv(const RegularizedDrift& drift, double r0, double r1, int n) {
  if (n < 2 || !(r1 > r0)) throw Error(ErrorCode::InvalidArgument, "need n >= 2 samples on r0 < r1");
  std::ostringstream os;
  os << std::setprecision(12) << "r,P,P_delta\n";
  for (int i = 0; i < n; ++i) {
    const double r = r0 + (r1 - r0) * i / (n - 1);
    os << r << ',' << eval_P(drift.polynomial(), r) << ',' << drift(r) << '\n';
  }
  return os.str();
}

}  // namespace tl
