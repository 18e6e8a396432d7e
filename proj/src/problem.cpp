#include "problem.hpp"

#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace tl {

SpaceTimeFn zero_field() {
  return [](double, Point) { return 0.0; };
}

TwoScaleFn zero_two_scale() {
  return [](double, Point, Point) { return 0.0; };
}

BoundaryFn constant_boundary(double c) {
  return [c](double, double) { return c; };
}

namespace {

constexpr int kCellSamples = 32;

template <class F>
void for_cell_samples(F&& f) {
  for (int i = 0; i <= kCellSamples; ++i) {
    for (int j = 0; j <= kCellSamples; ++j) {
      f(Point{-1.0 + 2.0 * i / kCellSamples, static_cast<double>(j) / kCellSamples});
    }
  }
}

}  // namespace

double CoefficientSet::theta() const {
  double t = std::min({D_L.d1, D_L.d2, D_R.d1, D_R.d2});
  for_cell_samples([&](Point y) {
    const Diag2 d = D_M(y);
    t = std::min({t, d.d1, d.d2});
  });
  return t;
}

void SourceData::set_initial_profile(const SpaceTimeFn& h) {
  h_l = h;
  h_r = h;
  h_m = h;
}

BoundaryLift::BoundaryLift(double ell, BoundaryFn U_L, BoundaryFn U_R)
    : ell_(ell), U_L_(std::move(U_L)), U_R_(std::move(U_R)) {
  if (!(ell > 0.0)) throw Error(ErrorCode::InvalidArgument, "strip length must be positive");
}

double BoundaryLift::operator()(double t, Point x) const {
  const double wl = (x.x - 0.5 * ell_) / ell_;
  const double wr = (x.x + 0.5 * ell_) / ell_;
  return wl * U_L_(t, x.y) - wr * U_R_(t, x.y);
}

Vec2 BoundaryLift::gradient(double t, Point x) const {
  const double wl = (x.x - 0.5 * ell_) / ell_;
  const double wr = (x.x + 0.5 * ell_) / ell_;
  constexpr double kH = 1e-6;
  const double dl = (U_L_(t, x.y + kH) - U_L_(t, x.y - kH)) / (2.0 * kH);
  const double dr = (U_R_(t, x.y + kH) - U_R_(t, x.y - kH)) / (2.0 * kH);
  return Vec2{(U_L_(t, x.y) - U_R_(t, x.y)) / ell_, wl * dl - wr * dr};
}

double BoundaryLift::time_derivative(double t, Point x) const {
  const double h = 1e-6 * std::max(1.0, std::abs(t));
  return ((*this)(t + h, x) - (*this)(t - h, x)) / (2.0 * h);
}

double BoundaryLift::d22(double t, Point x) const {
  constexpr double kH = 1e-4;
  return ((*this)(t, Point{x.x, x.y + kH}) - 2.0 * (*this)(t, x) + (*this)(t, Point{x.x, x.y - kH})) / (kH * kH);
}

double boundary_lift_eval(const BoundaryLift& lift, double t, Point x) { return lift(t, x); }

TransformedSources derive_transformed_sources(const BoundaryLift& lift, const CoefficientSet& coeffs,
                                              const SourceData& sources) {
  TransformedSources out;
  const Diag2 dl = coeffs.D_L, dr = coeffs.D_R;
  out.f_bl = [lift, dl, f = sources.f_l](double t, Point x) {
    return lift.time_derivative(t, x) - dl.d2 * lift.d22(t, x) + f(t, x);
  };
  out.f_br = [lift, dr, f = sources.f_r](double t, Point x) {
    return lift.time_derivative(t, x) - dr.d2 * lift.d22(t, x) + f(t, x);
  };
  out.f_am = [lift, f = sources.f_m](double t, Point x, Point y) { return lift.time_derivative(t, x) + f(t, x, y); };
  out.f_bm = [lift, dm = coeffs.D_M](double t, Point x, Point y) { return -dm(y).d2 * lift.d22(t, x); };
  out.g_b0 = [lift, dm = coeffs.D_M](double t, Point x, Point y) {
    const Vec2 g = lift.gradient(t, x);
    const Diag2 d = dm(y);
    return Vec2{-d.d1 * g.x, -d.d2 * g.y};
  };
  out.g_bl = [lift, dl](double t, Point x) {
    const Vec2 g = lift.gradient(t, x);
    return Vec2{dl.d1 * g.x, dl.d2 * g.y};
  };
  out.g_br = [lift, dr](double t, Point x) {
    const Vec2 g = lift.gradient(t, x);
    return Vec2{dr.d1 * g.x, dr.d2 * g.y};
  };
  out.h_bl = [lift, h = sources.h_l](double, Point x) { return h(0.0, x) - lift(0.0, x); };
  out.h_br = [lift, h = sources.h_r](double, Point x) { return h(0.0, x) - lift(0.0, x); };
  out.h_bm = [lift, h = sources.h_m](double, Point x) { return h(0.0, x) - lift(0.0, x); };
  return out;
}

const char* scaling_choice_name(ScalingChoice c) {
  switch (c) {
    case ScalingChoice::S1: return "S1";
    case ScalingChoice::S2: return "S2";
    case ScalingChoice::S3: return "S3";
    case ScalingChoice::S4: return "S4";
    case ScalingChoice::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

std::optional<ScalingChoice> parse_scaling_choice(const std::string& name) {
  for (auto c : {ScalingChoice::S1, ScalingChoice::S2, ScalingChoice::S3, ScalingChoice::S4, ScalingChoice::Unclassified}) {
    if (name == scaling_choice_name(c)) return c;
  }
  return std::nullopt;
}

namespace {

constexpr double kTol = 1e-12;

bool eq(double a, double b) { return std::abs(a - b) <= kTol; }
bool ge(double a, double b) { return a >= b - kTol; }
bool gt(double a, double b) { return a > b + kTol; }

}  // namespace

ScalingChoice classify_scaling(const ScalingExponents& e) {
  std::vector<ScalingChoice> hits;
  if (eq(e.alpha, -1.0) && eq(e.beta, 1.0) && ge(e.gamma, 1.0) && ge(e.xi, 0.5)) hits.push_back(ScalingChoice::S1);
  if (eq(e.alpha, -1.0) && gt(e.beta, 0.0) && gt(1.0, e.beta) && ge(e.gamma, e.beta) &&
      ge(e.xi, std::min(e.beta - 0.5, 0.0))) {
    hits.push_back(ScalingChoice::S2);
  }
  const double ba = e.beta - e.alpha;
  const bool fixed_common = gt(e.alpha, -1.0) && ge(e.gamma - e.alpha, 1.0) && ge(e.xi - e.alpha, 1.0);
  if (fixed_common && eq(ba, 2.0)) hits.push_back(ScalingChoice::S3);
  if (fixed_common && gt(ba, 1.0) && !eq(ba, 2.0)) hits.push_back(ScalingChoice::S4);
  if (hits.size() > 1) {
    std::ostringstream msg;
    msg << "exponents match both " << scaling_choice_name(hits[0]) << " and " << scaling_choice_name(hits[1]);
    throw Error(ErrorCode::AmbiguousClassification, msg.str());
  }
  return hits.empty() ? ScalingChoice::Unclassified : hits.front();
}

LambdaSwitches lambda_switches(ScalingChoice choice, const ScalingExponents& e) {
  LambdaSwitches s;
  s.lambda1 = choice == ScalingChoice::S4 ? 0 : 1;
  s.lambda2 = eq(e.gamma - e.alpha, 1.0) ? 1 : 0;
  return s;
}

int TimeParams::steps() const {
  if (!(T > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "T and dt must be positive");
  const double r = T / dt;
  const long n = std::lround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-8 * std::max(1.0, r)) {
    throw Error(ErrorCode::InvalidArgument, "T must be an integer multiple of dt");
  }
  return static_cast<int>(n);
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_finite_samples(const ProblemConfig& c, std::vector<Violation>& out) {
  bool coeff_ok = true;
  for_cell_samples([&](Point y) {
    const Diag2 d = c.coefficients.D_M(y);
    const Vec2 b = c.coefficients.B_M(y);
    if (!std::isfinite(d.d1) || !std::isfinite(d.d2) || !std::isfinite(b.x) || !std::isfinite(b.y)) coeff_ok = false;
  });
  for (double v : {c.coefficients.B_L.x, c.coefficients.B_L.y, c.coefficients.B_R.x, c.coefficients.B_R.y}) {
    if (!std::isfinite(v)) coeff_ok = false;
  }
  if (!coeff_ok) out.push_back({"bounded coefficients", "non-finite D or B sample", false});

  const double hw = 0.5 * c.geometry.ell;
  bool src_ok = true;
  for (double t : {0.0, 0.5 * c.time.T, c.time.T}) {
    for (int i = 0; i <= 8; ++i) {
      for (int j = 0; j <= 8; ++j) {
        const Point x{-hw + 2.0 * hw * i / 8, c.geometry.h * j / 8};
        const Point y{-1.0 + 2.0 * i / 8, static_cast<double>(j) / 8};
        const double vals[] = {c.sources.f_l(t, x), c.sources.f_r(t, x), c.sources.f_m(t, x, y),
                               c.sources.g_l(t, x), c.sources.g_r(t, x), c.sources.g_0(t, x, y),
                               c.sources.h_l(t, x), c.sources.h_r(t, x), c.sources.h_m(t, x),
                               c.sources.U_L(t, x.y), c.sources.U_R(t, x.y)};
        for (double v : vals) {
          if (!std::isfinite(v)) src_ok = false;
        }
      }
    }
  }
  if (!src_ok) out.push_back({"bounded sources", "non-finite source or data sample", false});
}

}  // namespace

std::vector<Violation> validate_assumptions(const ProblemConfig& config) {
  std::vector<Violation> out;
  const double theta = config.coefficients.theta();
  if (!(theta > 0.0)) out.push_back({"ellipticity theta>0", "got theta=" + fmt(theta), false});
  check_finite_samples(config, out);

  const ScalingExponents& e = config.scalings;
  ScalingChoice choice = ScalingChoice::Unclassified;
  try {
    choice = classify_scaling(e);
  } catch (const Error& err) {
    out.push_back({"classification", err.what(), false});
  }
  const bool demote = choice == ScalingChoice::S3 || choice == ScalingChoice::S4;
  auto a6 = [&](bool ok, const char* rule, const std::string& detail) {
    if (ok) return;
    std::string d = detail;
    if (demote) d += std::string(" (exponents classified ") + scaling_choice_name(choice) + ")";
    out.push_back({rule, d, demote});
  };
  a6(ge(e.beta, 0.0), "beta>=0", "got beta=" + fmt(e.beta));
  a6(ge(e.gamma, 0.0), "gamma>=0", "got gamma=" + fmt(e.gamma));
  a6(ge(e.gamma, e.beta), "gamma>=beta", "got gamma=" + fmt(e.gamma) + " < beta=" + fmt(e.beta));
  a6(ge(e.xi + 0.5, e.beta), "beta<=xi+1/2", "got beta=" + fmt(e.beta) + " > xi+1/2=" + fmt(e.xi + 0.5));
  a6(ge(e.beta, e.alpha + 0.5), "alpha+1/2<=beta", "got alpha+1/2=" + fmt(e.alpha + 0.5) + " > beta=" + fmt(e.beta));
  a6(ge(e.xi, e.alpha + 0.5), "alpha+1/2<=xi", "got alpha+1/2=" + fmt(e.alpha + 0.5) + " > xi=" + fmt(e.xi));
  return out;
}

void require_assumptions(const ProblemConfig& config) {
  if (config.allow_violations) return;
  std::ostringstream msg;
  bool blocking = false;
  for (const Violation& v : validate_assumptions(config)) {
    if (v.warning) continue;
    msg << (blocking ? "; " : "") << v.rule << ": " << v.detail;
    blocking = true;
  }
  if (blocking) throw Error(ErrorCode::AssumptionViolation, msg.str());
}

}  // namespace tl
