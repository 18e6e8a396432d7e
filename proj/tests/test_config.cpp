#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"

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

}  // namespace

TEST_CASE("shipped configs parse and classify") {
  const std::pair<const char*, ScalingChoice> cases[] = {{"s1_smooth.json", ScalingChoice::S1},
                                                         {"s2_smooth.json", ScalingChoice::S2},
                                                         {"s3_fixed.json", ScalingChoice::S3},
                                                         {"s4_fixed.json", ScalingChoice::S4}};
  for (const auto& [name, expected] : cases) {
    CAPTURE(name);
    const ProblemConfig c = load_config(std::string(THINLAYER_CONFIG_DIR) + "/" + name);
    CHECK(classify_scaling(c.scalings) == expected);
    const auto summary = nlohmann::json::parse(config_summary_json(c));
    CHECK(summary["classification"] == scaling_choice_name(expected));
  }
}

TEST_CASE("parsed values") {
  const ProblemConfig c = parse_config(R"({
    "geometry": {"ell": 3.0, "h": 1.0, "eps": 0.125, "width_mode": "fixed", "kappa": 0.4, "obstacle": null},
    "scalings": {"alpha": 0, "beta": 2, "gamma": 1, "xi": 1},
    "coefficients": {"D_L": 2.0, "D_R": [0.5, 0.25], "B_M": [0.0, 0.5]},
    "sources": {"U_L": "affine:1,0,2", "f_m": {"macro": "constant:2", "cell": "affine:0,0,1"}, "h": "constant:0.5"},
    "drift": {"coeffs": [0, 1, -1], "delta": 0.05},
    "time": {"T": 1.0, "dt": 0.25, "drift_mode": "picard"},
    "mesh": {"layer_columns": 5},
    "allow_violations": true
  })");
  CHECK(c.geometry.ell == 3.0);
  CHECK(c.geometry.kappa() == 0.4);
  CHECK_FALSE(c.geometry.cell.has_obstacle());
  CHECK(c.coefficients.D_L.d2 == 2.0);
  CHECK(c.coefficients.D_R.d2 == 0.25);
  CHECK(c.coefficients.D_M(Point{0, 0}).d1 == 1.0);
  CHECK(c.coefficients.B_M(Point{0, 0}).y == 0.5);
  // U_L is evaluated on x1 = -ell/2.
  CHECK(c.sources.U_L(0.0, 0.5) == doctest::Approx(2.0));
  CHECK(c.sources.f_m(0.0, Point{0.1, 0.2}, Point{0.0, 0.75}) == doctest::Approx(1.5));
  CHECK(c.sources.h_l(0.0, Point{}) == 0.5);
  CHECK(c.sources.h_m(0.0, Point{}) == 0.5);
  CHECK(c.drift.delta == 0.05);
  CHECK(c.time.drift_mode == DriftMode::Picard);
  CHECK(c.time.steps() == 4);
  CHECK(c.mesh.layer_columns == 5);
  CHECK(c.allow_violations);
}

TEST_CASE("scalar sources") {
  CHECK(parse_scalar_source("zero", "s")(1.0, {2, 3}) == 0.0);
  CHECK(parse_scalar_source("constant:2.5", "s")(1.0, {2, 3}) == 2.5);
  CHECK(parse_scalar_source("affine:1,2,3", "s")(9.0, {1, 1}) == 6.0);
  CHECK(parse_scalar_source("affine:1,2,3,4", "s")(0.5, {1, 1}) == 8.0);
  const ScalarSource g = parse_scalar_source("gaussian:2,0,0,1", "s");
  CHECK(g(0.0, {0, 0}) == 2.0);
  CHECK(g(0.0, {1, 0}) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK_THROWS_AS(parse_scalar_source("constant:1,2", "s"), Error);
  CHECK_THROWS_AS(parse_scalar_source("gaussian:1,0,0,0", "s"), Error);
  CHECK_THROWS_AS(parse_scalar_source("cubic:1", "s"), Error);
}

TEST_CASE("grid sources interpolate bilinearly and clamp") {
  const ProblemConfig c = parse_config(R"({"sources": {"f_l": {"x": [0, 1], "y": [0, 2], "values": [[0, 1], [2, 3]]}}})");
  CHECK(c.sources.f_l(0.0, {0.5, 1.0}) == doctest::Approx(1.5));
  CHECK(c.sources.f_l(0.0, {1.0, 2.0}) == doctest::Approx(3.0));
  CHECK(c.sources.f_l(0.0, {5.0, -1.0}) == doctest::Approx(1.0));
}

TEST_CASE("config errors") {
  CHECK(code_of([] { parse_config("{"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"geometri": {}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"geometry": {"epsilon": 0.1}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"geometry": {"eps": "small"}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"geometry": {"eps": 0.3}})"); }) == ErrorCode::NonIntegerPeriodCount);
  CHECK(code_of([] { parse_config(R"({"geometry": {"obstacle": [0.5, -0.5, 0.2, 0.4]}})"); }) ==
        ErrorCode::DegenerateObstacle);
  CHECK(code_of([] { parse_config(R"({"time": {"T": 1.0, "dt": 0.3}})"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { parse_config(R"({"mesh": {"layer_columns": 2}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"drift": {"delta": -1}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::IoError);
}

TEST_CASE("summary survives ambiguous exponents") {
  ProblemConfig c;
  c.scalings = {-1.0, 1.0, 1.0, 1.0};
  const auto j = nlohmann::json::parse(config_summary_json(c));
  CHECK(j["classification"] == "S1");
  CHECK(j["time"]["steps"] == c.time.steps());
}
