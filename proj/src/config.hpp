#pragma once

#include <string>
#include <vector>

#include "problem.hpp"

namespace tl {

// Scalar data given by a spec string or a tabulated grid.
//   zero | constant:c | affine:a0,a1,a2[,at] | gaussian:amp,x0,y0,sigma
// affine evaluates a0 + a1*x1 + a2*x2 + at*t; gaussian is amp*exp(-|x-(x0,y0)|^2/(2 sigma^2)).
// A grid {"x":[...], "y":[...], "values":[[...]]} is interpolated bilinearly (values[j][i] at (x_i, y_j))
// and clamped outside its range.
struct ScalarSource {
  enum class Kind { Zero, Constant, Affine, Gaussian, Grid };
  Kind kind = Kind::Zero;
  std::vector<double> params;
  std::vector<double> grid_x, grid_y;
  std::vector<std::vector<double>> grid_values;

  double operator()(double t, Point p) const;
};

// Parses one source entry; `where` names the key in error messages.
ScalarSource parse_scalar_source(const std::string& text, const std::string& where);

// Full problem configuration from JSON text. Unknown keys are rejected.
ProblemConfig parse_config(const std::string& json_text);
ProblemConfig load_config(const std::string& path);

// Compact JSON of the numeric parameters (sources are not representable once parsed).
std::string config_summary_json(const ProblemConfig& config);

}  // namespace tl
