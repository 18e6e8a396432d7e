#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace tl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

std::vector<double> parse_numbers(const std::string& s, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) fail(where, "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      fail(where, "bad number '" + item + "'");
    }
  }
  return out;
}

std::size_t bracket(const std::vector<double>& g, double v) {
  if (g.size() < 2) return 0;
  const auto it = std::upper_bound(g.begin(), g.end(), v);
  const std::ptrdiff_t i = std::clamp<std::ptrdiff_t>(it - g.begin() - 1, 0, static_cast<std::ptrdiff_t>(g.size()) - 2);
  return static_cast<std::size_t>(i);
}

ScalarSource parse_grid(const json& j, const std::string& where) {
  ScalarSource s;
  s.kind = ScalarSource::Kind::Grid;
  try {
    s.grid_x = j.at("x").get<std::vector<double>>();
    s.grid_y = j.at("y").get<std::vector<double>>();
    s.grid_values = j.at("values").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    fail(where, std::string("grid needs numeric x, y, values: ") + e.what());
  }
  if (s.grid_x.empty() || s.grid_y.empty()) fail(where, "empty grid");
  if (!std::is_sorted(s.grid_x.begin(), s.grid_x.end()) || !std::is_sorted(s.grid_y.begin(), s.grid_y.end()) ||
      std::adjacent_find(s.grid_x.begin(), s.grid_x.end()) != s.grid_x.end() ||
      std::adjacent_find(s.grid_y.begin(), s.grid_y.end()) != s.grid_y.end()) {
    fail(where, "grid coordinates must be strictly increasing");
  }
  if (s.grid_values.size() != s.grid_y.size()) fail(where, "values needs one row per y");
  for (const auto& row : s.grid_values) {
    if (row.size() != s.grid_x.size()) fail(where, "values rows need one entry per x");
  }
  return s;
}

ScalarSource parse_source_json(const json& j, const std::string& where) {
  if (j.is_string()) return parse_scalar_source(j.get<std::string>(), where);
  if (j.is_number()) {
    ScalarSource s;
    s.kind = ScalarSource::Kind::Constant;
    s.params = {j.get<double>()};
    return s;
  }
  if (j.is_object() && j.contains("values")) return parse_grid(j, where);
  fail(where, "expected a source string, a number or a grid object");
}

SpaceTimeFn space_time(const ScalarSource& s) {
  return [s](double t, Point x) { return s(t, x); };
}

// Two-scale data: a plain entry depends on (t, x); {"macro": ..., "cell": ...} multiplies a
// macro factor in (t, x) with a cell factor in y.
TwoScaleFn two_scale(const json& j, const std::string& where) {
  if (j.is_object() && !j.contains("values")) {
    ScalarSource macro, cell;
    macro.kind = ScalarSource::Kind::Constant;
    macro.params = {1.0};
    cell = macro;
    for (const auto& [k, v] : j.items()) {
      if (k == "macro") {
        macro = parse_source_json(v, where + ".macro");
      } else if (k == "cell") {
        cell = parse_source_json(v, where + ".cell");
      } else {
        fail(where, "unknown key '" + k + "'");
      }
    }
    return [macro, cell](double t, Point x, Point y) { return macro(t, x) * cell(t, y); };
  }
  const ScalarSource s = parse_source_json(j, where);
  return [s](double t, Point x, Point) { return s(t, x); };
}

BoundaryFn boundary(const json& j, const std::string& where, double x1) {
  const ScalarSource s = parse_source_json(j, where);
  return [s, x1](double t, double x2) { return s(t, Point{x1, x2}); };
}

Diag2 parse_diag(const json& j, const std::string& where) {
  if (j.is_number()) return Diag2{j.get<double>(), j.get<double>()};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(where, "expected [d1, d2]");
  return Diag2{j[0].get<double>(), j[1].get<double>()};
}

Vec2 parse_vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(where, "expected [b1, b2]");
  return Vec2{j[0].get<double>(), j[1].get<double>()};
}

template <class T>
T num(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
  }
  return j.get<T>();
}

// Walks the keys of one section; unknown keys are errors.
template <class F>
void section(const json& root, const std::string& name, F&& handle) {
  if (!root.contains(name)) return;
  const json& s = root.at(name);
  if (!s.is_object()) fail(name, "expected an object");
  for (const auto& [k, v] : s.items()) {
    if (!handle(k, v)) fail(name + "." + k, "unknown key");
  }
}

}  // namespace

double ScalarSource::operator()(double t, Point p) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return params[0];
    case Kind::Affine:
      return params[0] + params[1] * p.x + params[2] * p.y + (params.size() > 3 ? params[3] * t : 0.0);
    case Kind::Gaussian: {
      const double dx = p.x - params[1], dy = p.y - params[2];
      return params[0] * std::exp(-(dx * dx + dy * dy) / (2.0 * params[3] * params[3]));
    }
    case Kind::Grid: {
      const std::size_t i = bracket(grid_x, p.x), j = bracket(grid_y, p.y);
      auto frac = [](const std::vector<double>& g, std::size_t k, double v) {
        if (g.size() < 2) return 0.0;
        return std::clamp((v - g[k]) / (g[k + 1] - g[k]), 0.0, 1.0);
      };
      const double sx = frac(grid_x, i, p.x), sy = frac(grid_y, j, p.y);
      const std::size_t i1 = std::min(i + 1, grid_x.size() - 1), j1 = std::min(j + 1, grid_y.size() - 1);
      const double lo = (1 - sx) * grid_values[j][i] + sx * grid_values[j][i1];
      const double hi = (1 - sx) * grid_values[j1][i] + sx * grid_values[j1][i1];
      return (1 - sy) * lo + sy * hi;
    }
  }
  return 0.0;
}

ScalarSource parse_scalar_source(const std::string& text, const std::string& where) {
  ScalarSource s;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "zero") {
    if (!args.empty()) fail(where, "zero takes no parameters");
    return s;
  }
  s.params = parse_numbers(args, where);
  if (name == "constant") {
    s.kind = ScalarSource::Kind::Constant;
    if (s.params.size() != 1) fail(where, "constant:c takes one value");
  } else if (name == "affine") {
    s.kind = ScalarSource::Kind::Affine;
    if (s.params.size() != 3 && s.params.size() != 4) fail(where, "affine takes a0,a1,a2[,at]");
  } else if (name == "gaussian") {
    s.kind = ScalarSource::Kind::Gaussian;
    if (s.params.size() != 4) fail(where, "gaussian takes amp,x0,y0,sigma");
    if (!(s.params[3] > 0.0)) fail(where, "gaussian sigma must be positive");
  } else {
    fail(where, "unknown source '" + name + "'");
  }
  return s;
}

ProblemConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) fail("config", "top level must be an object");
  static const std::set<std::string> kSections = {"geometry", "scalings",     "coefficients", "sources", "drift",
                                                  "time",     "mesh",         "allow_violations"};
  for (const auto& [k, v] : root.items()) {
    if (!kSections.count(k)) fail(k, "unknown section");
  }

  ProblemConfig c;
  bool obstacle_given = false;
  std::vector<double> obstacle;
  bool no_obstacle = false;
  section(root, "geometry", [&](const std::string& k, const json& v) {
    const std::string w = "geometry." + k;
    if (k == "ell") c.geometry.ell = num<double>(v, w);
    else if (k == "h") c.geometry.h = num<double>(v, w);
    else if (k == "eps") c.geometry.eps = num<double>(v, w);
    else if (k == "kappa") c.geometry.kappa_fixed = num<double>(v, w);
    else if (k == "width_mode") {
      const std::string m = v.is_string() ? v.get<std::string>() : "";
      if (m == "vanishing") c.geometry.width_mode = WidthMode::Vanishing;
      else if (m == "fixed") c.geometry.width_mode = WidthMode::Fixed;
      else fail(w, "expected \"vanishing\" or \"fixed\"");
    } else if (k == "obstacle") {
      if (v.is_null()) {
        no_obstacle = true;
      } else {
        try {
          obstacle = v.get<std::vector<double>>();
        } catch (const json::exception&) {
          fail(w, "expected [a1, b1, a2, b2] or null");
        }
        if (obstacle.size() != 4) fail(w, "expected [a1, b1, a2, b2] or null");
        obstacle_given = true;
      }
    } else return false;
    return true;
  });
  if (no_obstacle) c.geometry.cell = empty_standard_cell();
  else if (obstacle_given) c.geometry.cell = build_standard_cell(obstacle[0], obstacle[1], obstacle[2], obstacle[3]);

  section(root, "scalings", [&](const std::string& k, const json& v) {
    const std::string w = "scalings." + k;
    if (k == "alpha") c.scalings.alpha = num<double>(v, w);
    else if (k == "beta") c.scalings.beta = num<double>(v, w);
    else if (k == "gamma") c.scalings.gamma = num<double>(v, w);
    else if (k == "xi") c.scalings.xi = num<double>(v, w);
    else return false;
    return true;
  });

  // Defaults: identity diffusion everywhere, no drift field.
  c.coefficients.D_L = c.coefficients.D_R = Diag2{1.0, 1.0};
  c.coefficients.D_M = [](Point) { return Diag2{1.0, 1.0}; };
  section(root, "coefficients", [&](const std::string& k, const json& v) {
    const std::string w = "coefficients." + k;
    if (k == "D_L") c.coefficients.D_L = parse_diag(v, w);
    else if (k == "D_R") c.coefficients.D_R = parse_diag(v, w);
    else if (k == "B_L") c.coefficients.B_L = parse_vec(v, w);
    else if (k == "B_R") c.coefficients.B_R = parse_vec(v, w);
    else if (k == "D_M") {
      const Diag2 d = parse_diag(v, w);
      c.coefficients.D_M = [d](Point) { return d; };
    } else if (k == "B_M") {
      const Vec2 b = parse_vec(v, w);
      c.coefficients.B_M = [b](Point) { return b; };
    } else return false;
    return true;
  });

  const double xl = -0.5 * c.geometry.ell, xr = 0.5 * c.geometry.ell;
  section(root, "sources", [&](const std::string& k, const json& v) {
    const std::string w = "sources." + k;
    SourceData& s = c.sources;
    if (k == "f_l") s.f_l = space_time(parse_source_json(v, w));
    else if (k == "f_r") s.f_r = space_time(parse_source_json(v, w));
    else if (k == "f_m") s.f_m = two_scale(v, w);
    else if (k == "g_l") s.g_l = space_time(parse_source_json(v, w));
    else if (k == "g_r") s.g_r = space_time(parse_source_json(v, w));
    else if (k == "g_0") s.g_0 = two_scale(v, w);
    else if (k == "h_l") s.h_l = space_time(parse_source_json(v, w));
    else if (k == "h_r") s.h_r = space_time(parse_source_json(v, w));
    else if (k == "h_m") s.h_m = space_time(parse_source_json(v, w));
    else if (k == "h") s.set_initial_profile(space_time(parse_source_json(v, w)));
    else if (k == "U_L") s.U_L = boundary(v, w, xl);
    else if (k == "U_R") s.U_R = boundary(v, w, xr);
    else return false;
    return true;
  });

  section(root, "drift", [&](const std::string& k, const json& v) {
    const std::string w = "drift." + k;
    if (k == "coeffs") {
      try {
        c.drift.coeffs = v.get<std::vector<double>>();
      } catch (const json::exception&) {
        fail(w, "expected a list of numbers");
      }
      if (c.drift.coeffs.empty()) fail(w, "needs at least one coefficient");
    } else if (k == "delta") {
      c.drift.delta = num<double>(v, w);
      if (c.drift.delta < 0.0) fail(w, "must be nonnegative");
    } else if (k == "quadrature_nodes") {
      c.drift.quadrature_nodes = num<int>(v, w);
      if (c.drift.quadrature_nodes < 2) fail(w, "must be at least 2");
    } else return false;
    return true;
  });

  section(root, "time", [&](const std::string& k, const json& v) {
    const std::string w = "time." + k;
    if (k == "T") c.time.T = num<double>(v, w);
    else if (k == "dt") c.time.dt = num<double>(v, w);
    else if (k == "drift_mode") {
      const std::string m = v.is_string() ? v.get<std::string>() : "";
      if (m == "lagged") c.time.drift_mode = DriftMode::Lagged;
      else if (m == "picard") c.time.drift_mode = DriftMode::Picard;
      else fail(w, "expected \"lagged\" or \"picard\"");
    } else if (k == "tol_picard") c.time.tol_picard = num<double>(v, w);
    else if (k == "max_picard") c.time.max_picard = num<int>(v, w);
    else if (k == "tol_lin") c.time.tol_lin = num<double>(v, w);
    else if (k == "output_every") c.time.output_every = num<int>(v, w);
    else return false;
    return true;
  });
  c.time.steps();  // rejects T not a multiple of dt

  section(root, "mesh", [&](const std::string& k, const json& v) {
    const std::string w = "mesh." + k;
    MeshParams& m = c.mesh;
    if (k == "target_edge") m.target_edge = num<double>(v, w);
    else if (k == "cell_target_edge") m.cell_target_edge = num<double>(v, w);
    else if (k == "n_sigma") m.n_sigma = num<int>(v, w);
    else if (k == "layer_columns") m.layer_columns = num<int>(v, w);
    else if (k == "cell_line_cells") m.cell_line_cells = num<int>(v, w);
    else if (k == "tol_iface") m.tol_iface = num<double>(v, w);
    else if (k == "max_sweeps") m.max_sweeps = num<int>(v, w);
    else return false;
    return true;
  });
  if (!(c.mesh.target_edge > 0.0) || !(c.mesh.cell_target_edge > 0.0)) fail("mesh", "edge lengths must be positive");
  if (c.mesh.n_sigma < 1 || c.mesh.layer_columns < 3 || c.mesh.cell_line_cells < 2 || c.mesh.max_sweeps < 1) {
    fail("mesh", "n_sigma >= 1, layer_columns >= 3, cell_line_cells >= 2, max_sweeps >= 1 required");
  }

  if (root.contains("allow_violations")) {
    if (!root["allow_violations"].is_boolean()) fail("allow_violations", "expected true or false");
    c.allow_violations = root["allow_violations"].get<bool>();
  }
  c.geometry.period_count_checked();
  return c;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_summary_json(const ProblemConfig& c) {
  const LayerGeometry& g = c.geometry;
  json j;
  j["geometry"] = {{"ell", g.ell},
                   {"h", g.h},
                   {"eps", g.eps},
                   {"width_mode", g.width_mode == WidthMode::Fixed ? "fixed" : "vanishing"},
                   {"kappa", g.kappa()}};
  if (g.cell.has_obstacle()) {
    j["geometry"]["obstacle"] = {g.cell.a1(), g.cell.b1(), g.cell.a2(), g.cell.b2()};
  } else {
    j["geometry"]["obstacle"] = nullptr;
  }
  j["scalings"] = {{"alpha", c.scalings.alpha}, {"beta", c.scalings.beta}, {"gamma", c.scalings.gamma},
                   {"xi", c.scalings.xi}};
  try {
    j["classification"] = scaling_choice_name(classify_scaling(c.scalings));
  } catch (const Error&) {
    j["classification"] = "ambiguous";
  }
  j["drift"] = {{"coeffs", c.drift.coeffs}, {"delta", c.drift.delta}, {"quadrature_nodes", c.drift.quadrature_nodes}};
  j["time"] = {{"T", c.time.T},
               {"dt", c.time.dt},
               {"drift_mode", c.time.drift_mode == DriftMode::Picard ? "picard" : "lagged"},
               {"steps", c.time.steps()}};
  j["mesh"] = {{"target_edge", c.mesh.target_edge},
               {"cell_target_edge", c.mesh.cell_target_edge},
               {"n_sigma", c.mesh.n_sigma},
               {"layer_columns", c.mesh.layer_columns},
               {"cell_line_cells", c.mesh.cell_line_cells}};
  return j.dump();
}

}  // namespace tl
