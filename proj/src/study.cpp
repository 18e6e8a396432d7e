#include "study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>

#include "config.hpp"
#include "errors.hpp"

namespace tl {

namespace {

// Nodal weights of one field at one point, empty when the point lies outside the region.
struct Probe {
  std::array<int, 3> v{};
  std::array<double, 3> w{};
  bool inside = false;
};

std::vector<Probe> probe_points(const TransientField& f, const std::vector<Point>& pts, Region region) {
  if (!f.mesh) throw Error(ErrorCode::RegionMismatch, "field without mesh");
  const PointLocator loc(*f.mesh);
  std::vector<Probe> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto hit = loc.locate(pts[i]);
    if (!hit || f.mesh->regions[static_cast<std::size_t>(hit->triangle)] != region) continue;
    const auto& tri = f.mesh->triangles[static_cast<std::size_t>(hit->triangle)];
    out[i].inside = true;
    for (int k = 0; k < 3; ++k) {
      out[i].v[static_cast<std::size_t>(k)] = tri[static_cast<std::size_t>(k)];
      out[i].w[static_cast<std::size_t>(k)] = hit->bary[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

// Level index and weight of the later level for time t (clamped to the stored range).
std::pair<std::size_t, double> time_weight(const std::vector<double>& times, double t) {
  if (times.size() < 2 || t <= times.front()) return {0, 0.0};
  if (t >= times.back()) return {times.size() - 2, 1.0};
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  return {k, (t - times[k]) / (times[k + 1] - times[k])};
}

double probe_value(const TransientField& f, const Probe& p, std::size_t level) {
  if (!p.inside) return 0.0;
  const auto& vals = f.values[level];
  return p.w[0] * vals[static_cast<std::size_t>(p.v[0])] + p.w[1] * vals[static_cast<std::size_t>(p.v[1])] +
         p.w[2] * vals[static_cast<std::size_t>(p.v[2])];
}

double field_at(const TransientField& f, const Probe& p, double t) {
  if (f.times.size() == 1) return probe_value(f, p, 0);
  const auto [k, s] = time_weight(f.times, t);
  return (1.0 - s) * probe_value(f, p, k) + s * probe_value(f, p, k + 1);
}

double interp_series(const std::vector<double>& times, const std::vector<double>& v, double t) {
  if (times.size() == 1) return v.front();
  const auto [k, s] = time_weight(times, t);
  return (1.0 - s) * v[k] + s * v[k + 1];
}

std::vector<double> window_times(const std::vector<double>& a, const std::vector<double>& b, double t0, double t1) {
  std::set<double> s{t0, t1};
  for (double t : a) {
    if (t > t0 && t < t1) s.insert(t);
  }
  for (double t : b) {
    if (t > t0 && t < t1) s.insert(t);
  }
  // Merge times closer than round-off.
  std::vector<double> out;
  for (double t : s) {
    if (out.empty() || t - out.back() > 1e-12 * std::max(1.0, std::abs(t))) out.push_back(t);
  }
  return out;
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

ProblemConfig with_delta(ProblemConfig c, double delta) {
  c.drift.delta = delta;
  return c;
}

std::string member_label(bool micro, double delta) {
  return std::string(micro ? "P_eps" : "P_0") + (delta > 0.0 ? "^delta" : "^0");
}

std::string meta_record(const std::string& label, double sweep_value, const ProblemConfig& c, const std::string& level,
                        double wall_ms) {
  nlohmann::json j;
  j["label"] = label;
  j["sweep_value"] = sweep_value;
  j["level"] = level;
  j["eps"] = c.geometry.eps;
  j["delta"] = c.drift.delta;
  j["wall_ms"] = wall_ms;
  j["config"] = nlohmann::json::parse(config_summary_json(c));
  return j.dump();
}

void fit_rates(ConvergenceReport& r, const std::vector<std::size_t>& rows) {
  if (rows.size() < 3) return;
  auto pick = [&](const std::vector<double>& v) {
    std::vector<double> out;
    for (std::size_t i : rows) out.push_back(v[i]);
    return out;
  };
  const std::vector<double> p = pick(r.sweep_values);
  auto rate = [&](const std::vector<double>& v) -> std::optional<double> {
    const std::vector<double> e = pick(v);
    if (std::any_of(e.begin(), e.end(), [](double x) { return !(x > 0.0); })) return std::nullopt;
    return fit_rate(e, p);
  };
  r.rate_L = rate(r.err_L);
  r.rate_R = rate(r.err_R);
  r.rate_layer_avg = rate(r.err_layer_avg);
}

double errors_by_region(const TransientField& a, const MacroFields& m, Region region, double T) {
  const TransientField& b = region == Region::Left ? m.left : m.right;
  return l2_error(a, b, region, 0.0, T);
}

}  // namespace

double l2_difference(const TransientField& a, const TransientField& b, const TaggedMesh& quad_mesh, Region region,
                     double t0, double t1) {
  if (!(t1 >= t0)) throw Error(ErrorCode::InvalidArgument, "time window must satisfy t0 <= t1");
  if (a.levels() == 0 || b.levels() == 0) throw Error(ErrorCode::InvalidArgument, "field without time levels");
  std::vector<Point> pts;
  std::vector<double> wts;
  for (std::size_t k = 0; k < quad_mesh.num_triangles(); ++k) {
    if (quad_mesh.regions[k] != region) continue;
    const TriangleGeometry g = triangle_geometry(quad_mesh, k);
    for (const auto& q : kTriangleRule) {
      pts.push_back(g.at(q));
      wts.push_back(g.area / 3.0);
    }
  }
  if (pts.empty()) {
    throw Error(ErrorCode::RegionMismatch, std::string("no triangles of region ") + region_name(region));
  }
  const std::vector<Probe> pa = probe_points(a, pts, region);
  const std::vector<Probe> pb = probe_points(b, pts, region);
  auto any_inside = [](const std::vector<Probe>& p) {
    return std::any_of(p.begin(), p.end(), [](const Probe& x) { return x.inside; });
  };
  if (!any_inside(pa) || !any_inside(pb)) {
    throw Error(ErrorCode::RegionMismatch, std::string("fields do not overlap on region ") + region_name(region));
  }

  auto space_integral = [&](double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = field_at(a, pa[i], t) - field_at(b, pb[i], t);
      s += wts[i] * d * d;
    }
    return s;
  };
  const std::vector<double> times = window_times(a.times, b.times, t0, t1);
  if (times.size() == 1) return std::sqrt(space_integral(times[0]));
  double total = 0.0;
  double prev = space_integral(times[0]);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double cur = space_integral(times[k]);
    total += 0.5 * (times[k] - times[k - 1]) * (prev + cur);
    prev = cur;
  }
  return std::sqrt(total);
}

double l2_error(const TransientField& a, const TransientField& b, Region region, double t0, double t1) {
  if (!b.mesh) throw Error(ErrorCode::RegionMismatch, "field without mesh");
  return l2_difference(a, b, *b.mesh, region, t0, t1);
}

double series_l2_difference(const std::vector<double>& times, const std::vector<double>& a,
                            const std::vector<double>& b) {
  if (a.size() != times.size() || b.size() != times.size()) {
    throw Error(ErrorCode::InvalidArgument, "series lengths differ from the time grid");
  }
  if (times.size() == 1) return std::abs(a[0] - b[0]);
  double total = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double d0 = a[k - 1] - b[k - 1], d1 = a[k] - b[k];
    total += 0.5 * (times[k] - times[k - 1]) * (d0 * d0 + d1 * d1);
  }
  return std::sqrt(total);
}

double fit_rate(const std::vector<double>& values, const std::vector<double>& parameters) {
  if (values.size() != parameters.size()) throw Error(ErrorCode::InvalidArgument, "values and parameters differ in length");
  if (values.size() < 3) throw Error(ErrorCode::SweepTooShort, "a rate needs at least three points");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !(parameters[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput, "rates need positive values and parameters");
    }
  }
  const double n = static_cast<double>(values.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = std::log(parameters[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error(ErrorCode::NonPositiveInput, "parameters must not all be equal");
  return (n * sxy - sx * sy) / den;
}

bool ConvergenceReport::bulk_errors_decreasing() const {
  for (std::size_t i = 1; i < err_L.size(); ++i) {
    if (!(err_L[i] < err_L[i - 1]) || !(err_R[i] < err_R[i - 1])) return false;
  }
  return true;
}

MacroFields solve_macro(const ProblemConfig& config, ScalingChoice choice) {
  MacroFields m;
  m.choice = choice;
  switch (choice) {
    case ScalingChoice::S1: {
      MacroS1Solution s = solve_macro_S1(config);
      m.left = std::move(s.u_l);
      m.right = std::move(s.u_r);
      m.layer_average = std::move(s.layer_average);
      break;
    }
    case ScalingChoice::S2: {
      MacroS2Solution s = solve_macro_S2(config);
      m.left = s.u;
      m.right = std::move(s.u);
      m.layer_average = std::move(s.layer_average);
      break;
    }
    case ScalingChoice::S3:
    case ScalingChoice::S4: {
      MacroS3Solution s = solve_macro_S3S4(config);
      m.left = std::move(s.u_l);
      m.right = std::move(s.u_r);
      m.layer_average = std::move(s.layer_average);
      break;
    }
    case ScalingChoice::Unclassified:
      throw Error(ErrorCode::InvalidArgument, "no macro model for unclassified exponents");
  }
  m.times = m.left.times;
  return m;
}

ConvergenceReport study_eps(const ProblemConfig& config, const std::vector<double>& eps_values, ScalingChoice choice,
                            const StudyOptions& options) {
  if (eps_values.size() < 3) throw Error(ErrorCode::SweepTooShort, "an eps sweep needs at least three values");
  for (double e : eps_values) {
    LayerGeometry g = config.geometry;
    g.eps = e;
    g.period_count_checked();
  }
  ConvergenceReport r;
  r.parameter = "eps";
  const double T = config.time.T;

  const auto t_macro = std::chrono::steady_clock::now();
  const MacroFields macro = solve_macro(config, choice);
  const double macro_ms = options.deterministic ? 0.0 : ms_since(t_macro);

  for (double e : eps_values) {
    ProblemConfig c = config;
    c.geometry.eps = e;
    const auto start = std::chrono::steady_clock::now();
    const MicroSolution micro = solve_micro(c);
    const double ms = options.deterministic ? 0.0 : ms_since(start);
    const EnergyReport en = energy_report(micro, c.scalings);
    const std::vector<double> avg = layer_average_series(micro);
    std::vector<double> macro_avg;
    for (double t : micro.u.times) macro_avg.push_back(interp_series(macro.times, macro.layer_average, t));

    r.sweep_values.push_back(e);
    r.labels.push_back(member_label(true, c.drift.delta));
    r.err_L.push_back(errors_by_region(micro.u, macro, Region::Left, T));
    r.err_R.push_back(errors_by_region(micro.u, macro, Region::Right, T));
    r.err_layer_avg.push_back(series_l2_difference(micro.u.times, avg, macro_avg));
    r.e1.push_back(en.e1);
    r.e2.push_back(en.e2);
    r.e3.push_back(en.e3);
    r.wall_ms.push_back(ms);
    r.run_meta.push_back(meta_record(r.labels.back(), e, c, "micro", ms));
  }
  r.run_meta.push_back(meta_record(member_label(false, config.drift.delta), 0.0, config,
                                   std::string("macro ") + scaling_choice_name(choice), macro_ms));
  std::vector<std::size_t> rows(eps_values.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  fit_rates(r, rows);
  return r;
}

ConvergenceReport study_delta(const ProblemConfig& config, const std::vector<double>& delta_values, StudyLevel level,
                              ScalingChoice choice, const StudyOptions& options) {
  ConvergenceReport r;
  r.parameter = "delta";
  std::vector<double> deltas;
  for (double d : delta_values) {
    if (d < 0.0 || !std::isfinite(d)) throw Error(ErrorCode::InvalidArgument, "delta values must be finite and >= 0");
    if (std::find(deltas.begin(), deltas.end(), d) != deltas.end()) {
      r.warnings.push_back("duplicate delta " + fmt(d) + " removed");
      continue;
    }
    deltas.push_back(d);
  }
  if (!std::is_sorted(deltas.rbegin(), deltas.rend())) {
    throw Error(ErrorCode::InvalidArgument, "delta values must be sorted in descending order");
  }
  if (deltas.empty() || deltas.back() != 0.0) throw Error(ErrorCode::InvalidArgument, "delta list must end with 0");
  if (deltas.size() < 2) throw Error(ErrorCode::SweepTooShort, "a delta sweep needs a positive delta besides 0");
  const double T = config.time.T;
  const bool micro = level == StudyLevel::Micro;
  const std::string level_name = micro ? "micro" : std::string("macro ") + scaling_choice_name(choice);

  struct Member {
    TransientField left, right;
    std::vector<double> times, avg;
    EnergyReport energy;
    bool has_energy = false;
    double ms = 0.0;
  };
  auto run = [&](double delta) {
    const ProblemConfig c = with_delta(config, delta);
    Member m;
    const auto start = std::chrono::steady_clock::now();
    if (micro) {
      MicroSolution s = solve_micro(c);
      m.energy = energy_report(s, c.scalings);
      m.has_energy = true;
      m.avg = layer_average_series(s);
      m.times = s.u.times;
      m.left = s.u;
      m.right = std::move(s.u);
    } else {
      MacroFields f = solve_macro(c, choice);
      m.left = std::move(f.left);
      m.right = std::move(f.right);
      m.avg = std::move(f.layer_average);
      m.times = std::move(f.times);
    }
    m.ms = options.deterministic ? 0.0 : ms_since(start);
    return m;
  };

  const Member ref = run(0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto add_row = [&](double delta, const Member& m, double el, double er, double ea) {
    r.sweep_values.push_back(delta);
    r.labels.push_back(member_label(micro, delta));
    r.err_L.push_back(el);
    r.err_R.push_back(er);
    r.err_layer_avg.push_back(ea);
    r.e1.push_back(m.has_energy ? m.energy.e1 : nan);
    r.e2.push_back(m.has_energy ? m.energy.e2 : nan);
    r.e3.push_back(m.has_energy ? m.energy.e3 : nan);
    r.wall_ms.push_back(m.ms);
    r.run_meta.push_back(meta_record(r.labels.back(), delta, with_delta(config, delta), level_name, m.ms));
  };
  std::vector<std::size_t> positive;
  for (double d : deltas) {
    if (d == 0.0) break;
    const Member m = run(d);
    if (m.times.size() != ref.times.size()) throw Error(ErrorCode::Internal, "time grids differ between members");
    positive.push_back(r.sweep_values.size());
    add_row(d, m, l2_error(m.left, ref.left, Region::Left, 0.0, T), l2_error(m.right, ref.right, Region::Right, 0.0, T),
            series_l2_difference(m.times, m.avg, ref.avg));
  }
  add_row(0.0, ref, 0.0, 0.0, 0.0);
  fit_rates(r, positive);
  return r;
}

DiagramAudit diagram_audit(const ProblemConfig& config, double eps, double delta, ScalingChoice choice) {
  ProblemConfig c = config;
  c.geometry.eps = eps;
  const MicroSolution md = solve_micro(with_delta(c, delta));
  const MicroSolution m0 = solve_micro(with_delta(c, 0.0));
  const MacroFields macro = solve_macro(with_delta(config, 0.0), choice);
  const double T = config.time.T;
  auto both = [&](const TransientField& a, const TransientField& bl, const TransientField& br) {
    const double l = l2_difference(a, bl, *macro.left.mesh, Region::Left, 0.0, T);
    const double r = l2_difference(a, br, *macro.right.mesh, Region::Right, 0.0, T);
    return std::sqrt(l * l + r * r);
  };
  DiagramAudit a;
  a.micro_delta_to_macro0 = both(md.u, macro.left, macro.right);
  a.micro_delta_to_micro0 = both(md.u, m0.u, m0.u);
  a.micro0_to_macro0 = both(m0.u, macro.left, macro.right);
  return a;
}

std::string report_csv(const ConvergenceReport& r) {
  std::ostringstream os;
  os << "sweep_value,err_L,err_R,err_layer_avg,e1,e2,e3,wall_ms\n";
  for (std::size_t i = 0; i < r.sweep_values.size(); ++i) {
    os << fmt(r.sweep_values[i]) << ',' << fmt(r.err_L[i]) << ',' << fmt(r.err_R[i]) << ',' << fmt(r.err_layer_avg[i])
       << ',' << fmt(r.e1[i]) << ',' << fmt(r.e2[i]) << ',' << fmt(r.e3[i]) << ',' << fmt(r.wall_ms[i]) << '\n';
  }
  return os.str();
}

void write_report(const ConvergenceReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + name + " in " + dir);
    out << text;
  };
  const std::string csv = report_csv(r);
  write("report.csv", csv);
  write("report.svg", plot_report_csv(csv));
  std::string meta;
  for (const std::string& m : r.run_meta) meta += m + "\n";
  write("run_meta.jsonl", meta);
}

std::string loglog_svg(const std::vector<PlotSeries>& series, const std::string& x_label,
                       const std::string& y_label) {
  constexpr double W = 640, H = 420, L = 70, R = 150, TOP = 20, B = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - TOP - B); };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << L << "\" y=\"" << TOP << "\" width=\"" << W - L - R << "\" height=\"" << H - TOP - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = xmin; d <= xmax + 1e-9; d += 1) {
    os << "<text x=\"" << px(d) << "\" y=\"" << H - B + 18 << "\" font-size=\"12\" text-anchor=\"middle\">1e"
       << static_cast<int>(d) << "</text>\n";
  }
  for (double d = ymin; d <= ymax + 1e-9; d += 1) {
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(d) + 4 << "\" font-size=\"12\" text-anchor=\"end\">1e"
       << static_cast<int>(d) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"13\" text-anchor=\"middle\">"
     << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << (TOP + H - B) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (TOP + H - B) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kColors[k % 6];
    std::ostringstream pts;
    pts << std::setprecision(6);
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      pts << px(std::log10(s.x[i])) << ',' << py(std::log10(s.y[i])) << ' ';
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << TOP + 18 * (k + 1) << "\" font-size=\"12\" fill=\"" << color
       << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string plot_report_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty report");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::IoError, "report lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = column("sweep_value");
  const std::vector<std::string> names = {"err_L", "err_R", "err_layer_avg"};
  std::vector<PlotSeries> series;
  for (const std::string& n : names) series.push_back(PlotSeries{n, {}, {}});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    if (row.size() != header.size()) throw Error(ErrorCode::IoError, "ragged report row");
    for (std::size_t k = 0; k < names.size(); ++k) {
      series[k].x.push_back(row[cx]);
      series[k].y.push_back(row[column(names[k])]);
    }
  }
  return loglog_svg(series, "sweep value", "L2 error");
}

}  // namespace tl
