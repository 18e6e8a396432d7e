#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fem.hpp"
#include "macro.hpp"
#include "micro.hpp"

namespace tl {

// Time-space L2 distance of two transient fields over the triangles of `quad_mesh`
// carrying `region`, within [t0, t1]. Each field is evaluated by point location on its
// own mesh, restricted to triangles of the same region and taken as zero elsewhere;
// values between stored levels are linear in time.
double l2_difference(const TransientField& a, const TransientField& b, const TaggedMesh& quad_mesh, Region region,
                     double t0, double t1);

// l2_difference on the quadrature of field B's mesh.
double l2_error(const TransientField& a, const TransientField& b, Region region, double t0, double t1);

// Trapezoidal L2 distance in time of two level series on the same time grid.
double series_l2_difference(const std::vector<double>& times, const std::vector<double>& a,
                            const std::vector<double>& b);

// Least-squares slope of log(value) against log(parameter).
double fit_rate(const std::vector<double>& values, const std::vector<double>& parameters);

enum class StudyLevel { Micro, Macro };

struct ConvergenceReport {
  std::string parameter;  // "eps" or "delta"
  std::vector<double> sweep_values;
  std::vector<std::string> labels;  // problem label per member
  std::vector<double> err_L, err_R, err_layer_avg;
  std::vector<double> e1, e2, e3;   // NaN for macro members
  std::vector<double> wall_ms;
  std::vector<std::string> run_meta;  // one JSON record per member
  std::optional<double> rate_L, rate_R, rate_layer_avg;
  std::vector<std::string> warnings;

  // err_L, err_R strictly decreasing along the sweep.
  bool bulk_errors_decreasing() const;
};

struct StudyOptions {
  bool deterministic = true;  // wall_ms reported as 0 so reports are byte-reproducible
};

// Macro limit solution reduced to what the comparisons need.
struct MacroFields {
  ScalingChoice choice = ScalingChoice::S1;
  TransientField left, right;
  std::vector<double> layer_average;
  std::vector<double> times;
};

MacroFields solve_macro(const ProblemConfig& config, ScalingChoice choice);

ConvergenceReport study_eps(const ProblemConfig& config, const std::vector<double>& eps_values, ScalingChoice choice,
                            const StudyOptions& options = {});

// Delta values are deduplicated (with a warning) and must be descending, ending in 0.
// The macro level uses `choice`; the micro level runs at config.geometry.eps.
ConvergenceReport study_delta(const ProblemConfig& config, const std::vector<double>& delta_values, StudyLevel level,
                              ScalingChoice choice = ScalingChoice::S1, const StudyOptions& options = {});

// Triangle inequality audit at one (eps, delta): distances between micro(eps,delta), micro(eps,0)
// and macro(delta=0) measured on the same quadrature.
struct DiagramAudit {
  double micro_delta_to_macro0 = 0.0;
  double micro_delta_to_micro0 = 0.0;
  double micro0_to_macro0 = 0.0;
  bool holds() const { return micro_delta_to_macro0 <= micro_delta_to_micro0 + micro0_to_macro0 + 1e-14; }
};

DiagramAudit diagram_audit(const ProblemConfig& config, double eps, double delta, ScalingChoice choice);

// Report files: report.csv, report.svg, run_meta.jsonl.
std::string report_csv(const ConvergenceReport& report);
void write_report(const ConvergenceReport& report, const std::string& dir);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

// Log-log line plot; nonpositive points are skipped.
std::string loglog_svg(const std::vector<PlotSeries>& series, const std::string& x_label, const std::string& y_label);

// Reads a report.csv and plots err_L, err_R, err_layer_avg against sweep_value.
std::string plot_report_csv(const std::string& csv_text);

}  // namespace tl
