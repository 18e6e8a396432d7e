#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "thinlayer/thinlayer.h"

namespace {

int report_failure(int code) {
  std::fprintf(stderr, "error (%s): %s\n", tl_error_name(code), tl_last_error());
  return code;
}

struct ConfigHandle {
  tl_config* ptr = nullptr;
  ~ConfigHandle() { tl_config_free(ptr); }
};

struct ReportHandle {
  tl_report* ptr = nullptr;
  ~ReportHandle() { tl_report_free(ptr); }
};

int load(const std::string& path, ConfigHandle& cfg) { return tl_config_load(path.c_str(), &cfg.ptr); }

int print_warnings(const tl_report* report) {
  size_t needed = 0;
  int rc = tl_report_warnings(report, nullptr, 0, &needed);
  if (rc != TL_OK) return rc;
  std::string text(needed, '\0');
  rc = tl_report_warnings(report, text.data(), text.size(), &needed);
  if (rc == TL_OK && needed > 1) std::fprintf(stderr, "%s", text.c_str());
  return rc;
}

void print_report(const tl_report* report) {
  size_t rows = 0;
  tl_report_rows(report, &rows);
  std::printf("%-12s %-14s %-14s %-14s\n", "sweep", "err_L", "err_R", "err_layer_avg");
  for (size_t i = 0; i < rows; ++i) {
    double r[8];
    tl_report_row(report, i, r);
    std::printf("%-12g %-14.6e %-14.6e %-14.6e\n", r[0], r[1], r[2], r[3]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-layer reaction-diffusion solvers: micro problem, limit models, parameter studies"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", choice, level = "micro", csv_path, svg_path;
  std::vector<double> values;
  bool wall_clock = false;

  auto* micro = app.add_subcommand("run-micro", "Solve the layered micro problem");
  micro->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  micro->add_option("--out", out_dir, "Output directory");

  auto* macro = app.add_subcommand("run-macro", "Solve a limit problem");
  macro->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  macro->add_option("--choice", choice, "Scaling choice")->required()->check(CLI::IsMember({"S1", "S2", "S3", "S4"}));
  macro->add_option("--out", out_dir, "Output directory");

  auto* seps = app.add_subcommand("study-eps", "Micro-vs-macro eps sweep");
  seps->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  seps->add_option("--eps", values, "Eps values (at least three)")->required()->expected(1, -1);
  seps->add_option("--choice", choice, "Macro model")->required()->check(CLI::IsMember({"S1", "S2", "S3", "S4"}));
  seps->add_option("--out", out_dir, "Report directory");
  seps->add_flag("--wall-clock", wall_clock, "Record wall-clock times (reports are then not reproducible)");

  auto* sdelta = app.add_subcommand("study-delta", "Regularization sweep delta -> 0");
  sdelta->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  sdelta->add_option("--delta", values, "Descending delta values ending in 0")->required()->expected(1, -1);
  sdelta->add_option("--level", level, "micro or macro")->check(CLI::IsMember({"micro", "macro"}));
  sdelta->add_option("--choice", choice, "Macro model for --level macro")->check(CLI::IsMember({"S1", "S2", "S3", "S4"}));
  sdelta->add_option("--out", out_dir, "Report directory");
  sdelta->add_flag("--wall-clock", wall_clock, "Record wall-clock times (reports are then not reproducible)");

  auto* validate = app.add_subcommand("validate-config", "Check a config against the model assumptions");
  validate->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plot", "Render a report CSV as a log-log SVG");
  plot->add_option("--csv", csv_path, "report.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_path, "SVG path")->required();

  double r0 = -0.5, r1 = 1.5;
  int samples = 401;
  auto* dsamp = app.add_subcommand("drift-samples", "Tabulate P and P_delta for the configured drift");
  dsamp->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  dsamp->add_option("--out", csv_path, "CSV path")->required();
  dsamp->add_option("--from", r0, "Left end of the sample range");
  dsamp->add_option("--to", r1, "Right end of the sample range");
  dsamp->add_option("--samples", samples, "Number of samples")->check(CLI::Range(2, 1000000));

  CLI11_PARSE(app, argc, argv);

  if (*plot) {
    const int rc = tl_plot_csv(csv_path.c_str(), svg_path.c_str());
    return rc == TL_OK ? 0 : report_failure(rc);
  }

  ConfigHandle cfg;
  if (int rc = load(config_path, cfg); rc != TL_OK) return report_failure(rc);

  if (*dsamp) {
    const int rc = tl_drift_samples(cfg.ptr, r0, r1, samples, csv_path.c_str());
    if (rc != TL_OK) return report_failure(rc);
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
  }

  if (*validate) {
    char cls[32];
    int l1 = 0, l2 = 0, blocking = 0;
    size_t needed = 0;
    int rc = tl_config_classify(cfg.ptr, cls, sizeof cls);
    if (rc != TL_OK) return report_failure(rc);
    std::printf("classification: %s\n", cls);
    if (tl_config_lambda(cfg.ptr, &l1, &l2) == TL_OK && (std::string(cls) == "S3" || std::string(cls) == "S4")) {
      std::printf("lambda1=%d lambda2=%d\n", l1, l2);
    }
    if ((rc = tl_config_validate(cfg.ptr, nullptr, 0, &needed, &blocking)) != TL_OK) return report_failure(rc);
    std::string text(needed, '\0');
    if ((rc = tl_config_validate(cfg.ptr, text.data(), text.size(), &needed, &blocking)) != TL_OK) {
      return report_failure(rc);
    }
    std::printf("%s", text.c_str());
    std::printf("%s\n", blocking == 0 ? "config OK" : "config has blocking violations");
    return blocking == 0 ? 0 : TL_ASSUMPTION_VIOLATION;
  }

  if (*micro) {
    tl_micro* sol = nullptr;
    int rc = tl_micro_run(cfg.ptr, &sol);
    if (rc != TL_OK) return report_failure(rc);
    rc = tl_micro_write(sol, out_dir.c_str());
    double e[4] = {0, 0, 0, 0};
    if (rc == TL_OK) rc = tl_micro_energy(sol, e);
    tl_micro_free(sol);
    if (rc != TL_OK) return report_failure(rc);
    std::printf("e1=%.6e e2=%.6e e3=%.6e e4=%.6e\nwrote %s\n", e[0], e[1], e[2], e[3], out_dir.c_str());
    return 0;
  }

  if (*macro) {
    double res = 0.0;
    const int rc = tl_run_macro(cfg.ptr, choice.c_str(), out_dir.c_str(), &res);
    if (rc != TL_OK) return report_failure(rc);
    std::printf("max interface residual %.3e\nwrote %s\n", res, out_dir.c_str());
    return 0;
  }

  ReportHandle rep;
  int rc = TL_OK;
  if (*seps) {
    rc = tl_study_eps(cfg.ptr, values.data(), values.size(), choice.c_str(), wall_clock ? 0 : 1, &rep.ptr);
  } else {
    rc = tl_study_delta(cfg.ptr, values.data(), values.size(), level.c_str(), choice.empty() ? "S1" : choice.c_str(),
                        wall_clock ? 0 : 1, &rep.ptr);
  }
  if (rc != TL_OK) return report_failure(rc);
  print_warnings(rep.ptr);
  print_report(rep.ptr);
  if ((rc = tl_report_write(rep.ptr, out_dir.c_str())) != TL_OK) return report_failure(rc);
  std::printf("wrote %s\n", out_dir.c_str());
  return 0;
}
