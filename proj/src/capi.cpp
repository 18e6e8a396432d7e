#include "thinlayer/thinlayer.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "macro.hpp"
#include "micro.hpp"
#include "output.hpp"
#include "study.hpp"

struct tl_config {
  tl::ProblemConfig config;
};

struct tl_micro {
  tl::MicroSolution solution;
};

struct tl_report {
  tl::ConvergenceReport report;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& what) {
  g_last_error = what;
  return code;
}

template <class F>
int guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return TL_OK;
  } catch (const tl::Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(TL_IO_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return fail(TL_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TL_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw tl::Error(tl::ErrorCode::InvalidArgument, what);
}

std::size_t copy_text(const std::string& s, char* buf, std::size_t cap) {
  if (buf && cap > 0) {
    const std::size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return s.size() + 1;
}

tl::ScalingChoice parse_choice(const char* choice) {
  require(choice != nullptr, "choice is null");
  const auto c = tl::parse_scaling_choice(choice);
  if (!c || *c == tl::ScalingChoice::Unclassified) {
    throw tl::Error(tl::ErrorCode::InvalidArgument, std::string("unknown macro choice '") + choice + "'");
  }
  return *c;
}

}  // namespace

extern "C" {

const char* tl_version(void) { return "1.0.0"; }

const char* tl_last_error(void) { return g_last_error.c_str(); }

const char* tl_error_name(int code) { return tl::error_code_name(static_cast<tl::ErrorCode>(code)); }

int tl_config_load(const char* path, tl_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    auto cfg = std::make_unique<tl_config>();
    cfg->config = tl::load_config(path);
    *out = cfg.release();
  });
}

int tl_config_parse(const char* json, tl_config** out) {
  return guarded([&] {
    require(json && out, "null argument");
    *out = nullptr;
    auto cfg = std::make_unique<tl_config>();
    cfg->config = tl::parse_config(json);
    *out = cfg.release();
  });
}

void tl_config_free(tl_config* cfg) { delete cfg; }

int tl_config_set(tl_config* cfg, const char* key, double value) {
  return guarded([&] {
    require(cfg && key, "null argument");
    tl::ProblemConfig& c = cfg->config;
    const std::string k = key;
    if (k == "geometry.eps") c.geometry.eps = value;
    else if (k == "geometry.kappa") c.geometry.kappa_fixed = value;
    else if (k == "drift.delta") c.drift.delta = value;
    else if (k == "time.dt") c.time.dt = value;
    else if (k == "time.T") c.time.T = value;
    else if (k == "mesh.target_edge") c.mesh.target_edge = value;
    else if (k == "mesh.cell_target_edge") c.mesh.cell_target_edge = value;
    else if (k == "scalings.alpha") c.scalings.alpha = value;
    else if (k == "scalings.beta") c.scalings.beta = value;
    else if (k == "scalings.gamma") c.scalings.gamma = value;
    else if (k == "scalings.xi") c.scalings.xi = value;
    else throw tl::Error(tl::ErrorCode::InvalidArgument, "unsupported key '" + k + "'");
  });
}

int tl_config_classify(const tl_config* cfg, char* buf, size_t cap) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    copy_text(tl::scaling_choice_name(tl::classify_scaling(cfg->config.scalings)), buf, cap);
  });
}

int tl_config_lambda(const tl_config* cfg, int* lambda1, int* lambda2) {
  return guarded([&] {
    require(cfg && lambda1 && lambda2, "null argument");
    const tl::LambdaSwitches l =
        tl::lambda_switches(tl::classify_scaling(cfg->config.scalings), cfg->config.scalings);
    *lambda1 = l.lambda1;
    *lambda2 = l.lambda2;
  });
}

int tl_config_validate(const tl_config* cfg, char* buf, size_t cap, size_t* needed, int* blocking) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    std::ostringstream os;
    int nblock = 0;
    for (const tl::Violation& v : tl::validate_assumptions(cfg->config)) {
      if (v.warning) os << "warning ";
      else ++nblock;
      os << v.rule << ": " << v.detail << '\n';
    }
    const std::size_t n = copy_text(os.str(), buf, cap);
    if (needed) *needed = n;
    if (blocking) *blocking = nblock;
  });
}

int tl_micro_run(const tl_config* cfg, tl_micro** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = nullptr;
    auto sol = std::make_unique<tl_micro>();
    sol->solution = tl::solve_micro(cfg->config);
    *out = sol.release();
  });
}

void tl_micro_free(tl_micro* sol) { delete sol; }

int tl_micro_levels(const tl_micro* sol, size_t* levels) {
  return guarded([&] {
    require(sol && levels, "null argument");
    *levels = sol->solution.u.levels();
  });
}

int tl_micro_layer_average(const tl_micro* sol, double* out, size_t n) {
  return guarded([&] {
    require(sol && out, "null argument");
    const std::vector<double> avg = tl::layer_average_series(sol->solution);
    require(n >= avg.size(), "output buffer shorter than the number of levels");
    std::copy(avg.begin(), avg.end(), out);
  });
}

int tl_micro_energy(const tl_micro* sol, double out[4]) {
  return guarded([&] {
    require(sol && out, "null argument");
    const tl::EnergyReport e = tl::energy_report(sol->solution, sol->solution.config.scalings);
    out[0] = e.e1;
    out[1] = e.e2;
    out[2] = e.e3;
    out[3] = e.e4;
  });
}

int tl_micro_write(const tl_micro* sol, const char* dir) {
  return guarded([&] {
    require(sol && dir, "null argument");
    tl::write_micro_outputs(sol->solution, dir);
  });
}

int tl_run_macro(const tl_config* cfg, const char* choice, const char* dir, double* max_residual) {
  return guarded([&] {
    require(cfg && dir, "null argument");
    const tl::ScalingChoice c = parse_choice(choice);
    double res = 0.0;
    if (c == tl::ScalingChoice::S1) {
      const tl::MacroS1Solution s = tl::solve_macro_S1(cfg->config);
      tl::write_macro_outputs(s, dir);
      res = std::max(s.max_matching_residual, s.max_flux_residual);
    } else if (c == tl::ScalingChoice::S2) {
      const tl::MacroS2Solution s = tl::solve_macro_S2(cfg->config);
      tl::write_macro_outputs(s, dir);
      for (double r : s.jump_residual) res = std::max(res, r);
    } else {
      const tl::MacroS3Solution s = tl::solve_macro_S3S4(cfg->config);
      tl::write_macro_outputs(s, dir);
    }
    if (max_residual) *max_residual = res;
  });
}

int tl_study_eps(const tl_config* cfg, const double* eps, size_t n, const char* choice, int deterministic,
                 tl_report** out) {
  return guarded([&] {
    require(cfg && eps && out, "null argument");
    *out = nullptr;
    tl::StudyOptions opt;
    opt.deterministic = deterministic != 0;
    auto rep = std::make_unique<tl_report>();
    rep->report = tl::study_eps(cfg->config, std::vector<double>(eps, eps + n), parse_choice(choice), opt);
    *out = rep.release();
  });
}

int tl_study_delta(const tl_config* cfg, const double* deltas, size_t n, const char* level, const char* choice,
                   int deterministic, tl_report** out) {
  return guarded([&] {
    require(cfg && deltas && level && out, "null argument");
    *out = nullptr;
    const std::string lv = level;
    require(lv == "micro" || lv == "macro", "level must be micro or macro");
    tl::StudyOptions opt;
    opt.deterministic = deterministic != 0;
    const tl::ScalingChoice c = choice ? parse_choice(choice) : tl::ScalingChoice::S1;
    auto rep = std::make_unique<tl_report>();
    rep->report = tl::study_delta(cfg->config, std::vector<double>(deltas, deltas + n),
                                  lv == "micro" ? tl::StudyLevel::Micro : tl::StudyLevel::Macro, c, opt);
    *out = rep.release();
  });
}

void tl_report_free(tl_report* report) { delete report; }

int tl_report_rows(const tl_report* report, size_t* rows) {
  return guarded([&] {
    require(report && rows, "null argument");
    *rows = report->report.sweep_values.size();
  });
}

int tl_report_row(const tl_report* report, size_t row, double out[8]) {
  return guarded([&] {
    require(report && out, "null argument");
    const tl::ConvergenceReport& r = report->report;
    require(row < r.sweep_values.size(), "row out of range");
    const double v[8] = {r.sweep_values[row], r.err_L[row], r.err_R[row], r.err_layer_avg[row],
                         r.e1[row],           r.e2[row],    r.e3[row],    r.wall_ms[row]};
    std::copy(v, v + 8, out);
  });
}

int tl_report_warnings(const tl_report* report, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "null report");
    std::string s;
    for (const std::string& w : report->report.warnings) s += w + "\n";
    const std::size_t n = copy_text(s, buf, cap);
    if (needed) *needed = n;
  });
}

int tl_report_write(const tl_report* report, const char* dir) {
  return guarded([&] {
    require(report && dir, "null argument");
    tl::write_report(report->report, dir);
  });
}

int tl_drift_samples(const tl_config* cfg, double r0, double r1, int n, const char* csv_path) {
  return guarded([&] {
    require(cfg && csv_path, "null argument");
    const std::string csv = tl::drift_samples_csv(cfg->config.drift.build(), r0, r1, n);
    const std::filesystem::path p(csv_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw tl::Error(tl::ErrorCode::IoError, std::string("cannot write ") + csv_path);
    out << csv;
  });
}

int tl_plot_csv(const char* csv_path, const char* svg_path) {
  return guarded([&] {
    require(csv_path && svg_path, "null argument");
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw tl::Error(tl::ErrorCode::IoError, std::string("cannot open ") + csv_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string svg = tl::plot_report_csv(ss.str());
    const std::filesystem::path p(svg_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw tl::Error(tl::ErrorCode::IoError, std::string("cannot write ") + svg_path);
    out << svg;
  });
}

}  // extern "C"
