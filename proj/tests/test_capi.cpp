#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "thinlayer/thinlayer.h"

namespace fs = std::filesystem;

namespace {

std::string config_path(const char* name) { return std::string(THINLAYER_CONFIG_DIR) + "/" + name; }

struct Config {
  tl_config* ptr = nullptr;
  explicit Config(const char* name) { REQUIRE(tl_config_load(config_path(name).c_str(), &ptr) == TL_OK); }
  ~Config() { tl_config_free(ptr); }
};

// Coarse and short so the runs stay cheap.
void make_small(tl_config* cfg) {
  REQUIRE(tl_config_set(cfg, "mesh.target_edge", 0.1) == TL_OK);
  REQUIRE(tl_config_set(cfg, "time.T", 0.04) == TL_OK);
  REQUIRE(tl_config_set(cfg, "time.dt", 0.02) == TL_OK);
}

std::string classify(const tl_config* cfg) {
  char buf[32];
  REQUIRE(tl_config_classify(cfg, buf, sizeof buf) == TL_OK);
  return buf;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / "thinlayer_capi" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("version and error names") {
  CHECK(std::string(tl_version()) == "1.0.0");
  CHECK(std::string(tl_error_name(TL_OK)) != "");
  CHECK(std::string(tl_error_name(TL_CONFIG_ERROR)) != std::string(tl_error_name(TL_IO_ERROR)));
}

TEST_CASE("shipped configs classify through the C API") {
  const char* names[] = {"s1_smooth.json", "s2_smooth.json", "s3_fixed.json", "s4_fixed.json"};
  const char* expect[] = {"S1", "S2", "S3", "S4"};
  for (int i = 0; i < 4; ++i) {
    Config c(names[i]);
    CHECK(classify(c.ptr) == expect[i]);
  }
  Config s3("s3_fixed.json");
  int l1 = -1, l2 = -1;
  REQUIRE(tl_config_lambda(s3.ptr, &l1, &l2) == TL_OK);
  CHECK(l1 == 1);
  CHECK(l2 == 1);
  Config s4("s4_fixed.json");
  REQUIRE(tl_config_lambda(s4.ptr, &l1, &l2) == TL_OK);
  CHECK(l1 == 0);
  CHECK(l2 == 1);
}

TEST_CASE("classification truncates to the buffer") {
  Config c("s1_smooth.json");
  char buf[2] = {'x', 'x'};
  REQUIRE(tl_config_classify(c.ptr, buf, sizeof buf) == TL_OK);
  CHECK(std::string(buf) == "S");
}

TEST_CASE("config overrides") {
  Config c("s1_smooth.json");
  REQUIRE(tl_config_set(c.ptr, "scalings.beta", 2.0) == TL_OK);
  REQUIRE(tl_config_set(c.ptr, "scalings.alpha", 0.0) == TL_OK);
  CHECK(classify(c.ptr) == "S3");
  CHECK(tl_config_set(c.ptr, "no.such.key", 1.0) == TL_INVALID_ARGUMENT);
  CHECK(std::string(tl_last_error()).find("no.such.key") != std::string::npos);
}

TEST_CASE("validation reports needed length and blocking count") {
  Config c("s1_smooth.json");
  size_t needed = 0;
  int blocking = -1;
  REQUIRE(tl_config_validate(c.ptr, nullptr, 0, &needed, &blocking) == TL_OK);
  CHECK(needed >= 1);
  CHECK(blocking == 0);

  REQUIRE(tl_config_set(c.ptr, "scalings.gamma", 0.5) == TL_OK);
  REQUIRE(tl_config_validate(c.ptr, nullptr, 0, &needed, &blocking) == TL_OK);
  CHECK(needed > 1);
  std::string text(needed, '\0');
  REQUIRE(tl_config_validate(c.ptr, text.data(), text.size(), &needed, &blocking) == TL_OK);
  CHECK(text.find("gamma>=beta") != std::string::npos);
}

TEST_CASE("load and parse failures") {
  tl_config* cfg = reinterpret_cast<tl_config*>(0x1);
  CHECK(tl_config_load("/nonexistent/config.json", &cfg) == TL_IO_ERROR);
  CHECK(cfg == nullptr);
  CHECK(std::string(tl_last_error()).find("/nonexistent/config.json") != std::string::npos);
  CHECK(tl_config_parse("{ not json", &cfg) == TL_CONFIG_ERROR);
  CHECK(tl_config_parse("[1, 2]", &cfg) == TL_CONFIG_ERROR);
  CHECK(tl_config_parse(nullptr, &cfg) == TL_INVALID_ARGUMENT);
  CHECK(tl_config_load(nullptr, &cfg) == TL_INVALID_ARGUMENT);
}

TEST_CASE("successful calls clear the last error") {
  tl_config* cfg = nullptr;
  CHECK(tl_config_load("/nonexistent/config.json", &cfg) != TL_OK);
  CHECK(std::string(tl_last_error()) != "");
  Config c("s1_smooth.json");
  CHECK(std::string(tl_last_error()) == "");
}

TEST_CASE("null handles are rejected") {
  char buf[8];
  int a = 0, b = 0;
  size_t n = 0;
  double e[8];
  CHECK(tl_config_set(nullptr, "time.dt", 1.0) == TL_INVALID_ARGUMENT);
  CHECK(tl_config_classify(nullptr, buf, sizeof buf) == TL_INVALID_ARGUMENT);
  CHECK(tl_config_lambda(nullptr, &a, &b) == TL_INVALID_ARGUMENT);
  CHECK(tl_config_validate(nullptr, buf, sizeof buf, &n, &a) == TL_INVALID_ARGUMENT);
  CHECK(tl_micro_run(nullptr, nullptr) == TL_INVALID_ARGUMENT);
  CHECK(tl_micro_levels(nullptr, &n) == TL_INVALID_ARGUMENT);
  CHECK(tl_micro_energy(nullptr, e) == TL_INVALID_ARGUMENT);
  CHECK(tl_run_macro(nullptr, "S1", "x", nullptr) == TL_INVALID_ARGUMENT);
  CHECK(tl_report_rows(nullptr, &n) == TL_INVALID_ARGUMENT);
  CHECK(tl_report_row(nullptr, 0, e) == TL_INVALID_ARGUMENT);
  CHECK(tl_drift_samples(nullptr, 0, 1, 3, "x") == TL_INVALID_ARGUMENT);
  CHECK(tl_plot_csv(nullptr, "x") == TL_INVALID_ARGUMENT);
  tl_config_free(nullptr);
  tl_micro_free(nullptr);
  tl_report_free(nullptr);
}

TEST_CASE("micro run through the C API") {
  Config c("s1_smooth.json");
  make_small(c.ptr);
  tl_micro* sol = nullptr;
  REQUIRE(tl_micro_run(c.ptr, &sol) == TL_OK);
  size_t levels = 0;
  REQUIRE(tl_micro_levels(sol, &levels) == TL_OK);
  CHECK(levels == 3);
  std::vector<double> avg(levels);
  REQUIRE(tl_micro_layer_average(sol, avg.data(), avg.size()) == TL_OK);
  for (double v : avg) CHECK(std::isfinite(v));
  CHECK(tl_micro_layer_average(sol, avg.data(), 1) == TL_INVALID_ARGUMENT);
  double e[4] = {-1, -1, -1, -1};
  REQUIRE(tl_micro_energy(sol, e) == TL_OK);
  for (double v : e) CHECK(v >= 0.0);

  const fs::path dir = scratch("micro");
  REQUIRE(tl_micro_write(sol, dir.string().c_str()) == TL_OK);
  CHECK(fs::exists(dir / "u.mesh"));
  CHECK(fs::exists(dir / "energy.csv"));
  CHECK(fs::exists(dir / "diagnostics.csv"));
  CHECK(fs::exists(dir / "run_meta.json"));
  CHECK(fs::exists(dir / "tag_stats.csv"));
  tl_micro_free(sol);
}

TEST_CASE("micro run reports geometry errors") {
  Config c("s1_smooth.json");
  REQUIRE(tl_config_set(c.ptr, "geometry.eps", 0.3) == TL_OK);
  tl_micro* sol = nullptr;
  CHECK(tl_micro_run(c.ptr, &sol) == TL_NON_INTEGER_PERIOD_COUNT);
  CHECK(sol == nullptr);
}

TEST_CASE("macro runs through the C API") {
  Config s1("s1_smooth.json");
  make_small(s1.ptr);
  REQUIRE(tl_config_set(s1.ptr, "mesh.cell_target_edge", 0.2) == TL_OK);
  double res = -1.0;
  const fs::path d1 = scratch("macro_s1");
  REQUIRE(tl_run_macro(s1.ptr, "S1", d1.string().c_str(), &res) == TL_OK);
  CHECK(res >= 0.0);
  CHECK(fs::exists(d1 / "flux_balance.csv"));

  Config s2("s2_smooth.json");
  make_small(s2.ptr);
  const fs::path d2 = scratch("macro_s2");
  REQUIRE(tl_run_macro(s2.ptr, "S2", d2.string().c_str(), &res) == TL_OK);
  CHECK(res < 1e-8);
  CHECK(fs::exists(d2 / "interface.csv"));

  Config s3("s3_fixed.json");
  make_small(s3.ptr);
  const fs::path d3 = scratch("macro_s3");
  REQUIRE(tl_run_macro(s3.ptr, "S3", d3.string().c_str(), &res) == TL_OK);
  CHECK(fs::exists(d3 / "warnings.txt"));

  CHECK(tl_run_macro(s1.ptr, "S9", d1.string().c_str(), &res) == TL_INVALID_ARGUMENT);
  CHECK(tl_run_macro(s1.ptr, "S2", d1.string().c_str(), &res) != TL_OK);
}

TEST_CASE("eps study through the C API") {
  Config c("s1_smooth.json");
  REQUIRE(tl_config_set(c.ptr, "time.T", 0.04) == TL_OK);
  REQUIRE(tl_config_set(c.ptr, "mesh.cell_target_edge", 0.2) == TL_OK);
  const double eps[] = {0.25, 0.125, 0.0625};
  tl_report* rep = nullptr;
  REQUIRE(tl_study_eps(c.ptr, eps, 3, "S1", 1, &rep) == TL_OK);
  size_t rows = 0;
  REQUIRE(tl_report_rows(rep, &rows) == TL_OK);
  CHECK(rows == 3);
  double row[8];
  REQUIRE(tl_report_row(rep, 2, row) == TL_OK);
  CHECK(row[0] == 0.0625);
  CHECK(row[7] == 0.0);
  CHECK(tl_report_row(rep, 3, row) == TL_INVALID_ARGUMENT);

  const fs::path dir = scratch("study");
  REQUIRE(tl_report_write(rep, dir.string().c_str()) == TL_OK);
  CHECK(fs::exists(dir / "report.csv"));
  REQUIRE(tl_plot_csv((dir / "report.csv").string().c_str(), (dir / "plot" / "report.svg").string().c_str()) == TL_OK);
  CHECK(slurp(dir / "plot" / "report.svg").find("<svg") != std::string::npos);
  tl_report_free(rep);

  CHECK(tl_study_eps(c.ptr, eps, 2, "S1", 1, &rep) == TL_SWEEP_TOO_SHORT);
}

TEST_CASE("delta study through the C API") {
  Config c("s1_smooth.json");
  make_small(c.ptr);
  const double deltas[] = {0.2, 0.1, 0.05, 0.0};
  tl_report* rep = nullptr;
  REQUIRE(tl_study_delta(c.ptr, deltas, 4, "micro", nullptr, 1, &rep) == TL_OK);
  size_t rows = 0;
  REQUIRE(tl_report_rows(rep, &rows) == TL_OK);
  CHECK(rows >= 3);
  size_t needed = 0;
  REQUIRE(tl_report_warnings(rep, nullptr, 0, &needed) == TL_OK);
  CHECK(needed >= 1);
  tl_report_free(rep);
  CHECK(tl_study_delta(c.ptr, deltas, 4, "meso", "S1", 1, &rep) == TL_INVALID_ARGUMENT);
}

TEST_CASE("drift samples through the C API") {
  Config c("s1_smooth.json");
  const fs::path dir = scratch("drift");
  fs::create_directories(dir);
  REQUIRE(tl_drift_samples(c.ptr, 0.0, 1.0, 11, (dir / "p.csv").string().c_str()) == TL_OK);
  std::istringstream in(slurp(dir / "p.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,P,P_delta");
  int count = 0;
  while (std::getline(in, line)) ++count;
  CHECK(count == 11);
  // Parent is a regular file, so the directory cannot be created.
  CHECK(tl_drift_samples(c.ptr, 0.0, 1.0, 11, (dir / "p.csv" / "q.csv").string().c_str()) == TL_IO_ERROR);
  CHECK(tl_plot_csv("/nonexistent/report.csv", (dir / "x.svg").string().c_str()) == TL_IO_ERROR);
}
