#include "output.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "config.hpp"
#include "errors.hpp"

namespace tl {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (fs::path(dir) / name).string());
  out << std::setprecision(12);
  return out;
}

void write_meta(const std::string& dir, const ProblemConfig& c, const std::string& solver, std::size_t levels) {
  std::ofstream out = open_out(dir, "run_meta.json");
  out << "{\"solver\":\"" << solver << "\",\"levels\":" << levels << ",\"config\":" << config_summary_json(c) << "}\n";
}

std::string level_name(const std::string& prefix, std::size_t level) {
  std::ostringstream os;
  os << prefix << '_' << std::setw(5) << std::setfill('0') << level << ".csv";
  return os.str();
}

}  // namespace

std::vector<std::size_t> output_levels(std::size_t levels, int output_every) {
  std::vector<std::size_t> out;
  if (levels == 0) return out;
  out.push_back(0);
  if (output_every > 0) {
    for (std::size_t n = static_cast<std::size_t>(output_every); n + 1 < levels; n += static_cast<std::size_t>(output_every)) {
      out.push_back(n);
    }
  }
  if (levels > 1) out.push_back(levels - 1);
  return out;
}

void write_field_snapshots(const TransientField& field, const std::string& dir, const std::string& prefix,
                           int output_every) {
  if (!field.mesh) throw Error(ErrorCode::InvalidArgument, "field without mesh");
  {
    std::ofstream out = open_out(dir, prefix + ".mesh");
    write_mesh(out, *field.mesh);
  }
  for (std::size_t n : output_levels(field.levels(), output_every)) {
    std::ofstream out = open_out(dir, level_name(prefix, n));
    out << "# t=" << field.times[n] << "\nvertex,x,y,value\n";
    for (std::size_t v = 0; v < field.mesh->num_vertices(); ++v) {
      const Point p = field.mesh->vertices[v];
      out << v << ',' << p.x << ',' << p.y << ',' << field.values[n][v] << '\n';
    }
  }
}

void write_micro_outputs(const MicroSolution& sol, const std::string& dir) {
  write_field_snapshots(sol.u, dir, "u", sol.config.time.output_every);
  {
    std::ofstream out = open_out(dir, "tag_stats.csv");
    write_tag_statistics_csv(out, *sol.mesh);
  }
  const std::vector<EnergyReport> energy = energy_series(sol, sol.config.scalings);
  {
    std::ofstream out = open_out(dir, "diagnostics.csv");
    out << "step,time,residual,picard_iterations,flux_jump,e1,e2,e3,e4\n";
    for (const StepDiagnostics& d : sol.diagnostics) {
      const EnergyReport& e = energy[static_cast<std::size_t>(d.step)];
      out << d.step << ',' << d.time << ',' << d.residual << ',' << d.picard_iterations << ',' << d.flux_jump << ','
          << e.e1 << ',' << e.e2 << ',' << e.e3 << ',' << e.e4 << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir, "energy.csv");
    out << "time,e1,e2,e3,e4,layer_average\n";
    const std::vector<double> avg = layer_average_series(sol);
    for (std::size_t n = 0; n < energy.size(); ++n) {
      out << sol.v.times[n] << ',' << energy[n].e1 << ',' << energy[n].e2 << ',' << energy[n].e3 << ','
          << energy[n].e4 << ',' << avg[n] << '\n';
    }
  }
  write_meta(dir, sol.config, "micro", sol.u.levels());
}

void write_macro_outputs(const MacroS1Solution& sol, const std::string& dir) {
  const int every = sol.config.time.output_every;
  write_field_snapshots(sol.u_l, dir, "u_left", every);
  write_field_snapshots(sol.u_r, dir, "u_right", every);
  {
    std::ofstream out = open_out(dir, "cell.mesh");
    write_mesh(out, *sol.cell_mesh);
  }
  for (std::size_t n : output_levels(sol.cells.size(), every)) {
    std::ofstream out = open_out(dir, level_name("cells", n));
    out << "# t=" << sol.u_l.times[n] << "\nsegment,x2,vertex,value\n";
    for (std::size_t j = 0; j < sol.cells[n].size(); ++j) {
      for (std::size_t v = 0; v < sol.cell_mesh->num_vertices(); ++v) {
        out << j << ',' << sol.sigma_points[j] << ',' << v << ','
            << sol.cells[n][j][static_cast<std::size_t>(sol.cell_dofs[static_cast<int>(v)])] << '\n';
      }
    }
  }
  {
    std::ofstream out = open_out(dir, "flux_balance.csv");
    out << "step,time,sweeps,trace_change,matching_residual,flux_residual,jump_residual,layer_average\n";
    for (const S1StepDiagnostics& d : sol.diagnostics) {
      out << d.step << ',' << d.time << ',' << d.sweeps << ',' << d.trace_change << ',' << d.matching_residual << ','
          << d.flux_residual << ',' << d.jump_residual << ',' << sol.layer_average[static_cast<std::size_t>(d.step)]
          << '\n';
    }
  }
  write_meta(dir, sol.config, "macro S1", sol.u_l.levels());
}

void write_macro_outputs(const MacroS2Solution& sol, const std::string& dir) {
  const int every = sol.config.time.output_every;
  write_field_snapshots(sol.u, dir, "u", every);
  {
    std::ofstream out = open_out(dir, "interface.csv");
    out << "time";
    for (double y : sol.sigma_y) out << ",x2=" << y;
    out << '\n';
    for (std::size_t n = 0; n < sol.sigma_values.size(); ++n) {
      out << sol.u.times[n];
      for (double v : sol.sigma_values[n]) out << ',' << v;
      out << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir, "flux_balance.csv");
    out << "step,time,jump_residual,layer_average\n";
    for (std::size_t n = 0; n < sol.jump_residual.size(); ++n) {
      out << n + 1 << ',' << sol.u.times[n + 1] << ',' << sol.jump_residual[n] << ',' << sol.layer_average[n + 1]
          << '\n';
    }
  }
  write_meta(dir, sol.config, "macro S2", sol.u.levels());
}

void write_macro_outputs(const MacroS3Solution& sol, const std::string& dir) {
  const int every = sol.config.time.output_every;
  write_field_snapshots(sol.u_l, dir, "u_left", every);
  write_field_snapshots(sol.u_r, dir, "u_right", every);
  for (std::size_t n : output_levels(sol.layer.size(), every)) {
    std::ofstream out = open_out(dir, level_name("layer", n));
    out << "# t=" << sol.u_l.times[n] << "\nx1,x2,y2,value\n";
    for (std::size_t i = 0; i < sol.columns.size(); ++i) {
      for (std::size_t k = 0; k < sol.rows.size(); ++k) {
        for (std::size_t c = 0; c < sol.cell_centers.size(); ++c) {
          if (!sol.active[i][c]) continue;
          out << sol.columns[i] << ',' << sol.rows[k] << ',' << sol.cell_centers[c] << ',' << sol.layer[n][i][k][c]
              << '\n';
        }
      }
    }
  }
  {
    std::ofstream out = open_out(dir, "flux_balance.csv");
    out << "time,layer_average\n";
    for (std::size_t n = 0; n < sol.layer_average.size(); ++n) out << sol.u_l.times[n] << ',' << sol.layer_average[n] << '\n';
  }
  {
    std::ofstream out = open_out(dir, "warnings.txt");
    for (const std::string& w : sol.warnings) out << w << '\n';
  }
  write_meta(dir, sol.config, std::string("macro S3/S4 lambda1=") + std::to_string(sol.lambda.lambda1) +
                                  " lambda2=" + std::to_string(sol.lambda.lambda2),
             sol.u_l.levels());
}

}  // namespace tl
