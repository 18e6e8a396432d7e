#pragma once

#include <string>

#include "macro.hpp"
#include "micro.hpp"

namespace tl {

// Snapshot levels kept for output: every `output_every` steps plus the first and last level.
std::vector<std::size_t> output_levels(std::size_t levels, int output_every);

// Writes <prefix>.mesh once and <prefix>_<level>.csv (vertex,x,y,value) per selected level.
void write_field_snapshots(const TransientField& field, const std::string& dir, const std::string& prefix,
                           int output_every);

// run-micro outputs: u snapshots, diagnostics.csv, energy.csv, run_meta.json.
void write_micro_outputs(const MicroSolution& sol, const std::string& dir);

// run-macro outputs: bulk snapshots, interface or layer snapshots, flux_balance.csv, run_meta.json.
void write_macro_outputs(const MacroS1Solution& sol, const std::string& dir);
void write_macro_outputs(const MacroS2Solution& sol, const std::string& dir);
void write_macro_outputs(const MacroS3Solution& sol, const std::string& dir);

}  // namespace tl
