#pragma once

// CSV import/export for records, panels, beliefs and signal families.
// Numbers are written in shortest round-trip form, so a write/read cycle is
// lossless and identical inputs give byte-identical files.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ipe/beliefs.hpp"
#include "ipe/experiment.hpp"

namespace ipe {

std::string format_double(double v);
// Throws Validation naming `what` on anything that is not a full number.
double parse_double(std::string_view text, const std::string& what);

// Covariate column names: 'x' followed by letters, digits or underscores.
bool is_covariate_name(std::string_view name);

void write_records_csv(std::ostream& out, const RecordSet& records);
void write_panel_csv(std::ostream& out, const Panel& panel);

enum class IngestMode {
    // Exact header written by the simulator.
    Simulated,
    // Required: group, signal, prior_feature, posterior_feature, outcome.
    // Optional: id, signal_low, signal_high, covariate columns (x...).
    External,
};

RecordSet read_records_csv(std::istream& in, IngestMode mode, const std::string& source = "records");
RecordSet ingest(const std::string& path, IngestMode mode);
Panel read_panel_csv(std::istream& in, const std::string& source = "panel");
Panel read_panel_file(const std::string& path);

// `state,mass`
void write_grid_belief_csv(std::ostream& out, const GridBelief& belief);
GridBelief read_grid_belief_csv(std::istream& in, const std::string& source = "belief");
// `signal,quad_weight,<state 1>,...,<state M>`; one row per signal point.
void write_signal_family_csv(std::ostream& out, const SignalFamily& family);
SignalFamily read_signal_family_csv(std::istream& in, const std::string& source = "signal family");

// Whole-file helpers; Io errors name the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace ipe
