#pragma once

// Run configuration: a JSON document declaring the population, the design,
// the specifications to estimate and the diagnostics to produce. Parsing is
// strict; every schema error names the offending field path.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipe/diagnostics.hpp"
#include "ipe/estimators.hpp"
#include "ipe/experiment.hpp"

namespace ipe {

struct SpecEntry {
    std::string name;        // artifact stem: fit-<name>.json, report-<name>.json
    SpecRequest request;     // correction resolved against the records at run time
    std::string correction;  // conditional specs only
};

struct DiagnosticsConfig {
    std::size_t bins = 10;
    bool emit_plot_data = true;
    std::string statistic;  // empty: design default
    BinMethod method = BinMethod::Residualized;
    // Agents checked for stability/neutrality and monotonicity (the first N).
    std::size_t condition_sample = 500;
};

struct RunConfig {
    nlohmann::json document;  // as parsed, used for the manifest hash
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    Feature feature = Feature::mean();
    Tolerances tolerances;
    std::vector<Agent> population;
    std::vector<std::string> covariate_names;
    Design design;
    std::vector<SpecEntry> specs;
    DiagnosticsConfig diagnostics;
};

RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::string& path);

// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace ipe
