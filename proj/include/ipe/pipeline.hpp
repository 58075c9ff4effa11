#pragma once

// Full config-driven runs: simulate, estimate every configured spec, compute
// diagnostics, and write the artifact set plus a manifest. Everything is
// computed in memory first and written by one writer at the end.

#include <string>
#include <vector>

#include "ipe/config.hpp"
#include "ipe/report.hpp"

namespace ipe {

struct ConditionSummary {
    DesignKind kind = DesignKind::Passive;
    std::size_t checked = 0;
    std::size_t monotone_failures = 0;
    std::size_t strict_failures = 0;  // stability (passive) or neutrality (active)
    std::size_t weak_failures = 0;
    double worst_monotonicity = 0.0;
    double worst_deviation = 0.0;

    bool monotone() const { return monotone_failures == 0; }
    bool strict() const { return strict_failures == 0; }
    bool weak() const { return weak_failures == 0; }
    // The closed-form weight characterizations apply.
    bool applicable() const { return monotone() && strict(); }
};

// Checks the first `sample` agents (all when sample == 0).
ConditionSummary identification_conditions(const std::vector<Agent>& population, const Design& design,
                                           const Feature& feature, const Tolerances& tol, std::size_t sample = 0);
ojson to_json(const ConditionSummary& summary);

struct Artifact {
    std::string file;
    std::string contents;
};

// Computes every artifact of a run (records, panel, fits, reports, plot data).
std::vector<Artifact> run_artifacts(const RunConfig& config);
// Manifest over `artifacts`: config hash, seed and per-file FNV-1a hashes.
Artifact manifest(const RunConfig& config, const std::vector<Artifact>& artifacts);
// Writes artifacts and manifest under `output_dir` (created if needed).
void write_artifacts(const std::string& output_dir, const std::vector<Artifact>& artifacts);

// MLR (grid families), signal monotonicity and stability/neutrality report.
ojson check_report(const RunConfig& config);

}  // namespace ipe
