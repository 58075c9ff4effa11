#pragma once

// TSLS specifications for information provision experiments: passive control
// with an interaction vector I_i, active control, conditional (correction
// term) designs, log-elasticity variants, and convex aggregation across pairs.
// Estimators read realized records only.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipe/experiment.hpp"
#include "ipe/linalg.hpp"

namespace ipe {

enum class InteractionKind { Sign, Gap, OneGap, OnePrior, OneSignalPrior };
std::string_view to_string(InteractionKind k);  // sign, gap, one-gap, one-prior, one-signal-prior
InteractionKind parse_interaction(std::string_view text);

enum class GapNormalization { None, PercentOfSignal };

// 1{v >= 0} - 1{v <= 0}; zero at zero.
double sign_of(double v);

// Perception gap S^T - prior, optionally as a fraction of the signal. Domain
// error when normalizing by a zero signal.
double perception_gap(double signal_t, double prior, GapNormalization norm);

// Interaction vector for one agent. Sign always uses the raw gap.
std::vector<double> interaction_values(InteractionKind kind, double signal_t, double prior, GapNormalization norm);
std::vector<std::string> interaction_labels(InteractionKind kind);

// Interaction columns for every record (passive records; s^T needed on all rows).
linalg::DesignMatrix build_interaction(const RecordSet& records, InteractionKind kind,
                                       GapNormalization norm = GapNormalization::None);

enum class SpecKind { Passive, Active, Conditional };
std::string_view to_string(SpecKind k);
SpecKind parse_spec(std::string_view text);

using CorrectionFn = std::function<double(const ExperimentRecord&)>;

struct SpecRequest {
    SpecKind kind = SpecKind::Passive;
    InteractionKind interaction = InteractionKind::Sign;  // passive only
    GapNormalization gap_normalization = GapNormalization::None;
    std::vector<std::string> controls;  // covariate names added to W
    // OnePrior with heterogeneous signals: warn (default) or fail.
    bool strict_one_prior = false;
    // Conditional only: c(record) and a name for reports.
    CorrectionFn correction;
    std::string correction_name;
    // Log-elasticity variant: log(Y^n) and log(phi^n) replace Y and phi.
    std::optional<int> elasticity_power;
};

struct SpecFit {
    SpecRequest request;
    linalg::TSLSFit tsls;
    std::vector<std::string> warnings;
    // Rows actually used, in order, after any transformation (for diagnostics).
    std::vector<double> y;
    std::vector<double> endog;
    linalg::DesignMatrix exog;
};

SpecFit estimate(const RecordSet& records, const SpecRequest& request);

SpecFit passive_tsls(const RecordSet& records, InteractionKind kind, std::vector<std::string> controls = {},
                     GapNormalization norm = GapNormalization::None);
SpecFit active_tsls(const RecordSet& records, std::vector<std::string> controls = {});
SpecFit conditional_tsls(const RecordSet& records, CorrectionFn correction, std::string name,
                         std::vector<std::string> controls = {});
// Runs `request` with log(Y^n), log(phi^n); Domain error lists offending rows.
SpecFit elasticity_tsls(const RecordSet& records, int power, SpecRequest request);

// Built-in correction terms by name: "sign-gap", "one", "covariate:<name>".
CorrectionFn correction_by_name(const RecordSet& records, std::string_view name);

// Sum of alpha * beta with alpha >= 0 summing to one (within 1e-12).
double aggregate_pairs(std::span<const double> betas, std::span<const double> alphas);

}  // namespace ipe
