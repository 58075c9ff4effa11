#pragma once

// Agent populations, passive (C/T) and active (L/H) designs, seeded group
// assignment, and simulation of realized records plus the full counterfactual
// panel (every agent's posterior feature and outcome under both groups).

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ipe/actions.hpp"
#include "ipe/beliefs.hpp"

namespace ipe {

enum class Group { C, T, L, H };
std::string_view to_string(Group g);
Group parse_group(std::string_view text);

enum class DesignKind { Passive, Active };
std::string_view to_string(DesignKind k);
// Comparison group (C or L) and treatment group (T or H).
Group base_group(DesignKind k);
Group alt_group(DesignKind k);

using Belief = std::variant<GridBelief, GaussianBelief>;
double feature_value(const Belief& belief, const Feature& feature);

struct GroupModel {
    UpdateRule rule = NoUpdate{};
    std::shared_ptr<const SignalFamily> family;  // grid agents
    double perceived_noise = 1.0;                // Gaussian agents
    SnapMode snap = SnapMode::Nearest;
};

struct Agent {
    std::int64_t id = 0;
    Belief prior = GaussianBelief(0.0, 1.0);
    std::map<Group, GroupModel> groups;
    ActionFunction action = AffineAction{0.0, 1.0};
    std::vector<double> covariates;
};

// Posterior of `agent` in group `g` after `signal` (none for control).
Belief posterior(const Agent& agent, Group g, std::optional<double> signal);

// Signals may depend on anything observable about the agent.
using SignalFn = std::function<double(const Agent&)>;

struct PassiveDesign {
    SignalFn treated;
};
struct ActiveDesign {
    SignalFn low;
    SignalFn high;
};

struct Design {
    std::variant<PassiveDesign, ActiveDesign> arms;
    double assignment_prob = 0.5;
    std::uint64_t seed = 0;

    DesignKind kind() const noexcept {
        return std::holds_alternative<PassiveDesign>(arms) ? DesignKind::Passive : DesignKind::Active;
    }
};

struct ExperimentRecord {
    std::int64_t id = 0;
    Group group = Group::C;
    // Design signals. Passive rows carry s^T for every agent (control rows
    // included, so interactions are computable for all); active rows carry
    // both s^L and s^H.
    std::optional<double> signal_t;
    std::optional<double> signal_l;
    std::optional<double> signal_h;
    double prior_feature = 0.0;
    double posterior_feature = 0.0;
    double outcome = 0.0;
    std::vector<double> covariates;

    // The signal the agent actually saw; none in the control arm.
    std::optional<double> received_signal() const;
};

struct RecordSet {
    DesignKind kind = DesignKind::Passive;
    std::vector<std::string> covariate_names;
    std::vector<ExperimentRecord> rows;
};

struct PanelRow {
    std::int64_t id = 0;
    Group group = Group::C;  // realized assignment
    double prior_feature = 0.0;
    std::optional<double> signal_t;
    std::optional<double> signal_l;
    std::optional<double> signal_h;
    double posterior_base = 0.0;  // C or L
    double posterior_alt = 0.0;   // T or H
    double outcome_base = 0.0;
    double outcome_alt = 0.0;
    double within_ape = 0.0;  // secant slope of the action over [posterior_base, posterior_alt]
    std::vector<double> covariates;

    double delta_feature() const { return posterior_alt - posterior_base; }
    double delta_outcome() const { return outcome_alt - outcome_base; }
    // S^T - prior feature; Precondition error when s^T is absent.
    double perception_gap() const;
};

struct Panel {
    DesignKind kind = DesignKind::Passive;
    std::vector<std::string> covariate_names;
    std::vector<PanelRow> rows;
};

struct SimulationResult {
    RecordSet records;
    Panel panel;
};

// Realized records implied by a panel's assignment column.
RecordSet records_from_panel(const Panel& panel);

// i.i.d. Bernoulli(p) draws of the treatment group from the assignment stream
// of `seed`; p must lie strictly inside (0, 1).
std::vector<Group> assign_groups(std::size_t n, double p, std::uint64_t seed, DesignKind kind = DesignKind::Passive);

std::vector<std::string> default_covariate_names(std::size_t k);

SimulationResult simulate(const std::vector<Agent>& population, const Design& design, const Feature& feature,
                          std::vector<std::string> covariate_names = {});

// Realized records for an explicit assignment (used by enumeration oracles).
SimulationResult simulate_assigned(const std::vector<Agent>& population, const Design& design, const Feature& feature,
                                   const std::vector<Group>& groups, std::vector<std::string> covariate_names = {});

struct ConditionResult {
    std::int64_t id = 0;
    bool strict = false;    // equality within tolerance
    bool weak = false;      // the weak inequality
    double deviation = 0.0; // |lhs - rhs| of the strict condition
};

// phi(B^T(.|prior feature)) vs phi(B^C), plus the weak-stability inequality.
std::vector<ConditionResult> stability_check(const std::vector<Agent>& population, const Design& design,
                                             const Feature& feature, double tolerance = Tolerances{}.feature_equality);
// phi(B^H(.|S^L)) vs phi(B^L(.|S^L)), plus the weak-neutrality inequality.
std::vector<ConditionResult> neutrality_check(const std::vector<Agent>& population, const Design& design,
                                              const Feature& feature, double tolerance = Tolerances{}.feature_equality);

// Posterior feature as a function of the signal for one agent and group:
// the whole signal grid for grid agents, a probe grid of `probes` points
// spanning the prior mean +- 10 prior sd for Gaussian agents.
MonotonicityReport agent_monotonicity(const Agent& agent, Group g, const Feature& feature, std::size_t probes = 201,
                                      double tolerance = Tolerances{}.probability);

}  // namespace ipe
