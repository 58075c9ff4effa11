#include "ipe/experiment.hpp"

#include <cmath>
#include <sstream>

#include "ipe/error.hpp"
#include "ipe/random.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "experiment";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

template <typename F>
auto with_agent(std::int64_t id, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), e.module(), "agent " + std::to_string(id) + ": " + e.what());
    }
}

const GroupModel& model_for(const Agent& agent, Group g) {
    const auto it = agent.groups.find(g);
    if (it == agent.groups.end()) {
        fail(ErrorCode::Precondition, "agent " + std::to_string(agent.id) + " has no model for group " +
                                          std::string(to_string(g)));
    }
    return it->second;
}

double checked_signal(const SignalFn& fn, const Agent& agent, const char* which) {
    if (!fn) fail(ErrorCode::Precondition, std::string("design has no ") + which + " signal function");
    const double s = fn(agent);
    if (!std::isfinite(s)) {
        fail(ErrorCode::Domain, std::string(which) + " signal for agent " + std::to_string(agent.id) + " is not finite");
    }
    return s;
}

struct DesignSignals {
    std::optional<double> t, l, h;
};

DesignSignals signals_for(const Agent& agent, const Design& design) {
    DesignSignals s;
    if (const auto* p = std::get_if<PassiveDesign>(&design.arms)) {
        s.t = checked_signal(p->treated, agent, "treated");
    } else {
        const auto& a = std::get<ActiveDesign>(design.arms);
        s.l = checked_signal(a.low, agent, "low");
        s.h = checked_signal(a.high, agent, "high");
        if (!(*s.l < *s.h)) {
            std::ostringstream os;
            os.precision(17);
            os << "active design needs S^L < S^H; agent " << agent.id << " has " << *s.l << " >= " << *s.h;
            fail(ErrorCode::Precondition, os.str());
        }
    }
    return s;
}

void check_population(const std::vector<Agent>& population, const Design& design) {
    if (population.empty()) fail(ErrorCode::Precondition, "population is empty");
    if (!(design.assignment_prob > 0.0 && design.assignment_prob < 1.0)) {
        fail(ErrorCode::Precondition, "assignment probability must lie strictly between 0 and 1");
    }
    const std::size_t k = population.front().covariates.size();
    const Group base = base_group(design.kind());
    const Group alt = alt_group(design.kind());
    for (const auto& agent : population) {
        if (agent.covariates.size() != k) {
            fail(ErrorCode::Dimension, "agent " + std::to_string(agent.id) + " has " +
                                           std::to_string(agent.covariates.size()) + " covariates, expected " +
                                           std::to_string(k));
        }
        model_for(agent, base);
        model_for(agent, alt);
    }
}

}  // namespace

std::string_view to_string(Group g) {
    switch (g) {
        case Group::C: return "C";
        case Group::T: return "T";
        case Group::L: return "L";
        case Group::H: return "H";
    }
    return "?";
}

Group parse_group(std::string_view text) {
    if (text == "C") return Group::C;
    if (text == "T") return Group::T;
    if (text == "L") return Group::L;
    if (text == "H") return Group::H;
    fail(ErrorCode::Validation, "unknown group label '" + std::string(text) + "' (expected C, T, L or H)");
}

std::string_view to_string(DesignKind k) { return k == DesignKind::Passive ? "passive" : "active"; }
Group base_group(DesignKind k) { return k == DesignKind::Passive ? Group::C : Group::L; }
Group alt_group(DesignKind k) { return k == DesignKind::Passive ? Group::T : Group::H; }

double feature_value(const Belief& belief, const Feature& feature) {
    return std::visit([&](const auto& b) { return feature_value(b, feature); }, belief);
}

Belief posterior(const Agent& agent, Group g, std::optional<double> signal) {
    const GroupModel& model = model_for(agent, g);
    return with_agent(agent.id, [&]() -> Belief {
        if (const auto* grid = std::get_if<GridBelief>(&agent.prior)) {
            return apply_rule(*grid, model.rule, model.family.get(), signal, model.snap);
        }
        return apply_rule(std::get<GaussianBelief>(agent.prior), model.rule, model.perceived_noise, signal);
    });
}

std::optional<double> ExperimentRecord::received_signal() const {
    switch (group) {
        case Group::C: return std::nullopt;
        case Group::T: return signal_t;
        case Group::L: return signal_l;
        case Group::H: return signal_h;
    }
    return std::nullopt;
}

double PanelRow::perception_gap() const {
    if (!signal_t) fail(ErrorCode::Precondition, "perception gap needs the treated signal S^T");
    return *signal_t - prior_feature;
}

RecordSet records_from_panel(const Panel& panel) {
    RecordSet out;
    out.kind = panel.kind;
    out.covariate_names = panel.covariate_names;
    out.rows.reserve(panel.rows.size());
    const Group alt = alt_group(panel.kind);
    for (const auto& row : panel.rows) {
        ExperimentRecord rec;
        rec.id = row.id;
        rec.group = row.group;
        rec.signal_t = row.signal_t;
        rec.signal_l = row.signal_l;
        rec.signal_h = row.signal_h;
        rec.prior_feature = row.prior_feature;
        const bool treated = row.group == alt;
        rec.posterior_feature = treated ? row.posterior_alt : row.posterior_base;
        rec.outcome = treated ? row.outcome_alt : row.outcome_base;
        rec.covariates = row.covariates;
        out.rows.push_back(std::move(rec));
    }
    return out;
}

std::vector<Group> assign_groups(std::size_t n, double p, std::uint64_t seed, DesignKind kind) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Precondition, "assignment probability must lie strictly between 0 and 1");
    Rng rng(seed, Stream::Assignment);
    std::vector<Group> out(n);
    const Group base = base_group(kind), alt = alt_group(kind);
    for (auto& g : out) g = rng.bernoulli(p) ? alt : base;
    return out;
}

std::vector<std::string> default_covariate_names(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t j = 1; j <= k; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

SimulationResult simulate(const std::vector<Agent>& population, const Design& design, const Feature& feature,
                          std::vector<std::string> covariate_names) {
    check_population(population, design);
    return simulate_assigned(population, design, feature,
                             assign_groups(population.size(), design.assignment_prob, design.seed, design.kind()),
                             std::move(covariate_names));
}

SimulationResult simulate_assigned(const std::vector<Agent>& population, const Design& design, const Feature& feature,
                                   const std::vector<Group>& groups, std::vector<std::string> covariate_names) {
    check_population(population, design);
    if (groups.size() != population.size()) fail(ErrorCode::Dimension, "one group label per agent is required");
    const DesignKind kind = design.kind();
    const Group base = base_group(kind), alt = alt_group(kind);
    const std::size_t k = population.front().covariates.size();
    if (covariate_names.empty()) covariate_names = default_covariate_names(k);
    if (covariate_names.size() != k) fail(ErrorCode::Dimension, "covariate names do not match covariate count");

    SimulationResult out;
    out.records.kind = out.panel.kind = kind;
    out.records.covariate_names = out.panel.covariate_names = covariate_names;
    out.records.rows.reserve(population.size());
    out.panel.rows.reserve(population.size());

    for (std::size_t i = 0; i < population.size(); ++i) {
        const Agent& agent = population[i];
        if (groups[i] != base && groups[i] != alt) {
            fail(ErrorCode::Validation, "group " + std::string(to_string(groups[i])) + " is not part of a " +
                                            std::string(to_string(kind)) + " design");
        }
        const DesignSignals s = signals_for(agent, design);
        PanelRow row;
        row.id = agent.id;
        row.group = groups[i];
        row.signal_t = s.t;
        row.signal_l = s.l;
        row.signal_h = s.h;
        row.covariates = agent.covariates;
        with_agent(agent.id, [&] {
            row.prior_feature = feature_value(agent.prior, feature);
            const std::optional<double> base_signal = kind == DesignKind::Passive ? std::nullopt : s.l;
            const std::optional<double> alt_signal = kind == DesignKind::Passive ? s.t : s.h;
            row.posterior_base = feature_value(posterior(agent, base, base_signal), feature);
            row.posterior_alt = feature_value(posterior(agent, alt, alt_signal), feature);
            row.outcome_base = outcome(agent.action, row.posterior_base);
            row.outcome_alt = outcome(agent.action, row.posterior_alt);
            row.within_ape = within_agent_ape(agent.action, row.posterior_base, row.posterior_alt);
        });

        ExperimentRecord rec;
        rec.id = agent.id;
        rec.group = groups[i];
        rec.signal_t = s.t;
        rec.signal_l = s.l;
        rec.signal_h = s.h;
        rec.prior_feature = row.prior_feature;
        rec.posterior_feature = groups[i] == alt ? row.posterior_alt : row.posterior_base;
        rec.outcome = groups[i] == alt ? row.outcome_alt : row.outcome_base;
        rec.covariates = agent.covariates;
        out.records.rows.push_back(std::move(rec));
        out.panel.rows.push_back(std::move(row));
    }
    return out;
}

std::vector<ConditionResult> stability_check(const std::vector<Agent>& population, const Design& design,
                                             const Feature& feature, double tolerance) {
    if (design.kind() != DesignKind::Passive) fail(ErrorCode::Precondition, "stability is defined for passive designs");
    const auto& arms = std::get<PassiveDesign>(design.arms);
    std::vector<ConditionResult> out;
    out.reserve(population.size());
    for (const auto& agent : population) {
        const double s_t = checked_signal(arms.treated, agent, "treated");
        ConditionResult r{agent.id};
        with_agent(agent.id, [&] {
            const double s_phi = feature_value(agent.prior, feature);
            const double confirmed = feature_value(posterior(agent, Group::T, s_phi), feature);
            const double control = feature_value(posterior(agent, Group::C, std::nullopt), feature);
            const double treated = feature_value(posterior(agent, Group::T, s_t), feature);
            r.deviation = std::abs(confirmed - control);
            r.strict = r.deviation <= tolerance;
            r.weak = r.deviation <= std::abs(treated - confirmed) + tolerance;
        });
        out.push_back(r);
    }
    return out;
}

std::vector<ConditionResult> neutrality_check(const std::vector<Agent>& population, const Design& design,
                                              const Feature& feature, double tolerance) {
    if (design.kind() != DesignKind::Active) fail(ErrorCode::Precondition, "neutrality is defined for active designs");
    std::vector<ConditionResult> out;
    out.reserve(population.size());
    for (const auto& agent : population) {
        const DesignSignals s = signals_for(agent, design);
        ConditionResult r{agent.id};
        with_agent(agent.id, [&] {
            const double high_at_low = feature_value(posterior(agent, Group::H, s.l), feature);
            const double low_at_low = feature_value(posterior(agent, Group::L, s.l), feature);
            const double high_at_high = feature_value(posterior(agent, Group::H, s.h), feature);
            r.deviation = std::abs(high_at_low - low_at_low);
            r.strict = r.deviation <= tolerance;
            r.weak = r.deviation <= std::abs(high_at_high - high_at_low) + tolerance;
        });
        out.push_back(r);
    }
    return out;
}

MonotonicityReport agent_monotonicity(const Agent& agent, Group g, const Feature& feature, std::size_t probes,
                                      double tolerance) {
    const GroupModel& model = model_for(agent, g);
    return with_agent(agent.id, [&]() -> MonotonicityReport {
        if (const auto* grid = std::get_if<GridBelief>(&agent.prior)) {
            if (!model.family) fail(ErrorCode::Precondition, "grid agent has no signal family for group " + std::string(to_string(g)));
            return signal_monotonicity_check(*grid, model.rule, *model.family, feature, tolerance);
        }
        const auto& prior = std::get<GaussianBelief>(agent.prior);
        const double sd = std::sqrt(prior.variance());
        MonotonicityReport report;
        for (double s : linspace(prior.mean() - 10.0 * sd, prior.mean() + 10.0 * sd, std::max<std::size_t>(probes, 2))) {
            report.feature_path.push_back(feature_value(posterior(agent, g, s), feature));
        }
        for (std::size_t j = 1; j < report.feature_path.size(); ++j) {
            report.worst_violation = std::max(report.worst_violation, report.feature_path[j - 1] - report.feature_path[j]);
        }
        report.holds = report.worst_violation <= tolerance;
        return report;
    });
}

}  // namespace ipe
