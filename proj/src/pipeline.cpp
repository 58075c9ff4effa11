#include "ipe/pipeline.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "ipe/error.hpp"
#include "ipe/io.hpp"

namespace ipe {

namespace {

std::vector<Agent> head(const std::vector<Agent>& population, std::size_t sample) {
    if (sample == 0 || sample >= population.size()) return population;
    return std::vector<Agent>(population.begin(), population.begin() + static_cast<std::ptrdiff_t>(sample));
}

ojson spec_report(const RunConfig& config, const SimulationResult& sim, const SpecEntry& entry, const SpecFit& fit,
                  const ConditionSummary& conditions, BinReport& bins) {
    ojson j;
    j["spec"] = entry.name;
    j["gamma_hat"] = fit.tsls.gamma;
    const bool panel_form = entry.request.kind != SpecKind::Conditional && !entry.request.elasticity_power;
    if (panel_form) {
        PanelSpec ps{entry.request.interaction, entry.request.gap_normalization, std::nullopt};
        const auto weights = population_weights(sim.panel, ps);
        ojson pop = to_json(weights);
        ps.pi = fit.tsls.pi;
        pop["estimand_fitted_pi"] = panel_estimand(sim.panel, ps);
        ps.pi.reset();
        pop["characterization"] = to_json(verify_weight_characterization(sim.panel, ps, conditions.applicable()));
        j["population"] = std::move(pop);
    } else {
        j["population"] = nullptr;
        j["population_note"] = "population weights are reported for level passive/active specs only";
    }
    BinOptions opts;
    opts.statistic = config.diagnostics.statistic;
    opts.bins = config.diagnostics.bins;
    opts.method = config.diagnostics.method;
    SpecRequest req = entry.request;
    if (req.kind == SpecKind::Conditional) req.correction = correction_by_name(sim.records, entry.correction);
    bins = characterize_bins(sim.records, req, opts);
    j["bins"] = to_json(bins);
    j["conditions"] = to_json(conditions);
    return j;
}

}  // namespace

ConditionSummary identification_conditions(const std::vector<Agent>& population, const Design& design,
                                           const Feature& feature, const Tolerances& tol, std::size_t sample) {
    ConditionSummary s;
    s.kind = design.kind();
    const auto agents = head(population, sample);
    s.checked = agents.size();
    const auto results = s.kind == DesignKind::Passive
                             ? stability_check(agents, design, feature, tol.feature_equality)
                             : neutrality_check(agents, design, feature, tol.feature_equality);
    for (const auto& r : results) {
        s.strict_failures += !r.strict;
        s.weak_failures += !r.weak;
        s.worst_deviation = std::max(s.worst_deviation, r.deviation);
    }
    std::vector<Group> signal_groups;
    if (s.kind == DesignKind::Passive) signal_groups = {Group::T};
    else signal_groups = {Group::L, Group::H};
    for (const auto& agent : agents) {
        bool ok = true;
        for (Group g : signal_groups) {
            const auto m = agent_monotonicity(agent, g, feature, 201, tol.probability);
            s.worst_monotonicity = std::max(s.worst_monotonicity, m.worst_violation);
            ok = ok && m.holds;
        }
        s.monotone_failures += !ok;
    }
    return s;
}

ojson to_json(const ConditionSummary& s) {
    ojson j;
    const bool passive = s.kind == DesignKind::Passive;
    j["agents_checked"] = s.checked;
    j["signal_monotone"] = s.monotone();
    j["monotonicity_failures"] = s.monotone_failures;
    j["worst_monotonicity_violation"] = s.worst_monotonicity;
    j[passive ? "stable" : "neutral"] = s.strict();
    j[passive ? "weakly_stable" : "weakly_neutral"] = s.weak();
    j[passive ? "stability_failures" : "neutrality_failures"] = s.strict_failures;
    j["worst_deviation"] = s.worst_deviation;
    j["characterization_applicable"] = s.applicable();
    return j;
}

std::vector<Artifact> run_artifacts(const RunConfig& config) {
    std::vector<Artifact> out;
    const auto sim = simulate(config.population, config.design, config.feature, config.covariate_names);
    {
        std::ostringstream os;
        write_records_csv(os, sim.records);
        out.push_back({"records.csv", os.str()});
    }
    {
        std::ostringstream os;
        write_panel_csv(os, sim.panel);
        out.push_back({"panel.csv", os.str()});
    }
    const auto conditions = identification_conditions(config.population, config.design, config.feature,
                                                      config.tolerances, config.diagnostics.condition_sample);
    for (const auto& entry : config.specs) {
        SpecRequest req = entry.request;
        if (req.kind == SpecKind::Conditional) req.correction = correction_by_name(sim.records, entry.correction);
        const SpecFit fit = estimate(sim.records, req);
        out.push_back({"fit-" + entry.name + ".json", dump(to_json(fit))});
        BinReport bins;
        out.push_back({"report-" + entry.name + ".json", dump(spec_report(config, sim, entry, fit, conditions, bins))});
        if (config.diagnostics.emit_plot_data) out.push_back({"plot-" + entry.name + ".csv", plot_csv(bins)});
    }
    return out;
}

Artifact manifest(const RunConfig& config, const std::vector<Artifact>& artifacts) {
    ojson j;
    j["schema_version"] = 1;  // docs/schemas.md
    j["seed"] = config.seed;
    j["config_fnv1a64"] = hex64(fnv1a64(config.document.dump()));
    j["design"] = std::string(to_string(config.design.kind()));
    j["feature"] = config.feature.name();
    j["agents"] = config.population.size();
    ojson files = ojson::array();
    for (const auto& a : artifacts) {
        ojson f;
        f["file"] = a.file;
        f["bytes"] = a.contents.size();
        f["fnv1a64"] = hex64(fnv1a64(a.contents));
        files.push_back(std::move(f));
    }
    j["artifacts"] = std::move(files);
    return {"manifest.json", dump(j)};
}

void write_artifacts(const std::string& output_dir, const std::vector<Artifact>& artifacts) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "pipeline", "cannot create output directory '" + output_dir + "': " + ec.message());
    for (const auto& a : artifacts) write_file((std::filesystem::path(output_dir) / a.file).string(), a.contents);
}

ojson check_report(const RunConfig& config) {
    ojson j;
    ojson mlr = ojson::object();
    std::set<const SignalFamily*> seen;
    for (const auto& [g, model] : config.population.front().groups) {
        if (!model.family || !seen.insert(model.family.get()).second) continue;
        const auto r = mlr_check(*model.family, 16, config.tolerances.algebraic);
        ojson m;
        m["holds"] = r.holds;
        m["violation_count"] = r.violation_count;
        ojson v = ojson::array();
        for (const auto& q : r.violations) v.push_back({q.j, q.j_prime, q.m, q.m_prime});
        m["violations"] = std::move(v);
        mlr[std::string(to_string(g))] = std::move(m);
    }
    j["mlr"] = std::move(mlr);
    j["conditions"] = to_json(identification_conditions(config.population, config.design, config.feature,
                                                        config.tolerances, config.diagnostics.condition_sample));
    return j;
}

}  // namespace ipe
