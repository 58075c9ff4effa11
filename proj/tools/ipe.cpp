// Command-line entry point: simulate, estimate, diagnose, check, run.
//
// Exit status: 0 success, 1 usage error, 2 unexpected failure, 10-19 one per
// library error code (see ipe/error.hpp).

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ipe/config.hpp"
#include "ipe/diagnostics.hpp"
#include "ipe/error.hpp"
#include "ipe/estimators.hpp"
#include "ipe/io.hpp"
#include "ipe/pipeline.hpp"
#include "ipe/report.hpp"

using namespace ipe;

namespace {

void emit(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-") std::cout << contents;
    else write_file(path, contents);
}

std::string csv_of(const RecordSet& r) {
    std::ostringstream os;
    write_records_csv(os, r);
    return os.str();
}

std::string csv_of(const Panel& p) {
    std::ostringstream os;
    write_panel_csv(os, p);
    return os.str();
}

struct EstimateArgs {
    std::string data, out, spec = "passive", interaction = "sign", correction, mode = "external";
    int elasticity = 0;
    bool normalize_gap = false, strict_one_prior = false;
    std::vector<std::string> controls;
};

struct DiagnoseArgs {
    std::string panel, out, plot, interaction = "sign", statistic, method = "residualized";
    std::size_t bins = 10;
    bool normalize_gap = false;
    std::vector<double> pi;
};

struct CheckArgs {
    std::string config, family, prior, rule = "bayesian", feature = "mean", out;
    double tau = 0.0, chi0 = 1.0, chi1 = 1.0;
};

int run_estimate(const EstimateArgs& a) {
    const RecordSet records = ingest(a.data, a.mode == "simulated" ? IngestMode::Simulated : IngestMode::External);
    SpecRequest req;
    req.kind = parse_spec(a.spec);
    req.interaction = parse_interaction(a.interaction);
    req.gap_normalization = a.normalize_gap ? GapNormalization::PercentOfSignal : GapNormalization::None;
    req.controls = a.controls;
    req.strict_one_prior = a.strict_one_prior;
    if (a.elasticity > 0) req.elasticity_power = a.elasticity;
    if (req.kind == SpecKind::Conditional) {
        if (a.correction.empty()) throw Error(ErrorCode::Precondition, "cli", "--spec conditional needs --correction");
        req.correction = correction_by_name(records, a.correction);
        req.correction_name = a.correction;
    }
    const SpecFit fit = estimate(records, req);
    for (const auto& w : fit.warnings) std::cerr << "ipe: warning: " << w << '\n';
    emit(a.out, dump(to_json(fit)));
    return 0;
}

int run_diagnose(const DiagnoseArgs& a) {
    const Panel panel = read_panel_file(a.panel);
    PanelSpec ps;
    ps.interaction = parse_interaction(a.interaction);
    ps.gap_normalization = a.normalize_gap ? GapNormalization::PercentOfSignal : GapNormalization::None;
    if (!a.pi.empty()) ps.pi = a.pi;

    ojson report;
    report["panel"] = a.panel;
    report["design"] = std::string(to_string(panel.kind));
    report["interaction"] = panel.kind == DesignKind::Passive ? ojson(a.interaction) : ojson(nullptr);
    const auto weights = population_weights(panel, ps);
    report["population"] = to_json(weights);
    report["population"]["panel_estimand"] = panel_estimand(panel, ps);

    SpecRequest req;
    req.kind = panel.kind == DesignKind::Passive ? SpecKind::Passive : SpecKind::Active;
    req.interaction = ps.interaction;
    req.gap_normalization = ps.gap_normalization;
    BinOptions opts;
    opts.bins = a.bins;
    opts.statistic = a.statistic;
    opts.method = a.method == "group-difference" ? BinMethod::GroupDifference : BinMethod::Residualized;
    const auto bins = characterize_bins(records_from_panel(panel), req, opts);
    report["bins"] = to_json(bins);
    emit(a.out, dump(report));
    if (!a.plot.empty()) write_file(a.plot, plot_csv(bins));
    return 0;
}

UpdateRule rule_from_args(const CheckArgs& a, const GridBelief& prior) {
    if (a.rule == "bayesian") return Bayesian{};
    if (a.rule == "anchored") return Anchored{a.tau, prior};
    if (a.rule == "grether") return Grether{a.chi0, a.chi1};
    if (a.rule == "none") return NoUpdate{};
    throw Error(ErrorCode::Validation, "cli", "unknown rule '" + a.rule + "'");
}

int run_check(const CheckArgs& a) {
    if (!a.config.empty()) {
        emit(a.out, dump(check_report(load_config(a.config))));
        return 0;
    }
    if (a.family.empty()) throw Error(ErrorCode::Precondition, "cli", "check needs --config or --family");
    std::ifstream fin(a.family);
    if (!fin) throw Error(ErrorCode::Io, "cli", "cannot open '" + a.family + "'");
    const SignalFamily family = read_signal_family_csv(fin, a.family);
    ojson report;
    const auto mlr = mlr_check(family, 16);
    report["mlr"] = {{"holds", mlr.holds}, {"violation_count", mlr.violation_count}};
    if (!a.prior.empty()) {
        std::ifstream pin(a.prior);
        if (!pin) throw Error(ErrorCode::Io, "cli", "cannot open '" + a.prior + "'");
        const GridBelief prior = read_grid_belief_csv(pin, a.prior);
        Feature feature = a.feature == "mean"            ? Feature::mean()
                          : a.feature == "second_moment" ? Feature::second_moment()
                          : a.feature == "variance"      ? Feature::variance()
                                                         : throw Error(ErrorCode::Validation, "cli", "unknown feature '" + a.feature + "'");
        const auto mono = signal_monotonicity_check(prior, rule_from_args(a, prior), family, feature);
        report["monotonicity"] = {{"rule", a.rule}, {"feature", a.feature}, {"holds", mono.holds},
                                  {"worst_violation", mono.worst_violation}};
    }
    emit(a.out, dump(report));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate, estimate and diagnose TSLS specifications for information provision experiments"};
    app.require_subcommand(1);

    std::string sim_config, sim_out;
    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate records.csv and panel.csv from a config");
    simulate_cmd->add_option("--config", sim_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    simulate_cmd->add_option("--out-dir", sim_out, "Output directory (default: config output_dir)");

    EstimateArgs est;
    auto* estimate_cmd = app.add_subcommand("estimate", "Fit one TSLS specification to a records CSV");
    estimate_cmd->add_option("--data", est.data, "Records CSV")->required()->check(CLI::ExistingFile);
    estimate_cmd->add_option("--spec", est.spec, "passive | active | conditional")
        ->check(CLI::IsMember({"passive", "active", "conditional"}));
    estimate_cmd->add_option("--interaction", est.interaction, "sign | gap | one-gap | one-prior | one-signal-prior")
        ->check(CLI::IsMember({"sign", "gap", "one-gap", "one-prior", "one-signal-prior"}));
    estimate_cmd->add_option("--elasticity", est.elasticity, "Use log(Y^n) and log(phi^n) with power n")
        ->check(CLI::PositiveNumber);
    estimate_cmd->add_flag("--normalize-gap", est.normalize_gap, "Perception gap as a fraction of the signal");
    estimate_cmd->add_option("--controls", est.controls, "Covariates added to W")->delimiter(',');
    estimate_cmd->add_option("--correction", est.correction, "Conditional spec: sign-gap | one | covariate:<name>");
    estimate_cmd->add_flag("--strict-one-prior", est.strict_one_prior, "Fail instead of warn on one-prior with varying signals");
    estimate_cmd->add_option("--mode", est.mode, "Header mode: external | simulated")
        ->check(CLI::IsMember({"external", "simulated"}));
    estimate_cmd->add_option("--out", est.out, "fit.json path (default: stdout)");

    DiagnoseArgs diag;
    auto* diagnose_cmd = app.add_subcommand("diagnose", "Population weights and bin characterization from a panel CSV");
    diagnose_cmd->add_option("--panel", diag.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
    diagnose_cmd->add_option("--interaction", diag.interaction, "Interaction (passive panels)")
        ->check(CLI::IsMember({"sign", "gap", "one-gap", "one-prior", "one-signal-prior"}));
    diagnose_cmd->add_flag("--normalize-gap", diag.normalize_gap, "Perception gap as a fraction of the signal");
    diagnose_cmd->add_option("--pi", diag.pi, "First-stage coefficients (default: population first stage)")->delimiter(',');
    diagnose_cmd->add_option("--bins", diag.bins, "Number of quantile bins")->check(CLI::PositiveNumber);
    diagnose_cmd->add_option("--statistic", diag.statistic, "perception-gap | prior | signal | covariate:<name>");
    diagnose_cmd->add_option("--method", diag.method, "residualized | group-difference")
        ->check(CLI::IsMember({"residualized", "group-difference"}));
    diagnose_cmd->add_option("--out", diag.out, "report.json path (default: stdout)");
    diagnose_cmd->add_option("--emit-plot-data", diag.plot, "Write per-bin weight/contribution table as CSV");

    CheckArgs chk;
    auto* check_cmd = app.add_subcommand("check", "MLR, signal monotonicity and stability/neutrality checks");
    check_cmd->add_option("--config", chk.config, "Run config (JSON)")->check(CLI::ExistingFile);
    check_cmd->add_option("--family", chk.family, "Signal family CSV")->check(CLI::ExistingFile);
    check_cmd->add_option("--prior", chk.prior, "Prior belief CSV (state,mass)")->check(CLI::ExistingFile);
    check_cmd->add_option("--rule", chk.rule, "bayesian | anchored | grether | none");
    check_cmd->add_option("--tau", chk.tau, "Anchoring weight (anchor = prior)");
    check_cmd->add_option("--chi0", chk.chi0, "Grether prior exponent");
    check_cmd->add_option("--chi1", chk.chi1, "Grether likelihood exponent");
    check_cmd->add_option("--feature", chk.feature, "mean | second_moment | variance");
    check_cmd->add_option("--out", chk.out, "Report path (default: stdout)");

    std::string run_config, run_out;
    auto* run_cmd = app.add_subcommand("run", "Full pipeline: simulate, estimate all specs, diagnose, manifest");
    run_cmd->add_option("--config", run_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out-dir", run_out, "Output directory (default: config output_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate_cmd) {
            const RunConfig cfg = load_config(sim_config);
            const auto sim = simulate(cfg.population, cfg.design, cfg.feature, cfg.covariate_names);
            write_artifacts(sim_out.empty() ? cfg.output_dir : sim_out,
                            {{"records.csv", csv_of(sim.records)}, {"panel.csv", csv_of(sim.panel)}});
            return 0;
        }
        if (*estimate_cmd) return run_estimate(est);
        if (*diagnose_cmd) return run_diagnose(diag);
        if (*check_cmd) return run_check(chk);
        if (*run_cmd) {
            const RunConfig cfg = load_config(run_config);
            auto artifacts = run_artifacts(cfg);
            artifacts.push_back(manifest(cfg, artifacts));
            const std::string dir = run_out.empty() ? cfg.output_dir : run_out;
            write_artifacts(dir, artifacts);
            std::cout << "wrote " << artifacts.size() << " files to " << dir << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "ipe: error [" << to_string(e.code()) << "] (" << e.module() << ") " << e.what() << '\n';
        return exit_status(e.code());
    } catch (const std::exception& e) {
        std::cerr << "ipe: unexpected failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
