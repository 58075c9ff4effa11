#include "ipe/report.hpp"

#include <cmath>
#include <sstream>

#include "ipe/io.hpp"

namespace ipe {

namespace {

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson labelled(const std::vector<std::string>& labels, const std::vector<double>& values) {
    ojson out = ojson::object();
    for (std::size_t i = 0; i < labels.size() && i < values.size(); ++i) out[labels[i]] = number(values[i]);
    return out;
}

ojson numbers(const std::vector<double>& v) {
    ojson out = ojson::array();
    for (double x : v) out.push_back(number(x));
    return out;
}

}  // namespace

ojson to_json(const SpecFit& fit) {
    const auto& r = fit.request;
    const auto& t = fit.tsls;
    ojson j;
    j["spec"] = std::string(to_string(r.kind));
    j["interaction"] = r.kind == SpecKind::Passive ? ojson(std::string(to_string(r.interaction))) : ojson(nullptr);
    j["correction"] = r.kind == SpecKind::Conditional ? ojson(r.correction_name) : ojson(nullptr);
    j["gap_normalization"] = r.gap_normalization == GapNormalization::None ? "none" : "percent-of-signal";
    j["elasticity"] = r.elasticity_power ? ojson(*r.elasticity_power) : ojson(nullptr);
    j["controls"] = r.controls;
    j["n"] = t.n;
    j["gamma"] = number(t.gamma);
    j["se_gamma"] = number(t.se_gamma);
    j["gamma_exog"] = labelled(t.exog_labels, t.gamma_exog);
    j["se_gamma_exog"] = labelled(t.exog_labels, t.se_gamma_exog);
    j["pi"] = labelled(t.instrument_labels, t.pi);
    j["first_stage_exog"] = labelled(t.exog_labels, t.first_stage_exog);
    j["first_stage_f"] = number(t.first_stage_f);
    j["se_type"] = "HC1";
    j["warnings"] = fit.warnings;
    return j;
}

ojson to_json(const WeightReport& report, bool per_agent) {
    ojson j;
    j["pi"] = labelled(report.pi_labels, report.pi);
    j["normalization"] = number(report.normalization);
    j["estimand"] = number(report.estimand);
    j["negative_share"] = number(report.negative_share);
    j["negative_mass"] = number(report.negative_mass);
    j["n"] = report.weights.size();
    if (per_agent) {
        j["ids"] = report.ids;
        j["weights"] = numbers(report.weights);
        j["ape"] = numbers(report.ape);
    }
    return j;
}

ojson to_json(const CharacterizationResult& result) {
    ojson j;
    j["applicable"] = result.applicable;
    j["matches"] = result.matches;
    j["max_abs_dev"] = number(result.max_abs_dev);
    return j;
}

ojson to_json(const BinReport& report) {
    ojson j;
    j["statistic"] = report.statistic;
    j["gamma"] = number(report.gamma);
    j["total_weight"] = number(report.total_weight);
    j["total_contribution"] = number(report.total_contribution);
    j["sign_certified"] = report.sign_certified;
    j["edges"] = numbers(report.edges);
    ojson bins = ojson::array();
    for (const auto& b : report.bins) {
        ojson o;
        o["lo"] = number(b.lo);
        o["hi"] = number(b.hi);
        o["count"] = b.count;
        o["probability"] = number(b.probability);
        o["weight"] = b.empty ? ojson(nullptr) : number(b.weight);
        o["contribution"] = b.empty ? ojson(nullptr) : number(b.contribution);
        o["empty"] = b.empty;
        bins.push_back(std::move(o));
    }
    j["bins"] = std::move(bins);
    j["warnings"] = report.warnings;
    return j;
}

std::string plot_csv(const BinReport& report) {
    std::ostringstream os;
    os << "bin,lo,hi,count,probability,weight,contribution,empty\n";
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
        const auto& b = report.bins[k];
        os << k + 1 << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ','
           << format_double(b.probability) << ',' << (b.empty ? "" : format_double(b.weight)) << ','
           << (b.empty ? "" : format_double(b.contribution)) << ',' << (b.empty ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace ipe
