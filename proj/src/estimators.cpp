#include "ipe/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ipe/error.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "estimators";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

bool is_constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::size_t covariate_index(const RecordSet& records, std::string_view name) {
    const auto& names = records.covariate_names;
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        std::string available;
        for (const auto& n : names) available += (available.empty() ? "" : ", ") + n;
        fail(ErrorCode::Validation, "unknown covariate '" + std::string(name) + "' (available: " +
                                        (available.empty() ? "none" : available) + ")");
    }
    return static_cast<std::size_t>(it - names.begin());
}

double required_signal_t(const ExperimentRecord& rec, std::size_t row) {
    if (!rec.signal_t) {
        fail(ErrorCode::Schema, "record " + std::to_string(rec.id) + " (row " + std::to_string(row + 1) +
                                    ") has no treated signal S^T; passive interactions need it on every row");
    }
    return *rec.signal_t;
}

void check_groups(const RecordSet& records, DesignKind expected) {
    if (records.rows.empty()) fail(ErrorCode::Precondition, "no records to estimate on");
    if (records.kind != expected) {
        fail(ErrorCode::Precondition, "specification needs " + std::string(to_string(expected)) +
                                          " records, got " + std::string(to_string(records.kind)));
    }
    const Group base = base_group(expected), alt = alt_group(expected);
    for (std::size_t r = 0; r < records.rows.size(); ++r) {
        const Group g = records.rows[r].group;
        if (g != base && g != alt) {
            fail(ErrorCode::Validation, "row " + std::to_string(r + 1) + " has group " + std::string(to_string(g)) +
                                            ", not part of a " + std::string(to_string(expected)) + " comparison");
        }
    }
}

std::vector<double> treated_indicator(const RecordSet& records) {
    const Group alt = alt_group(records.kind);
    std::vector<double> d(records.rows.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = records.rows[i].group == alt ? 1.0 : 0.0;
    return d;
}

// Adds each interaction-type column to W (unless constant: the intercept
// already spans it) and its product with the treatment indicator to Z.
void add_interacted(const std::string& label, const std::vector<double>& values, const std::vector<double>& d,
                    const std::string& alt, linalg::DesignMatrix& exog, linalg::DesignMatrix& instruments) {
    if (!is_constant(values)) exog.add_column(label, values);
    std::vector<double> z(values.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = d[i] * values[i];
    instruments.add_column(alt + "*" + label, std::move(z));
}

void add_controls(const RecordSet& records, const std::vector<std::string>& controls, linalg::DesignMatrix& exog) {
    for (const auto& name : controls) {
        const std::size_t k = covariate_index(records, name);
        std::vector<double> col(records.rows.size());
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = records.rows[i].covariates[k];
        exog.add_column(name, std::move(col));
    }
}

double log_power(double x, int n) { return std::log(std::pow(x, n)); }

}  // namespace

std::string_view to_string(InteractionKind k) {
    switch (k) {
        case InteractionKind::Sign: return "sign";
        case InteractionKind::Gap: return "gap";
        case InteractionKind::OneGap: return "one-gap";
        case InteractionKind::OnePrior: return "one-prior";
        case InteractionKind::OneSignalPrior: return "one-signal-prior";
    }
    return "?";
}

InteractionKind parse_interaction(std::string_view text) {
    for (auto k : {InteractionKind::Sign, InteractionKind::Gap, InteractionKind::OneGap, InteractionKind::OnePrior,
                   InteractionKind::OneSignalPrior}) {
        if (text == to_string(k)) return k;
    }
    fail(ErrorCode::Validation, "unknown interaction '" + std::string(text) +
                                    "' (expected sign, gap, one-gap, one-prior or one-signal-prior)");
}

std::string_view to_string(SpecKind k) {
    switch (k) {
        case SpecKind::Passive: return "passive";
        case SpecKind::Active: return "active";
        case SpecKind::Conditional: return "conditional";
    }
    return "?";
}

SpecKind parse_spec(std::string_view text) {
    if (text == "passive") return SpecKind::Passive;
    if (text == "active") return SpecKind::Active;
    if (text == "conditional") return SpecKind::Conditional;
    fail(ErrorCode::Validation, "unknown spec '" + std::string(text) + "' (expected passive, active or conditional)");
}

double sign_of(double v) { return (v >= 0.0 ? 1.0 : 0.0) - (v <= 0.0 ? 1.0 : 0.0); }

double perception_gap(double signal_t, double prior, GapNormalization norm) {
    const double gap = signal_t - prior;
    if (norm == GapNormalization::None) return gap;
    if (signal_t == 0.0) fail(ErrorCode::Domain, "cannot express the perception gap as a fraction of a zero signal");
    return gap / signal_t;
}

std::vector<double> interaction_values(InteractionKind kind, double signal_t, double prior, GapNormalization norm) {
    switch (kind) {
        case InteractionKind::Sign: return {sign_of(signal_t - prior)};
        case InteractionKind::Gap: return {perception_gap(signal_t, prior, norm)};
        case InteractionKind::OneGap: return {1.0, perception_gap(signal_t, prior, norm)};
        case InteractionKind::OnePrior: return {1.0, prior};
        case InteractionKind::OneSignalPrior: return {1.0, signal_t, prior};
    }
    return {};
}

std::vector<std::string> interaction_labels(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::Sign: return {"sign"};
        case InteractionKind::Gap: return {"gap"};
        case InteractionKind::OneGap: return {"one", "gap"};
        case InteractionKind::OnePrior: return {"one", "prior"};
        case InteractionKind::OneSignalPrior: return {"one", "signal", "prior"};
    }
    return {};
}

linalg::DesignMatrix build_interaction(const RecordSet& records, InteractionKind kind, GapNormalization norm) {
    const auto labels = interaction_labels(kind);
    std::vector<std::vector<double>> cols(labels.size(), std::vector<double>(records.rows.size()));
    for (std::size_t i = 0; i < records.rows.size(); ++i) {
        const auto& rec = records.rows[i];
        const auto v = interaction_values(kind, required_signal_t(rec, i), rec.prior_feature, norm);
        for (std::size_t c = 0; c < v.size(); ++c) cols[c][i] = v[c];
    }
    linalg::DesignMatrix out(records.rows.size());
    for (std::size_t c = 0; c < labels.size(); ++c) out.add_column(labels[c], std::move(cols[c]));
    return out;
}

SpecFit estimate(const RecordSet& records, const SpecRequest& request) {
    SpecFit fit;
    fit.request = request;
    const std::size_t n = records.rows.size();

    switch (request.kind) {
        case SpecKind::Passive: check_groups(records, DesignKind::Passive); break;
        case SpecKind::Active: check_groups(records, DesignKind::Active); break;
        case SpecKind::Conditional:
            if (!request.correction) fail(ErrorCode::Precondition, "conditional spec needs a correction term c");
            check_groups(records, records.kind);
            break;
    }

    fit.y.resize(n);
    fit.endog.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fit.y[i] = records.rows[i].outcome;
        fit.endog[i] = records.rows[i].posterior_feature;
    }
    if (request.elasticity_power) {
        const int p = *request.elasticity_power;
        if (p < 1) fail(ErrorCode::Precondition, "elasticity power must be a positive integer");
        std::vector<std::string> bad;
        std::size_t bad_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double yp = std::pow(fit.y[i], p), fp = std::pow(fit.endog[i], p);
            if (!(yp > 0.0) || !(fp > 0.0) || !std::isfinite(yp) || !std::isfinite(fp)) {
                if (bad.size() < 20) bad.push_back(std::to_string(i + 1) + " (id " + std::to_string(records.rows[i].id) + ")");
                ++bad_count;
                continue;
            }
            fit.y[i] = log_power(fit.y[i], p);
            fit.endog[i] = log_power(fit.endog[i], p);
        }
        if (bad_count > 0) {
            std::string rows;
            for (const auto& b : bad) rows += (rows.empty() ? "" : ", ") + b;
            if (bad_count > bad.size()) rows += ", ...";
            fail(ErrorCode::Domain, std::to_string(bad_count) + " row(s) have a nonpositive outcome^" +
                                        std::to_string(p) + " or feature^" + std::to_string(p) + ": rows " + rows);
        }
    }

    linalg::DesignMatrix exog(n);
    linalg::DesignMatrix instruments(n);
    exog.add_column("const", std::vector<double>(n, 1.0));
    const auto d = treated_indicator(records);
    const std::string alt(to_string(alt_group(records.kind)));

    if (request.kind == SpecKind::Passive) {
        const auto inter = build_interaction(records, request.interaction, request.gap_normalization);
        if (request.interaction == InteractionKind::OnePrior || request.interaction == InteractionKind::OneSignalPrior) {
            std::vector<double> s(n);
            for (std::size_t i = 0; i < n; ++i) s[i] = *records.rows[i].signal_t;
            const bool common = is_constant(s);
            if (request.interaction == InteractionKind::OneSignalPrior && common) {
                fail(ErrorCode::RankDeficient,
                     "one-signal-prior needs heterogeneous signals: a common signal is collinear with the intercept");
            }
            if (request.interaction == InteractionKind::OnePrior && !common) {
                const std::string msg = "one-prior is meant for a common signal; signals here vary across agents";
                if (request.strict_one_prior) fail(ErrorCode::Precondition, msg);
                fit.warnings.push_back(msg);
            }
        }
        for (std::size_t c = 0; c < inter.cols(); ++c) {
            add_interacted(inter.label(c), inter.column(c), d, alt, exog, instruments);
        }
    } else if (request.kind == SpecKind::Active) {
        instruments.add_column(alt, d);
    } else {
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = request.correction(records.rows[i]);
            if (!std::isfinite(c[i])) {
                fail(ErrorCode::Domain, "correction term is not finite at row " + std::to_string(i + 1));
            }
        }
        add_interacted("c", c, d, alt, exog, instruments);
    }
    add_controls(records, request.controls, exog);

    fit.tsls = linalg::tsls(fit.y, fit.endog, exog, instruments);
    fit.exog = std::move(exog);
    return fit;
}

SpecFit passive_tsls(const RecordSet& records, InteractionKind kind, std::vector<std::string> controls,
                     GapNormalization norm) {
    SpecRequest r;
    r.kind = SpecKind::Passive;
    r.interaction = kind;
    r.controls = std::move(controls);
    r.gap_normalization = norm;
    return estimate(records, r);
}

SpecFit active_tsls(const RecordSet& records, std::vector<std::string> controls) {
    SpecRequest r;
    r.kind = SpecKind::Active;
    r.controls = std::move(controls);
    return estimate(records, r);
}

SpecFit conditional_tsls(const RecordSet& records, CorrectionFn correction, std::string name,
                         std::vector<std::string> controls) {
    SpecRequest r;
    r.kind = SpecKind::Conditional;
    r.correction = std::move(correction);
    r.correction_name = std::move(name);
    r.controls = std::move(controls);
    return estimate(records, r);
}

SpecFit elasticity_tsls(const RecordSet& records, int power, SpecRequest request) {
    request.elasticity_power = power;
    return estimate(records, request);
}

CorrectionFn correction_by_name(const RecordSet& records, std::string_view name) {
    if (name == "sign-gap") {
        return [](const ExperimentRecord& r) {
            if (!r.signal_t) fail(ErrorCode::Schema, "sign-gap correction needs S^T on every row");
            return sign_of(*r.signal_t - r.prior_feature);
        };
    }
    if (name == "one") return [](const ExperimentRecord&) { return 1.0; };
    constexpr std::string_view prefix = "covariate:";
    if (name.substr(0, prefix.size()) == prefix) {
        const std::size_t k = covariate_index(records, name.substr(prefix.size()));
        return [k](const ExperimentRecord& r) { return r.covariates.at(k); };
    }
    fail(ErrorCode::Validation, "unknown correction '" + std::string(name) + "' (expected sign-gap, one or covariate:<name>)");
}

double aggregate_pairs(std::span<const double> betas, std::span<const double> alphas) {
    if (betas.size() != alphas.size() || betas.empty()) {
        fail(ErrorCode::Dimension, "aggregation needs one weight per pairwise estimate");
    }
    double total = 0.0, out = 0.0;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] >= 0.0)) fail(ErrorCode::Validation, "aggregation weights must be nonnegative");
        total += alphas[k];
        out += alphas[k] * betas[k];
    }
    if (std::abs(total - 1.0) > Tolerances{}.algebraic) fail(ErrorCode::Validation, "aggregation weights must sum to one");
    return out;
}

}  // namespace ipe
