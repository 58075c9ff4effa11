#include "ipe/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ipe/error.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "diagnostics";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

std::vector<double> row_index(const linalg::DesignMatrix& inter, std::span<const double> pi) {
    if (pi.size() != inter.cols()) {
        fail(ErrorCode::Dimension, "first stage has " + std::to_string(pi.size()) + " coefficients for " +
                                       std::to_string(inter.cols()) + " interaction columns");
    }
    std::vector<double> out(inter.rows(), 0.0);
    for (std::size_t c = 0; c < inter.cols(); ++c) {
        const auto& col = inter.column(c);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += pi[c] * col[i];
    }
    return out;
}

std::vector<double> resolve_pi(const Panel& panel, const PanelSpec& spec) {
    return spec.pi ? *spec.pi : population_first_stage(panel, spec);
}

std::vector<double> mean_one(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    std::vector<double> out(v.size(), std::numeric_limits<double>::quiet_NaN());
    if (mean == 0.0 || !std::isfinite(mean)) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / mean;
    return out;
}

bool sign_certified(const SpecRequest& spec) {
    switch (spec.kind) {
        case SpecKind::Active: return true;
        case SpecKind::Conditional: return false;
        case SpecKind::Passive:
            return spec.interaction == InteractionKind::Sign || spec.interaction == InteractionKind::Gap;
    }
    return false;
}

// I_i' pi-hat for each record, matching the instrument columns of the fit.
std::vector<double> fitted_index(const RecordSet& records, const SpecFit& fit) {
    const auto& pi = fit.tsls.pi;
    std::vector<double> out(records.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& rec = records.rows[i];
        switch (fit.request.kind) {
            case SpecKind::Active: out[i] = pi[0]; break;
            case SpecKind::Conditional: out[i] = pi[0] * fit.request.correction(rec); break;
            case SpecKind::Passive: {
                const auto v = interaction_values(fit.request.interaction, *rec.signal_t, rec.prior_feature,
                                                  fit.request.gap_normalization);
                double s = 0.0;
                for (std::size_t c = 0; c < v.size(); ++c) s += pi[c] * v[c];
                out[i] = s;
                break;
            }
        }
    }
    return out;
}

}  // namespace

linalg::DesignMatrix panel_interaction(const Panel& panel, const PanelSpec& spec) {
    const std::size_t n = panel.rows.size();
    linalg::DesignMatrix out(n);
    if (panel.kind == DesignKind::Active) {
        out.add_column("one", std::vector<double>(n, 1.0));
        return out;
    }
    const auto labels = interaction_labels(spec.interaction);
    std::vector<std::vector<double>> cols(labels.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = panel.rows[i];
        if (!row.signal_t) fail(ErrorCode::Schema, "panel row " + std::to_string(i + 1) + " has no treated signal S^T");
        const auto v = interaction_values(spec.interaction, *row.signal_t, row.prior_feature, spec.gap_normalization);
        for (std::size_t c = 0; c < v.size(); ++c) cols[c][i] = v[c];
    }
    for (std::size_t c = 0; c < labels.size(); ++c) out.add_column(labels[c], std::move(cols[c]));
    return out;
}

std::vector<double> population_first_stage(const Panel& panel, const PanelSpec& spec) {
    if (panel.rows.empty()) fail(ErrorCode::Precondition, "panel is empty");
    const auto inter = panel_interaction(panel, spec);
    std::vector<double> dphi(panel.rows.size());
    for (std::size_t i = 0; i < dphi.size(); ++i) dphi[i] = panel.rows[i].delta_feature();
    return linalg::ols(inter, dphi).coefficients;
}

std::vector<double> WeightReport::sum_to_one() const {
    std::vector<double> out(weights);
    double total = 0.0;
    for (double w : weights) total += w;
    for (auto& w : out) w /= total;
    return out;
}

WeightReport population_weights(const Panel& panel, const PanelSpec& spec) {
    if (panel.rows.empty()) fail(ErrorCode::Precondition, "panel is empty");
    const auto inter = panel_interaction(panel, spec);
    WeightReport r;
    r.pi = resolve_pi(panel, spec);
    r.pi_labels = inter.labels();
    const auto index = row_index(inter, r.pi);
    const std::size_t n = panel.rows.size();
    std::vector<double> raw(n);
    double sum = 0.0, sum_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = panel.rows[i].delta_feature() * index[i];
        sum += raw[i];
        sum_abs += std::abs(raw[i]);
    }
    if (sum == 0.0 || std::abs(sum) <= 1e-14 * sum_abs || !std::isfinite(sum)) {
        fail(ErrorCode::DegenerateWeights, "weight denominator E[dphi I'pi] is zero");
    }
    r.normalization = sum / static_cast<double>(n);
    r.ids.reserve(n);
    r.weights.resize(n);
    r.ape.resize(n);
    double neg = 0.0, abs_total = 0.0, estimand = 0.0;
    std::size_t neg_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.ids.push_back(panel.rows[i].id);
        r.weights[i] = raw[i] / r.normalization;
        r.ape[i] = panel.rows[i].within_ape;
        estimand += r.weights[i] * r.ape[i];
        abs_total += std::abs(r.weights[i]);
        if (r.weights[i] < 0.0) {
            ++neg_count;
            neg += -r.weights[i];
        }
    }
    r.negative_share = static_cast<double>(neg_count) / static_cast<double>(n);
    r.negative_mass = abs_total > 0.0 ? neg / abs_total : 0.0;
    r.estimand = estimand / static_cast<double>(n);
    return r;
}

WeightReport population_weights_passive(const Panel& panel, InteractionKind kind, std::optional<std::vector<double>> pi,
                                        GapNormalization norm) {
    if (panel.kind != DesignKind::Passive) fail(ErrorCode::Precondition, "passive weights need a passive panel");
    return population_weights(panel, PanelSpec{kind, norm, std::move(pi)});
}

WeightReport population_weights_active(const Panel& panel) {
    if (panel.kind != DesignKind::Active) fail(ErrorCode::Precondition, "active weights need an active panel");
    return population_weights(panel, PanelSpec{});
}

double panel_estimand(const Panel& panel, const PanelSpec& spec) {
    if (panel.rows.empty()) fail(ErrorCode::Precondition, "panel is empty");
    const auto inter = panel_interaction(panel, spec);
    const auto index = row_index(inter, resolve_pi(panel, spec));
    double num = 0.0, den = 0.0, den_abs = 0.0;
    for (std::size_t i = 0; i < panel.rows.size(); ++i) {
        num += index[i] * panel.rows[i].delta_outcome();
        den += index[i] * panel.rows[i].delta_feature();
        den_abs += std::abs(index[i] * panel.rows[i].delta_feature());
    }
    if (den == 0.0 || std::abs(den) <= 1e-14 * den_abs) fail(ErrorCode::DegenerateWeights, "estimand denominator E[I'pi dphi] is zero");
    return num / den;
}

CharacterizationResult verify_weight_characterization(const Panel& panel, const PanelSpec& spec, bool applicable,
                                                      double tolerance) {
    CharacterizationResult out;
    out.applicable = applicable;
    const auto report = population_weights(panel, spec);
    const auto& pi = report.pi;
    std::vector<double> closed(panel.rows.size());
    for (std::size_t i = 0; i < closed.size(); ++i) {
        const auto& row = panel.rows[i];
        const double dphi = row.delta_feature();
        const double mag = std::abs(dphi);
        const double psi = sign_of(dphi);
        if (panel.kind == DesignKind::Active) {
            closed[i] = mag;
            continue;
        }
        const double gap = perception_gap(*row.signal_t, row.prior_feature, spec.gap_normalization);
        switch (spec.interaction) {
            case InteractionKind::Sign: closed[i] = mag * (gap != 0.0 ? 1.0 : 0.0); break;
            case InteractionKind::Gap: closed[i] = mag * std::abs(gap); break;
            case InteractionKind::OneGap: closed[i] = mag * (pi[0] * psi + pi[1] * std::abs(gap)); break;
            case InteractionKind::OnePrior: closed[i] = mag * (pi[0] * psi + pi[1] * psi * row.prior_feature); break;
            case InteractionKind::OneSignalPrior:
                closed[i] = mag * psi * (pi[0] + pi[1] * *row.signal_t + pi[2] * row.prior_feature);
                break;
        }
    }
    out.closed_form = mean_one(closed);
    out.weights = report.weights;
    double dev = 0.0;
    for (std::size_t i = 0; i < closed.size(); ++i) {
        const double d = std::abs(out.closed_form[i] - out.weights[i]);
        dev = std::isnan(d) ? std::numeric_limits<double>::infinity() : std::max(dev, d);
    }
    out.max_abs_dev = dev;
    out.matches = dev < tolerance;
    return out;
}

std::vector<double> bin_statistic(const RecordSet& records, const std::string& statistic, GapNormalization norm) {
    std::vector<double> out(records.rows.size());
    constexpr std::string_view prefix = "covariate:";
    std::size_t cov = 0;
    const bool is_cov = statistic.rfind(prefix, 0) == 0;
    if (is_cov) {
        const auto name = statistic.substr(prefix.size());
        const auto it = std::find(records.covariate_names.begin(), records.covariate_names.end(), name);
        if (it == records.covariate_names.end()) fail(ErrorCode::Validation, "unknown covariate '" + name + "' for bin statistic");
        cov = static_cast<std::size_t>(it - records.covariate_names.begin());
    } else if (statistic != "perception-gap" && statistic != "prior" && statistic != "signal") {
        fail(ErrorCode::Validation, "unknown bin statistic '" + statistic +
                                        "' (expected perception-gap, prior, signal or covariate:<name>)");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& r = records.rows[i];
        if (is_cov) {
            out[i] = r.covariates[cov];
        } else if (statistic == "prior") {
            out[i] = r.prior_feature;
        } else {
            const auto s = records.kind == DesignKind::Passive ? r.signal_t : r.signal_h;
            if (!s) fail(ErrorCode::Schema, "bin statistic '" + statistic + "' needs a design signal on row " + std::to_string(i + 1));
            out[i] = statistic == "signal" ? *s : perception_gap(*s, r.prior_feature, norm);
        }
    }
    return out;
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
    if (values.empty()) fail(ErrorCode::Precondition, "no values to bin");
    if (bins == 0) fail(ErrorCode::Precondition, "at least one bin is required");
    std::sort(values.begin(), values.end());
    std::vector<double> edges(bins + 1);
    const double last = static_cast<double>(values.size() - 1);
    for (std::size_t k = 0; k <= bins; ++k) {
        const double h = last * static_cast<double>(k) / static_cast<double>(bins);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        edges[k] = values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    }
    edges.front() = values.front();
    edges.back() = values.back();
    return edges;
}

BinReport characterize_bins(const RecordSet& records, const SpecRequest& spec, const BinOptions& options) {
    BinReport report;
    report.statistic = options.statistic.empty()
                           ? (records.kind == DesignKind::Passive ? "perception-gap" : "prior")
                           : options.statistic;
    report.sign_certified = sign_certified(spec);

    const SpecFit fit = estimate(records, spec);
    report.gamma = fit.tsls.gamma;
    const std::size_t n = records.rows.size();

    const auto stat = bin_statistic(records, report.statistic, spec.gap_normalization);
    report.edges = options.edges.empty() ? quantile_edges(stat, options.bins) : options.edges;
    const auto& e = report.edges;
    if (e.size() < 2) fail(ErrorCode::Validation, "bin edges need at least two values");
    for (std::size_t k = 1; k < e.size(); ++k)
        if (!(e[k] >= e[k - 1])) fail(ErrorCode::Validation, "bin edges must be nondecreasing");

    // Bin membership: [e0, e1], then (e_k, e_k+1].
    std::vector<std::size_t> bin_of(n);
    const std::size_t nbins = e.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = stat[i];
        if (!(x >= e.front() && x <= e.back())) {
            std::ostringstream os;
            os.precision(17);
            os << "row " << i + 1 << " has statistic " << x << " outside the bin edges [" << e.front() << ", "
               << e.back() << "]";
            fail(ErrorCode::Validation, os.str());
        }
        const auto it = std::lower_bound(e.begin() + 1, e.end(), x);
        bin_of[i] = std::min(static_cast<std::size_t>(it - e.begin()) - 1, nbins - 1);
    }

    // Per-row weights a_i on phi and Y: the bin ratio is sum a f phi / sum a phi.
    std::vector<double> a(n);
    if (options.method == BinMethod::Residualized) {
        const linalg::PivotedQR wqr(fit.exog);
        a = linalg::residualize(wqr, fit.tsls.fitted_endog);
    } else {
        const auto index = fitted_index(records, fit);
        const Group alt = alt_group(records.kind);
        std::size_t nt = 0;
        for (const auto& r : records.rows) nt += r.group == alt;
        const std::size_t nc = n - nt;
        if (nt == 0 || nc == 0) fail(ErrorCode::Precondition, "both groups must be present");
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = records.rows[i].group == alt ? index[i] / static_cast<double>(nt) : -index[i] / static_cast<double>(nc);
        }
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) denom += a[i] * fit.endog[i];
    if (denom == 0.0) fail(ErrorCode::DegenerateWeights, "bin characterization denominator is zero");

    report.bins.resize(nbins);
    std::vector<double> num_phi(nbins, 0.0), num_y(nbins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& b = report.bins[bin_of[i]];
        ++b.count;
        num_phi[bin_of[i]] += a[i] * fit.endog[i];
        num_y[bin_of[i]] += a[i] * fit.y[i];
    }
    for (std::size_t k = 0; k < nbins; ++k) {
        auto& b = report.bins[k];
        b.lo = e[k];
        b.hi = e[k + 1];
        if (b.count == 0) {
            b.empty = true;
            std::ostringstream os;
            os << "bin " << k + 1 << " (" << b.lo << ", " << b.hi << "] is empty and excluded from totals";
            report.warnings.push_back(os.str());
            continue;
        }
        b.probability = static_cast<double>(b.count) / static_cast<double>(n);
        b.weight = num_phi[k] / (b.probability * denom);
        b.contribution = num_y[k] / (b.probability * denom);
        report.total_weight += b.probability * b.weight;
        report.total_contribution += b.probability * b.contribution;
    }
    return report;
}

NegativeWeightExample one_prior_negative_weight_example() {
    NegativeWeightExample ex;
    const double prior_mean[] = {0.0, 2.0};
    const double slope[] = {1.0, 3.0};
    for (int k = 0; k < 2; ++k) {
        Agent a;
        a.id = k + 1;
        a.prior = GaussianBelief(prior_mean[k], 1.0);
        a.groups[Group::C] = GroupModel{NoUpdate{}, nullptr, 1.0};
        a.groups[Group::T] = GroupModel{Bayesian{}, nullptr, 1.0};
        a.action = AffineAction{0.0, slope[k]};
        ex.population.push_back(std::move(a));
    }
    ex.design = Design{PassiveDesign{[](const Agent&) { return 4.0; }}, 0.5, 1};
    ex.spec.interaction = InteractionKind::OnePrior;
    ex.spec.pi = std::vector<double>{1.0, -1.0};
    return ex;
}

}  // namespace ipe
