#include "ipe/beliefs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ipe/error.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "beliefs";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

bool grids_match(const StateGrid& a, const StateGrid& b) {
    if (a == b) return true;
    if (a->size() != b->size()) return false;
    for (std::size_t m = 0; m < a->size(); ++m) {
        const double scale = std::max({1.0, std::abs((*a)[m]), std::abs((*b)[m])});
        if (std::abs((*a)[m] - (*b)[m]) > Tolerances{}.algebraic * scale) return false;
    }
    return true;
}

void require_same_grid(const GridBelief& prior, const SignalFamily& family) {
    if (!grids_match(prior.grid(), family.grid())) {
        fail(ErrorCode::Dimension, "prior state grid does not match the signal family's state grid");
    }
}

GridBelief normalize_or_fail(const StateGrid& grid, std::vector<double> weights, const char* what) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        fail(ErrorCode::DegenerateEvidence,
             std::string(what) + ": signal has zero likelihood under every state with prior support");
    }
    for (auto& w : weights) w /= total;
    return GridBelief(grid, std::move(weights));
}

std::vector<double> bayes_weights(const GridBelief& prior, std::span<const double> likelihood) {
    std::vector<double> w(prior.size());
    for (std::size_t m = 0; m < w.size(); ++m) w[m] = likelihood[m] * prior.masses()[m];
    return w;
}

void check_anchor(double tau, const GridBelief& anchor, const GridBelief& prior) {
    if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorCode::Precondition, "anchoring weight tau must lie in [0, 1]");
    if (!anchor.same_grid(prior)) fail(ErrorCode::Dimension, "anchor belief must share the prior's state grid");
}

void check_grether(double chi0, double chi1) {
    if (!(chi0 > 0.0) || !(chi1 > 0.0)) {
        fail(ErrorCode::Precondition, "Grether exponents chi0 and chi1 must be strictly positive");
    }
}

GridBelief mix(double tau, const GridBelief& anchor, const GridBelief& other) {
    std::vector<double> out(other.size());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = tau * anchor.masses()[m] + (1.0 - tau) * other.masses()[m];
    return GridBelief(other.grid(), std::move(out));
}

GridBelief shifted(const GridBelief& belief, double shift) {
    std::vector<double> states(belief.states().begin(), belief.states().end());
    for (auto& s : states) s += shift;
    return GridBelief(make_grid(std::move(states)), std::vector<double>(belief.masses().begin(), belief.masses().end()));
}

GridBelief grether_from_likelihood(const GridBelief& prior, std::span<const double> likelihood, double chi0,
                                   double chi1) {
    std::vector<double> w(prior.size());
    for (std::size_t m = 0; m < w.size(); ++m) {
        const double p = prior.masses()[m];
        const double q = likelihood.empty() ? 1.0 : likelihood[m];
        w[m] = std::pow(q, chi1) * std::pow(p, chi0);
    }
    return normalize_or_fail(prior.grid(), std::move(w), "grether_update");
}

// Posterior for a signal already resolved to grid index j (or no signal).
GridBelief posterior_at(const GridBelief& prior, const UpdateRule& rule, const SignalFamily* family,
                        std::optional<std::size_t> j) {
    std::span<const double> likelihood;
    if (j) likelihood = family->likelihood(*j);
    return std::visit(
        [&](const auto& r) -> GridBelief {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, NoUpdate>) {
                return prior;
            } else if constexpr (std::is_same_v<R, Drift>) {
                return shifted(prior, r.shift);
            } else if constexpr (std::is_same_v<R, Bayesian>) {
                if (!j) return prior;
                return normalize_or_fail(prior.grid(), bayes_weights(prior, likelihood), "bayes_update");
            } else if constexpr (std::is_same_v<R, Anchored>) {
                check_anchor(r.tau, r.anchor, prior);
                if (!j) return mix(r.tau, r.anchor, prior);
                if (r.tau == 1.0) return r.anchor;
                return mix(r.tau, r.anchor,
                           normalize_or_fail(prior.grid(), bayes_weights(prior, likelihood), "anchored_update"));
            } else {
                check_grether(r.chi0, r.chi1);
                return grether_from_likelihood(prior, likelihood, r.chi0, r.chi1);
            }
        },
        rule);
}

}  // namespace

StateGrid make_grid(std::vector<double> points) {
    if (points.empty()) fail(ErrorCode::Validation, "state grid must be nonempty");
    for (std::size_t m = 0; m < points.size(); ++m) {
        if (!std::isfinite(points[m])) fail(ErrorCode::Validation, "state grid contains a non-finite value");
        if (m > 0 && !(points[m] > points[m - 1])) fail(ErrorCode::Validation, "state grid must be strictly increasing");
    }
    return std::make_shared<const std::vector<double>>(std::move(points));
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
    std::vector<double> w(grid.size(), 0.0);
    if (grid.size() == 1) {
        w[0] = 1.0;
        return w;
    }
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    return w;
}

GridBelief::GridBelief(StateGrid states, std::vector<double> masses, double tolerance)
    : states_(std::move(states)), masses_(std::move(masses)) {
    if (!states_) fail(ErrorCode::Validation, "belief has no state grid");
    if (masses_.size() != states_->size()) {
        fail(ErrorCode::Dimension, "belief has " + std::to_string(masses_.size()) + " masses for " +
                                       std::to_string(states_->size()) + " states");
    }
    double total = 0.0;
    for (double p : masses_) {
        if (!std::isfinite(p) || p < 0.0) fail(ErrorCode::Validation, "belief masses must be finite and nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > tolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "belief masses sum to " << total << ", not 1";
        fail(ErrorCode::Validation, os.str());
    }
}

GridBelief::GridBelief(std::vector<double> states, std::vector<double> masses, double tolerance)
    : GridBelief(make_grid(std::move(states)), std::move(masses), tolerance) {}

GridBelief GridBelief::normalized(StateGrid states, std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::Validation, "belief weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0.0)) fail(ErrorCode::Validation, "belief weights sum to zero");
    for (auto& w : weights) w /= total;
    return GridBelief(std::move(states), std::move(weights));
}

GridBelief GridBelief::point_mass(StateGrid states, std::size_t index) {
    std::vector<double> masses(states->size(), 0.0);
    if (index >= masses.size()) fail(ErrorCode::Dimension, "point mass index outside the state grid");
    masses[index] = 1.0;
    return GridBelief(std::move(states), std::move(masses));
}

GridBelief GridBelief::uniform(StateGrid states) {
    const std::size_t m = states->size();
    return GridBelief(std::move(states), std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

GridBelief GridBelief::discretized_normal(StateGrid states, double mean, double variance) {
    if (!(variance > 0.0)) fail(ErrorCode::Precondition, "normal prior variance must be positive");
    const auto quad = trapezoid_weights(*states);
    std::vector<double> w(states->size());
    for (std::size_t m = 0; m < w.size(); ++m) {
        const double z = (*states)[m] - mean;
        w[m] = std::exp(-0.5 * z * z / variance) * quad[m];
    }
    return normalized(std::move(states), std::move(w));
}

bool GridBelief::same_grid(const GridBelief& other) const { return grids_match(states_, other.states_); }

GaussianBelief::GaussianBelief(double mean, double variance) : mean_(mean), variance_(variance) {
    if (!std::isfinite(mean)) fail(ErrorCode::Validation, "Gaussian belief mean must be finite");
    if (!(variance > 0.0) || !std::isfinite(variance)) {
        fail(ErrorCode::Validation, "Gaussian belief variance must be positive and finite");
    }
}

std::string Feature::name() const {
    switch (kind_) {
        case Kind::Mean: return "mean";
        case Kind::SecondMoment: return "second_moment";
        case Kind::Variance: return "variance";
        case Kind::Moment: return "moment";
    }
    return "unknown";
}

bool Feature::increasing_on(std::span<const double> states) const {
    switch (kind_) {
        case Kind::Mean: return true;
        case Kind::SecondMoment: return states.empty() || states.front() >= 0.0;
        case Kind::Variance: return false;
        case Kind::Moment:
            if (phi_.size() != states.size()) return false;
            for (std::size_t m = 1; m < phi_.size(); ++m)
                if (!(phi_[m] > phi_[m - 1])) return false;
            return true;
    }
    return false;
}

double feature_value(const GridBelief& belief, const Feature& feature) {
    const auto states = belief.states();
    const auto p = belief.masses();
    double mean = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) mean += p[m] * states[m];
    switch (feature.kind()) {
        case Feature::Kind::Mean: return mean;
        case Feature::Kind::SecondMoment: {
            double s = 0.0;
            for (std::size_t m = 0; m < p.size(); ++m) s += p[m] * states[m] * states[m];
            return s;
        }
        case Feature::Kind::Variance: {
            double s = 0.0;
            for (std::size_t m = 0; m < p.size(); ++m) s += p[m] * (states[m] - mean) * (states[m] - mean);
            return s;
        }
        case Feature::Kind::Moment: {
            const auto phi = feature.phi();
            if (phi.size() != p.size()) {
                fail(ErrorCode::Dimension, "moment feature has " + std::to_string(phi.size()) +
                                               " values for a grid of " + std::to_string(p.size()));
            }
            double s = 0.0;
            for (std::size_t m = 0; m < p.size(); ++m) s += p[m] * phi[m];
            return s;
        }
    }
    return mean;
}

double feature_value(const GaussianBelief& belief, const Feature& feature) {
    switch (feature.kind()) {
        case Feature::Kind::Mean: return belief.mean();
        case Feature::Kind::Variance: return belief.variance();
        case Feature::Kind::SecondMoment: return belief.variance() + belief.mean() * belief.mean();
        case Feature::Kind::Moment: break;
    }
    fail(ErrorCode::Dimension, "moment features need a state grid; Gaussian beliefs carry mean and variance only");
}

SignalFamily::SignalFamily(std::vector<double> signals, StateGrid states, std::vector<double> densities,
                           std::vector<double> quad_weights, double tolerance)
    : signals_(std::move(signals)),
      states_(std::move(states)),
      densities_(std::move(densities)),
      quad_weights_(std::move(quad_weights)) {
    if (!states_) fail(ErrorCode::Validation, "signal family has no state grid");
    if (signals_.empty()) fail(ErrorCode::Validation, "signal grid must be nonempty");
    for (std::size_t j = 0; j < signals_.size(); ++j) {
        if (!std::isfinite(signals_[j]) || (j > 0 && !(signals_[j] > signals_[j - 1]))) {
            fail(ErrorCode::Validation, "signal grid must be finite and strictly increasing");
        }
    }
    const std::size_t J = signals_.size();
    const std::size_t M = states_->size();
    if (densities_.size() != J * M) {
        fail(ErrorCode::Dimension, "signal family densities must be " + std::to_string(J) + " x " + std::to_string(M));
    }
    if (quad_weights_.size() != J) fail(ErrorCode::Dimension, "one quadrature weight per signal point is required");
    for (double w : quad_weights_)
        if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorCode::Validation, "quadrature weights must be positive");
    for (double q : densities_)
        if (!(q >= 0.0) || !std::isfinite(q)) fail(ErrorCode::Validation, "signal densities must be finite and nonnegative");
    for (std::size_t m = 0; m < M; ++m) {
        double total = 0.0;
        for (std::size_t j = 0; j < J; ++j) total += densities_[j * M + m] * quad_weights_[j];
        if (std::abs(total - 1.0) > tolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "signal density for state index " << m << " integrates to " << total << ", not 1";
            fail(ErrorCode::Validation, os.str());
        }
    }
}

SignalFamily SignalFamily::normalized_columns(std::vector<double> signals, StateGrid states, std::vector<double> raw) {
    auto quad = trapezoid_weights(signals);
    const std::size_t J = signals.size();
    const std::size_t M = states->size();
    for (std::size_t m = 0; m < M; ++m) {
        double total = 0.0;
        for (std::size_t j = 0; j < J; ++j) total += raw[j * M + m] * quad[j];
        if (!(total > 0.0) || !std::isfinite(total)) {
            fail(ErrorCode::Validation, "signal kernel has no mass on the signal grid for state index " + std::to_string(m));
        }
        for (std::size_t j = 0; j < J; ++j) raw[j * M + m] /= total;
    }
    return SignalFamily(std::move(signals), std::move(states), std::move(raw), std::move(quad));
}

SignalFamily SignalFamily::gaussian_location(std::vector<double> signals, StateGrid states, double noise_variance) {
    if (!(noise_variance > 0.0)) fail(ErrorCode::Precondition, "perceived signal noise must be positive");
    const double inv = 0.5 / noise_variance;
    return from_kernel(std::move(signals), std::move(states), [inv](double s, double w) {
        const double z = s - w;
        return std::exp(-z * z * inv);
    });
}

std::span<const double> SignalFamily::likelihood(std::size_t j) const {
    return std::span<const double>(densities_).subspan(j * state_count(), state_count());
}

std::size_t SignalFamily::signal_index(double s, SnapMode mode) const {
    if (!std::isfinite(s)) fail(ErrorCode::Domain, "signal must be finite");
    const auto it = std::lower_bound(signals_.begin(), signals_.end(), s);
    std::size_t j;
    if (it == signals_.begin()) {
        j = 0;
    } else if (it == signals_.end()) {
        j = signals_.size() - 1;
    } else {
        const auto hi = static_cast<std::size_t>(it - signals_.begin());
        j = (s - signals_[hi - 1] <= signals_[hi] - s) ? hi - 1 : hi;
    }
    if (mode == SnapMode::Strict && std::abs(signals_[j] - s) > 1e-9 * std::max(1.0, std::abs(s))) {
        std::ostringstream os;
        os.precision(17);
        os << "signal " << s << " is not on the signal grid (strict mode)";
        fail(ErrorCode::Precondition, os.str());
    }
    return j;
}

void validate_rule(const UpdateRule& rule) {
    if (const auto* a = std::get_if<Anchored>(&rule)) {
        if (!(a->tau >= 0.0 && a->tau <= 1.0)) fail(ErrorCode::Precondition, "anchoring weight tau must lie in [0, 1]");
    } else if (const auto* g = std::get_if<Grether>(&rule)) {
        check_grether(g->chi0, g->chi1);
    } else if (const auto* d = std::get_if<Drift>(&rule)) {
        if (!std::isfinite(d->shift)) fail(ErrorCode::Precondition, "drift shift must be finite");
    }
}

std::string describe(const UpdateRule& rule) {
    std::ostringstream os;
    std::visit(
        [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, NoUpdate>) os << "none";
            else if constexpr (std::is_same_v<R, Bayesian>) os << "bayesian";
            else if constexpr (std::is_same_v<R, Anchored>) os << "anchored(tau=" << r.tau << ")";
            else if constexpr (std::is_same_v<R, Grether>) os << "grether(chi0=" << r.chi0 << ", chi1=" << r.chi1 << ")";
            else os << "drift(shift=" << r.shift << ")";
        },
        rule);
    return os.str();
}

GridBelief bayes_update(const GridBelief& prior, const SignalFamily& family, double s, SnapMode snap) {
    require_same_grid(prior, family);
    const std::size_t j = family.signal_index(s, snap);
    return normalize_or_fail(prior.grid(), bayes_weights(prior, family.likelihood(j)), "bayes_update");
}

GridBelief anchored_update(const GridBelief& prior, const SignalFamily& family, double s, double tau,
                           const GridBelief& anchor, SnapMode snap) {
    check_anchor(tau, anchor, prior);
    return mix(tau, anchor, bayes_update(prior, family, s, snap));
}

GridBelief grether_update(const GridBelief& prior, const SignalFamily& family, double s, double chi0, double chi1,
                          SnapMode snap) {
    check_grether(chi0, chi1);
    require_same_grid(prior, family);
    return grether_from_likelihood(prior, family.likelihood(family.signal_index(s, snap)), chi0, chi1);
}

GaussianPosterior gaussian_posterior(const GaussianBelief& prior, double s, double perceived_noise) {
    if (!(perceived_noise > 0.0)) fail(ErrorCode::Precondition, "perceived signal noise must be positive");
    if (!std::isfinite(s)) fail(ErrorCode::Domain, "signal must be finite");
    const double r = prior.variance() / (prior.variance() + perceived_noise);
    return {GaussianBelief(r * s + (1.0 - r) * prior.mean(), (1.0 - r) * prior.variance()), r};
}

GridBelief apply_rule(const GridBelief& prior, const UpdateRule& rule, const SignalFamily* family,
                      std::optional<double> signal, SnapMode snap) {
    validate_rule(rule);
    std::optional<std::size_t> j;
    const bool uses_signal = std::holds_alternative<Bayesian>(rule) || std::holds_alternative<Anchored>(rule) ||
                             std::holds_alternative<Grether>(rule);
    if (signal && uses_signal) {
        if (!family) fail(ErrorCode::Precondition, "rule " + describe(rule) + " needs a signal family");
        require_same_grid(prior, *family);
        j = family->signal_index(*signal, snap);
    }
    return posterior_at(prior, rule, family, j);
}

GaussianBelief apply_rule(const GaussianBelief& prior, const UpdateRule& rule, double perceived_noise,
                          std::optional<double> signal) {
    validate_rule(rule);
    return std::visit(
        [&](const auto& r) -> GaussianBelief {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, NoUpdate>) {
                return prior;
            } else if constexpr (std::is_same_v<R, Drift>) {
                return GaussianBelief(prior.mean() + r.shift, prior.variance());
            } else if constexpr (std::is_same_v<R, Bayesian>) {
                if (!signal) return prior;
                return gaussian_posterior(prior, *signal, perceived_noise).posterior;
            } else if constexpr (std::is_same_v<R, Grether>) {
                const GaussianBelief tempered(prior.mean(), prior.variance() / r.chi0);
                if (!signal) return tempered;
                return gaussian_posterior(tempered, *signal, perceived_noise / r.chi1).posterior;
            } else {
                fail(ErrorCode::Precondition, "anchored updating needs a grid belief; Gaussian agents support "
                                              "bayesian, grether, drift and none");
            }
        },
        rule);
}

MlrReport mlr_check(const SignalFamily& family, std::size_t max_violations, double tolerance) {
    MlrReport report;
    const std::size_t J = family.signal_count();
    const std::size_t M = family.state_count();
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t jp = j + 1; jp < J; ++jp) {
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t mp = m + 1; mp < M; ++mp) {
                    const double lhs = family.density(jp, mp) * family.density(j, m);
                    const double rhs = family.density(j, mp) * family.density(jp, m);
                    if (lhs < rhs - tolerance * std::max(1.0, rhs)) {
                        report.holds = false;
                        ++report.violation_count;
                        if (report.violations.size() < max_violations) report.violations.push_back({j, jp, m, mp});
                    }
                }
            }
        }
    }
    return report;
}

MonotonicityReport signal_monotonicity_check(const GridBelief& prior, const UpdateRule& rule,
                                             const SignalFamily& family, const Feature& feature, double tolerance) {
    validate_rule(rule);
    require_same_grid(prior, family);
    MonotonicityReport report;
    report.feature_path.reserve(family.signal_count());
    for (std::size_t j = 0; j < family.signal_count(); ++j) {
        report.feature_path.push_back(feature_value(posterior_at(prior, rule, &family, j), feature));
    }
    for (std::size_t j = 1; j < report.feature_path.size(); ++j) {
        report.worst_violation = std::max(report.worst_violation, report.feature_path[j - 1] - report.feature_path[j]);
    }
    report.holds = report.worst_violation <= tolerance;
    return report;
}

}  // namespace ipe
