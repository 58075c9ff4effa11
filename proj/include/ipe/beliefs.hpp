#pragma once

// Beliefs over a scalar state, features of beliefs, perceived signal
// families, and the belief-updating rules (Bayesian, anchored, Grether).
//
// Continuous objects are discretized: a belief is a probability vector over a
// strictly increasing state grid, and a signal family stores q(s_j | w_m) on a
// signal x state grid together with quadrature weights over signals. All
// objects are immutable after construction.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ipe {

struct Tolerances {
    double probability = 1e-10;            // mass sums, monotone sequences
    double algebraic = 1e-12;              // exact identities, MLR cross products
    double family_normalization = 1e-8;    // per-state signal density integrals
    double feature_equality = 1e-8;        // stability / neutrality comparisons
};

using StateGrid = std::shared_ptr<const std::vector<double>>;

// Throws Validation unless strictly increasing and finite.
StateGrid make_grid(std::vector<double> points);
std::vector<double> linspace(double lo, double hi, std::size_t n);
std::vector<double> trapezoid_weights(std::span<const double> grid);

class GridBelief {
public:
    GridBelief(StateGrid states, std::vector<double> masses, double tolerance = Tolerances{}.probability);
    GridBelief(std::vector<double> states, std::vector<double> masses, double tolerance = Tolerances{}.probability);

    // Rescales nonnegative weights to sum to one.
    static GridBelief normalized(StateGrid states, std::vector<double> weights);
    static GridBelief point_mass(StateGrid states, std::size_t index);
    static GridBelief uniform(StateGrid states);
    // Normal density times trapezoidal weights, renormalized on the grid.
    static GridBelief discretized_normal(StateGrid states, double mean, double variance);

    std::span<const double> states() const noexcept { return *states_; }
    std::span<const double> masses() const noexcept { return masses_; }
    const StateGrid& grid() const noexcept { return states_; }
    std::size_t size() const noexcept { return masses_.size(); }

    bool same_grid(const GridBelief& other) const;

private:
    StateGrid states_;
    std::vector<double> masses_;
};

class GaussianBelief {
public:
    GaussianBelief(double mean, double variance);
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }

private:
    double mean_;
    double variance_;
};

class Feature {
public:
    enum class Kind { Mean, SecondMoment, Variance, Moment };

    static Feature mean() { return Feature(Kind::Mean, {}); }
    static Feature second_moment() { return Feature(Kind::SecondMoment, {}); }
    static Feature variance() { return Feature(Kind::Variance, {}); }
    // phi evaluated at each state grid point.
    static Feature moment(std::vector<double> phi) { return Feature(Kind::Moment, std::move(phi)); }

    Kind kind() const noexcept { return kind_; }
    std::span<const double> phi() const noexcept { return phi_; }
    std::string name() const;
    // Mean, SecondMoment and Moment are integrals of a fixed function of the
    // state; Variance is not.
    bool is_linear() const noexcept { return kind_ != Kind::Variance; }
    // True when the integrand is increasing on `states` (so monotone updating
    // under MLR is guaranteed). SecondMoment qualifies only on nonnegative grids.
    bool increasing_on(std::span<const double> states) const;

private:
    Feature(Kind kind, std::vector<double> phi) : kind_(kind), phi_(std::move(phi)) {}
    Kind kind_;
    std::vector<double> phi_;
};

double feature_value(const GridBelief& belief, const Feature& feature);
double feature_value(const GaussianBelief& belief, const Feature& feature);

enum class SnapMode { Nearest, Strict };

class SignalFamily {
public:
    // `densities` is row-major J x M: entry (j, m) = q(s_j | w_m).
    SignalFamily(std::vector<double> signals, StateGrid states, std::vector<double> densities,
                 std::vector<double> quad_weights, double tolerance = Tolerances{}.family_normalization);

    // Gaussian location family q(s | w) = N(s; w, noise_variance), each state
    // column renormalized against trapezoidal weights on the signal grid.
    static SignalFamily gaussian_location(std::vector<double> signals, StateGrid states, double noise_variance);
    // Arbitrary nonnegative kernel k(s, w), column-normalized the same way.
    template <typename Kernel>
    static SignalFamily from_kernel(std::vector<double> signals, StateGrid states, Kernel&& kernel);

    std::size_t signal_count() const noexcept { return signals_.size(); }
    std::size_t state_count() const noexcept { return states_->size(); }
    std::span<const double> signals() const noexcept { return signals_; }
    std::span<const double> states() const noexcept { return *states_; }
    const StateGrid& grid() const noexcept { return states_; }
    std::span<const double> quad_weights() const noexcept { return quad_weights_; }
    double density(std::size_t j, std::size_t m) const { return densities_[j * state_count() + m]; }
    // q(s_j | .) across states.
    std::span<const double> likelihood(std::size_t j) const;

    // Nearest signal grid index; Strict mode rejects off-grid signals.
    std::size_t signal_index(double s, SnapMode mode = SnapMode::Nearest) const;

private:
    static SignalFamily normalized_columns(std::vector<double> signals, StateGrid states,
                                           std::vector<double> raw);
    std::vector<double> signals_;
    StateGrid states_;
    std::vector<double> densities_;
    std::vector<double> quad_weights_;
};

template <typename Kernel>
SignalFamily SignalFamily::from_kernel(std::vector<double> signals, StateGrid states, Kernel&& kernel) {
    std::vector<double> raw(signals.size() * states->size());
    for (std::size_t j = 0; j < signals.size(); ++j)
        for (std::size_t m = 0; m < states->size(); ++m) raw[j * states->size() + m] = kernel(signals[j], (*states)[m]);
    return normalized_columns(std::move(signals), std::move(states), std::move(raw));
}

// Update rules. NoUpdate ignores the signal; Drift translates the prior by a
// fixed amount (used to model outside information search in the control arm).
struct NoUpdate {};
struct Bayesian {};
struct Anchored {
    double tau;
    GridBelief anchor;
};
struct Grether {
    double chi0;  // base-rate (prior) exponent
    double chi1;  // inference (likelihood) exponent
};
struct Drift {
    double shift;
};
using UpdateRule = std::variant<NoUpdate, Bayesian, Anchored, Grether, Drift>;

void validate_rule(const UpdateRule& rule);
std::string describe(const UpdateRule& rule);

GridBelief bayes_update(const GridBelief& prior, const SignalFamily& family, double s,
                        SnapMode snap = SnapMode::Nearest);
GridBelief anchored_update(const GridBelief& prior, const SignalFamily& family, double s, double tau,
                           const GridBelief& anchor, SnapMode snap = SnapMode::Nearest);
GridBelief grether_update(const GridBelief& prior, const SignalFamily& family, double s, double chi0, double chi1,
                          SnapMode snap = SnapMode::Nearest);

struct GaussianPosterior {
    GaussianBelief posterior;
    double learning_rate;
};
GaussianPosterior gaussian_posterior(const GaussianBelief& prior, double s, double perceived_noise);

// Posterior under `rule`; `signal` empty means no information (control arm).
// Without a signal, Bayesian returns the prior, anchored mixes anchor and
// prior, and Grether returns the base-rate-distorted prior.
GridBelief apply_rule(const GridBelief& prior, const UpdateRule& rule, const SignalFamily* family,
                      std::optional<double> signal, SnapMode snap = SnapMode::Nearest);
// Gaussian agents: Grether maps to variance/chi0 and noise/chi1; anchored
// rules need a grid anchor and are rejected.
GaussianBelief apply_rule(const GaussianBelief& prior, const UpdateRule& rule, double perceived_noise,
                          std::optional<double> signal);

struct MlrViolation {
    std::size_t j, j_prime, m, m_prime;  // s_j < s_j', w_m < w_m'
};
struct MlrReport {
    bool holds = true;
    std::size_t violation_count = 0;
    std::vector<MlrViolation> violations;  // first `max_violations` found
};
MlrReport mlr_check(const SignalFamily& family, std::size_t max_violations = 64,
                    double tolerance = Tolerances{}.algebraic);

struct MonotonicityReport {
    bool holds = true;
    double worst_violation = 0.0;  // largest decrease of the feature between adjacent signals
    std::vector<double> feature_path;
};
// Evaluates the posterior feature across every signal grid point.
MonotonicityReport signal_monotonicity_check(const GridBelief& prior, const UpdateRule& rule,
                                             const SignalFamily& family, const Feature& feature,
                                             double tolerance = Tolerances{}.probability);

}  // namespace ipe
