#pragma once

// Population-side TSLS weights computed from the counterfactual panel, the
// closed-form weight characterizations under stability/neutrality and signal
// monotonicity, the panel-level estimand, and the sample-side bin
// decomposition of weights and contributions.

#include <optional>
#include <string>
#include <vector>

#include "ipe/estimators.hpp"
#include "ipe/experiment.hpp"

namespace ipe {

struct PanelSpec {
    InteractionKind interaction = InteractionKind::Sign;  // ignored for active panels
    GapNormalization gap_normalization = GapNormalization::None;
    // First-stage coefficients on I_i; defaults to the population first stage
    // (least squares of the feature shift on I_i over the panel).
    std::optional<std::vector<double>> pi;
};

// Interaction matrix for every panel row ((1) for active panels).
linalg::DesignMatrix panel_interaction(const Panel& panel, const PanelSpec& spec);
std::vector<double> population_first_stage(const Panel& panel, const PanelSpec& spec);

struct WeightReport {
    std::vector<std::int64_t> ids;
    std::vector<double> weights;  // mean one
    std::vector<double> ape;      // within-agent APE
    std::vector<double> pi;
    std::vector<std::string> pi_labels;
    double normalization = 0.0;   // mean of the unnormalized weights
    double negative_share = 0.0;  // fraction of agents with w < 0
    double negative_mass = 0.0;   // sum |w| over w < 0, over sum |w|
    double estimand = 0.0;        // mean(w * ape)

    // Weights rescaled to sum to one (display convention).
    std::vector<double> sum_to_one() const;
};

WeightReport population_weights(const Panel& panel, const PanelSpec& spec = {});
WeightReport population_weights_passive(const Panel& panel, InteractionKind kind,
                                        std::optional<std::vector<double>> pi = std::nullopt,
                                        GapNormalization norm = GapNormalization::None);
WeightReport population_weights_active(const Panel& panel);

// E[I'pi dY] / E[I'pi dphi]; DegenerateWeights on a zero denominator.
double panel_estimand(const Panel& panel, const PanelSpec& spec = {});

struct CharacterizationResult {
    bool applicable = true;  // identification conditions held for the DGP
    bool matches = false;
    double max_abs_dev = 0.0;
    std::vector<double> closed_form;  // mean-one normalized
    std::vector<double> weights;      // mean-one normalized weights from the panel formula
};

// Compares the panel weights with the closed forms that hold under
// stability (passive) or neutrality (active) plus signal monotonicity.
// `applicable` is the caller's verdict on those conditions; the comparison is
// always computed and reported.
CharacterizationResult verify_weight_characterization(const Panel& panel, const PanelSpec& spec, bool applicable,
                                                      double tolerance = 1e-8);

// Two Gaussian types seeing the common signal 4 with prior variance and
// perceived noise 1 (learning rate 1/2): type A has prior mean 0 and slope 1,
// type B prior mean 2 and slope 3. Under the one-prior first stage
// pi = (1, -1) the mean-one weights are (4, -2) and the estimand is -1,
// although every partial effect is positive.
struct NegativeWeightExample {
    std::vector<Agent> population;
    Design design;
    PanelSpec spec;
};
NegativeWeightExample one_prior_negative_weight_example();

enum class BinMethod {
    // F~ = M_W Fhat from the fitted spec: exact finite-sample decomposition.
    Residualized,
    // Treatment minus control means of I'pi f(X) phi (or Y) over the same
    // difference without f.
    GroupDifference,
};

struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double probability = 0.0;
    double weight = 0.0;        // E[w | bin]
    double contribution = 0.0;  // E[w * ape | bin]
    bool empty = false;
};

struct BinReport {
    std::string statistic;
    std::vector<double> edges;
    std::vector<Bin> bins;
    double total_weight = 0.0;        // sum P(bin) E[w | bin]
    double total_contribution = 0.0;  // sum P(bin) E[w ape | bin]
    double gamma = 0.0;               // fitted coefficient of the spec
    // False for interactions whose weights can be negative even under the
    // identification conditions (one-gap, one-prior, one-signal-prior).
    bool sign_certified = true;
    std::vector<std::string> warnings;
};

struct BinOptions {
    // perception-gap (passive default), prior (active default), signal, or covariate:<name>
    std::string statistic;
    std::size_t bins = 10;            // quantile bins when `edges` is empty
    std::vector<double> edges;
    BinMethod method = BinMethod::Residualized;
};

std::vector<double> bin_statistic(const RecordSet& records, const std::string& statistic,
                                  GapNormalization norm = GapNormalization::None);
// Type-7 quantile edges from min to max.
std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins);

// Per-bin average weight and contribution for the fitted `spec`.
BinReport characterize_bins(const RecordSet& records, const SpecRequest& spec, const BinOptions& options = {});

}  // namespace ipe
