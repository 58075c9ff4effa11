#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ipe/diagnostics.hpp"
#include "populations.hpp"

using namespace ipe;
using testing::error_code;

namespace {

Panel panel_of(const std::vector<Agent>& pop, const Design& d) {
    const auto kind = d.kind();
    return simulate_assigned(pop, d, Feature::mean(), std::vector<Group>(pop.size(), base_group(kind))).panel;
}

// Two types with a common signal 4, prior variance = noise = 1 (r = 1/2):
// type A prior 0 with slope 1, type B prior 2 with slope 3.
std::vector<Agent> two_type_population(std::size_t per_type) {
    std::vector<Agent> pop;
    for (std::size_t i = 0; i < 2 * per_type; ++i) {
        const bool a = i % 2 == 0;
        pop.push_back(testing::gaussian_passive_agent(static_cast<std::int64_t>(i + 1), a ? 0.0 : 2.0, 1.0, 1.0,
                                                      AffineAction{0.0, a ? 1.0 : 3.0}));
    }
    return pop;
}

// Assignment with exactly half of each consecutive pair-block treated.
std::vector<Group> balanced_groups(std::size_t n, DesignKind kind) {
    std::vector<Group> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = (i / 2) % 2 ? alt_group(kind) : base_group(kind);
    return g;
}

}  // namespace

TEST_CASE("identical agents all get weight one") {
    std::vector<Agent> pop;
    for (int i = 0; i < 10; ++i) pop.push_back(testing::gaussian_passive_agent(i + 1, 1.0, 1.0, 1.0, PolynomialAction{{0, 1, 1}}));
    const auto panel = panel_of(pop, testing::passive_constant(3.0));
    for (auto k : {InteractionKind::Sign, InteractionKind::Gap}) {
        const auto w = population_weights_passive(panel, k);
        for (double x : w.weights) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("weights under stability and monotonicity") {
    testing::Gen g(20);
    const auto pop = testing::random_gaussian_passive(g, 400, PolynomialAction{{0.0, 1.0, 0.2}});
    Design d = testing::passive_constant(0.0);
    d.arms = PassiveDesign{[](const Agent& a) { return 2.0 + a.covariates[0]; }};
    const auto panel = panel_of(pop, d);
    bool applicable = true;
    for (const auto& r : stability_check(pop, d, Feature::mean())) applicable &= r.strict;
    for (const auto& a : pop) applicable &= agent_monotonicity(a, Group::T, Feature::mean()).holds;
    REQUIRE(applicable);

    const auto sign = population_weights_passive(panel, InteractionKind::Sign);
    CHECK(sign.negative_share == 0.0);
    // w_i / |dphi_i| is constant where the gap is nonzero.
    const double ratio = sign.weights[0] / std::abs(panel.rows[0].delta_feature());
    for (std::size_t i = 0; i < panel.rows.size(); ++i)
        CHECK(sign.weights[i] == doctest::Approx(ratio * std::abs(panel.rows[i].delta_feature())).epsilon(1e-10));

    for (auto k : {InteractionKind::Sign, InteractionKind::Gap, InteractionKind::OneGap, InteractionKind::OnePrior,
                   InteractionKind::OneSignalPrior}) {
        PanelSpec ps;
        ps.interaction = k;
        const auto c = verify_weight_characterization(panel, ps, applicable);
        CHECK(c.applicable);
        CHECK(c.matches);
        CHECK(c.max_abs_dev < 1e-8);
        const auto w = population_weights(panel, ps);
        CHECK(testing::mean(w.weights) == doctest::Approx(1.0).epsilon(1e-10));
        double est = 0.0;
        for (std::size_t i = 0; i < w.weights.size(); ++i) est += w.weights[i] * w.ape[i];
        est /= static_cast<double>(w.weights.size());
        CHECK(std::abs(panel_estimand(panel, ps) - est) <= 1e-10);
        CHECK(std::abs(w.estimand - est) <= 1e-10);
    }
    CHECK(population_weights_passive(panel, InteractionKind::Gap).negative_share == 0.0);
}

TEST_CASE("gap weights follow |dphi| |gap|") {
    testing::Gen g(21);
    const auto pop = testing::random_gaussian_passive(g, 100, AffineAction{0.0, 1.0});
    const auto panel = panel_of(pop, testing::passive_constant(2.0));
    const auto w = population_weights_passive(panel, InteractionKind::Gap);
    std::vector<double> oracle;
    for (const auto& r : panel.rows) oracle.push_back(std::abs(r.delta_feature()) * std::abs(*r.signal_t - r.prior_feature));
    const double m = testing::mean(oracle);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(w.weights[i] == doctest::Approx(oracle[i] / m).epsilon(1e-10));
}

TEST_CASE("stability-violating DGP is flagged but still compared") {
    testing::Gen g(22);
    auto pop = testing::random_gaussian_passive(g, 200, AffineAction{0.0, 1.0});
    for (auto& a : pop) a.groups[Group::C].rule = Drift{0.5};
    const auto d = testing::passive_constant(1.5);
    bool stable = true;
    for (const auto& r : stability_check(pop, d, Feature::mean())) stable &= r.strict;
    CHECK(!stable);
    const auto c = verify_weight_characterization(panel_of(pop, d), PanelSpec{}, stable);
    CHECK(!c.applicable);
    CHECK(c.max_abs_dev > 1e-8);
    CHECK(!c.matches);
}

TEST_CASE("negative weights from a crafted one-prior first stage") {
    const auto pop = two_type_population(1);
    const auto panel = panel_of(pop, testing::passive_constant(4.0));
    PanelSpec ps;
    ps.interaction = InteractionKind::OnePrior;
    ps.pi = std::vector<double>{1.0, -1.0};
    const auto w = population_weights(panel, ps);
    // Hand enumeration: dphi = (2, 1), I'pi = (1, -1), raw weights (2, -1), mean 1/2.
    CHECK(w.weights[0] == doctest::Approx(4.0));
    CHECK(w.weights[1] == doctest::Approx(-2.0));
    CHECK(w.ape[0] == doctest::Approx(1.0));
    CHECK(w.ape[1] == doctest::Approx(3.0));
    CHECK(w.negative_share == 0.5);
    CHECK(w.negative_mass == doctest::Approx(2.0 / 6.0));
    CHECK(panel_estimand(panel, ps) == doctest::Approx(-1.0));
    CHECK(w.estimand == doctest::Approx(-1.0));
    const auto s = w.sum_to_one();
    CHECK(s[0] + s[1] == doctest::Approx(1.0));
}

TEST_CASE("active weights") {
    testing::Gen g(23);
    const auto pop = testing::random_gaussian_active(g, 300, PolynomialAction{{0.0, 1.0, 0.5}});
    const auto d = testing::active_constant(-1.0, 2.0);
    const auto panel = panel_of(pop, d);
    const auto w = population_weights_active(panel);
    CHECK(w.negative_share == 0.0);
    // Gaussian model: w_i proportional to r_i (S^H - S^L).
    std::vector<double> oracle;
    for (const auto& a : pop) {
        const auto& gb = std::get<GaussianBelief>(a.prior);
        const double r = gb.variance() / (gb.variance() + a.groups.at(Group::H).perceived_noise);
        oracle.push_back(r * 3.0);
    }
    const double m = testing::mean(oracle);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(w.weights[i] == doctest::Approx(oracle[i] / m).epsilon(1e-10));
    PanelSpec ps;
    const auto c = verify_weight_characterization(panel, ps, true);
    CHECK(c.matches);
    CHECK(std::abs(panel_estimand(panel, ps) - w.estimand) <= 1e-10);

    // An agent whose posterior does not depend on the arm gets weight zero.
    auto mixed = pop;
    mixed[0].groups[Group::L].rule = NoUpdate{};
    mixed[0].groups[Group::H].rule = NoUpdate{};
    CHECK(population_weights_active(panel_of(mixed, d)).weights[0] == 0.0);
}

TEST_CASE("constant partial effect: panel estimand is exact") {
    testing::Gen g(24);
    const auto pop = testing::random_gaussian_passive(g, 100, AffineAction{3.0, -0.75});
    const auto panel = panel_of(pop, testing::passive_constant(1.0));
    for (auto k : {InteractionKind::Sign, InteractionKind::Gap, InteractionKind::OneGap, InteractionKind::OnePrior}) {
        PanelSpec ps;
        ps.interaction = k;
        CHECK(panel_estimand(panel, ps) == doctest::Approx(-0.75).epsilon(1e-12));
    }
}

TEST_CASE("degenerate weights") {
    std::vector<Agent> pop;
    for (int i = 0; i < 4; ++i) {
        auto a = testing::gaussian_passive_agent(i + 1, 1.0, 1.0, 1.0);
        a.groups[Group::T].rule = NoUpdate{};
        pop.push_back(a);
    }
    const auto panel = panel_of(pop, testing::passive_constant(3.0));
    PanelSpec ps;
    ps.pi = std::vector<double>{1.0};
    CHECK(error_code([&] { population_weights(panel, ps); }) == ErrorCode::DegenerateWeights);
    CHECK(error_code([&] { panel_estimand(panel, ps); }) == ErrorCode::DegenerateWeights);
    ps.pi = std::vector<double>{1.0, 2.0};
    CHECK(error_code([&] { population_weights(panel, ps); }) == ErrorCode::Dimension);
}

TEST_CASE("property: Sign and Gap weights are nonnegative under MLR updating rules") {
    testing::Gen g(25);
    const auto grid = make_grid(linspace(-4, 6, 101));
    const auto fam = std::make_shared<const SignalFamily>(SignalFamily::gaussian_location(linspace(-8, 10, 181), grid, 1.0));
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<Agent> pop;
        for (int i = 0; i < 40; ++i) {
            Agent a;
            a.id = i + 1;
            a.prior = GridBelief::discretized_normal(grid, g.uniform(-1, 3), g.uniform(0.3, 2));
            a.groups[Group::C] = GroupModel{NoUpdate{}};
            UpdateRule rule = Bayesian{};
            if (trial % 3 == 1) rule = Anchored{g.uniform(), std::get<GridBelief>(a.prior)};
            if (trial % 3 == 2) rule = Grether{g.uniform(0.3, 2), g.uniform(0.3, 2)};
            a.groups[Group::T] = GroupModel{rule, fam};
            a.action = PolynomialAction{{0.0, 1.0, 0.1}};
            pop.push_back(std::move(a));
        }
        Design d = testing::passive_constant(0.0);
        d.arms = PassiveDesign{[](const Agent& a) { return 1.0 + 0.5 * static_cast<double>(a.id % 5); }};
        const auto panel = panel_of(pop, d);
        CHECK(population_weights_passive(panel, InteractionKind::Sign).negative_share == 0.0);
        CHECK(population_weights_passive(panel, InteractionKind::Gap).negative_share == 0.0);
    }
}

TEST_CASE("quantile edges") {
    const auto e = quantile_edges({5.0, 1.0, 3.0, 2.0, 4.0}, 4);
    CHECK(e == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
    // Type-7: h = (n-1) p; 10 values, 3 bins -> positions 0, 3, 6, 9.
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) v.push_back(i * i);
    const auto t = quantile_edges(v, 3);
    CHECK(t[1] == 9.0);
    CHECK(t[2] == 36.0);
    const auto q = quantile_edges({0.0, 1.0}, 4);
    CHECK(q[1] == doctest::Approx(0.25));
}

TEST_CASE("bin characterization") {
    testing::Gen g(26);
    SUBCASE("single bin averages one and contributions add up to gamma") {
        const auto pop = testing::random_gaussian_passive(g, 2000, PolynomialAction{{0.5, 1.0, 0.3}});
        const auto sim = simulate(pop, testing::passive_constant(2.0, 3), Feature::mean());
        for (auto method : {BinMethod::Residualized, BinMethod::GroupDifference}) {
            BinOptions one;
            one.bins = 1;
            one.method = method;
            const auto r1 = characterize_bins(sim.records, SpecRequest{}, one);
            CHECK(r1.bins[0].weight == doctest::Approx(1.0).epsilon(1e-12));
        }
        for (auto k : {InteractionKind::Sign, InteractionKind::Gap, InteractionKind::OneGap}) {
            SpecRequest spec;
            spec.interaction = k;
            const auto r = characterize_bins(sim.records, spec);
            CHECK(r.bins.size() == 10);
            CHECK(std::abs(r.total_contribution - r.gamma) <= 1e-8);
            CHECK(std::abs(r.total_weight - 1.0) <= 1e-10);
            CHECK(r.sign_certified == (k != InteractionKind::OneGap));
        }
    }
    SUBCASE("weights concentrated in one of two equal bins") {
        // Type A (prior 0) learns; type B (prior 2) never moves.
        auto pop = two_type_population(500);
        for (std::size_t i = 1; i < pop.size(); i += 2) pop[i].groups[Group::T].rule = NoUpdate{};
        const auto sim = simulate_assigned(pop, testing::passive_constant(4.0), Feature::mean(),
                                           balanced_groups(pop.size(), DesignKind::Passive));
        BinOptions opts;
        opts.statistic = "prior";
        opts.edges = {0.0, 1.0, 2.0};
        const auto r = characterize_bins(sim.records, SpecRequest{}, opts);
        CHECK(r.bins[0].probability == 0.5);
        CHECK(r.bins[0].weight == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(std::abs(r.bins[1].weight) < 1e-10);
    }
    SUBCASE("constant effect gives proportional profiles, heterogeneous effects do not") {
        const auto pop = testing::random_gaussian_passive(g, 3000, AffineAction{0.0, 2.5});
        const auto sim = simulate(pop, testing::passive_constant(2.0, 4), Feature::mean());
        const auto r = characterize_bins(sim.records, SpecRequest{});
        for (const auto& b : r.bins) CHECK(b.contribution == doctest::Approx(2.5 * b.weight).epsilon(1e-9));

        auto het = two_type_population(500);
        const auto hsim = simulate_assigned(het, testing::passive_constant(4.0), Feature::mean(),
                                            balanced_groups(het.size(), DesignKind::Passive));
        BinOptions opts;
        opts.statistic = "prior";
        opts.edges = {0.0, 1.0, 2.0};
        const auto h = characterize_bins(hsim.records, SpecRequest{}, opts);
        CHECK(h.bins[0].contribution / h.bins[0].weight == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(h.bins[1].contribution / h.bins[1].weight == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("empty bins are flagged and excluded") {
        const auto pop = testing::random_gaussian_passive(g, 500, AffineAction{0.0, 1.0});
        const auto sim = simulate(pop, testing::passive_constant(2.0, 5), Feature::mean());
        BinOptions opts;
        opts.statistic = "prior";
        opts.edges = {-1.0, 2.0, 2.0, 5.0};
        const auto r = characterize_bins(sim.records, SpecRequest{}, opts);
        CHECK(r.bins[1].empty);
        CHECK(r.warnings.size() == 1);
        CHECK(std::abs(r.total_contribution - r.gamma) <= 1e-8);
        opts.edges = {0.0, 1.0};
        CHECK(error_code([&] { characterize_bins(sim.records, SpecRequest{}, opts); }) == ErrorCode::Validation);
    }
    SUBCASE("active designs bin on the prior by default") {
        const auto pop = testing::random_gaussian_active(g, 1000, PolynomialAction{{0.0, 1.0, 0.3}});
        const auto sim = simulate(pop, testing::active_constant(-1.0, 1.0, 6), Feature::mean());
        SpecRequest spec;
        spec.kind = SpecKind::Active;
        const auto r = characterize_bins(sim.records, spec);
        CHECK(r.statistic == "prior");
        CHECK(std::abs(r.total_contribution - r.gamma) <= 1e-8);
        CHECK(r.sign_certified);
    }
}
