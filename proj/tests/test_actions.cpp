#include <doctest.h>

#include <cmath>

#include "ipe/actions.hpp"
#include "support.hpp"

using namespace ipe;
using testing::error_code;

namespace {

ActionFunction logistic_action(double theta) {
    LinkAction a;
    a.map = LinkMap::logistic();
    a.theta = {theta};
    a.frozen = {0.0};
    return a;
}

double central_difference(const ActionFunction& fn, double v, double h) {
    return (outcome(fn, v + h) - outcome(fn, v - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("outcome examples") {
    CHECK(outcome(AffineAction{1.0, 2.0}, 3.0) == 7.0);
    CHECK(outcome(PolynomialAction{{1.0, -2.0, 0.5}}, 2.0) == doctest::Approx(1.0 - 4.0 + 2.0));
    const GridBelief xi({0.0, 1.0, 2.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    CHECK(outcome(BinaryLatentAction{xi}, 1.5) == doctest::Approx(0.5));
    CHECK(outcome(BinaryLatentAction{xi}, -1.0) == 0.0);
    CHECK(outcome(BinaryLatentAction{xi}, 3.0) == doctest::Approx(1.0));
    LinkAction id;
    id.theta = {2.5};
    id.frozen = {0.0};
    for (double v : {-3.0, 0.0, 1.25, 8.0}) CHECK(outcome(id, v) == doctest::Approx(outcome(AffineAction{0.0, 2.5}, v)));
}

TEST_CASE("link actions hold non-focal features fixed") {
    LinkAction a;
    a.theta = {0.5, 2.0, -1.0};
    a.frozen = {0.0, 3.0, 4.0};
    a.focal = 0;
    CHECK(outcome(a, 2.0) == doctest::Approx(0.5 * 2.0 + 2.0 * 3.0 - 1.0 * 4.0));
    CHECK(partial_effect(a, 2.0) == doctest::Approx(0.5));
    a.frozen = {0.0, 3.0};
    CHECK(error_code([&] { validate_action(a); }) == ErrorCode::Dimension);
}

TEST_CASE("logistic link") {
    const auto fn = logistic_action(1.5);
    for (double v : {-4.0, -1.0, 0.0, 0.7, 3.0}) {
        const double exact = 1.0 / (1.0 + std::exp(-1.5 * v));
        CHECK(std::abs(outcome(fn, v) - exact) < 1e-4);
    }
    // The spline derivative route agrees with a finite-difference oracle.
    for (double v : {-3.3, -1.1, 0.05, 0.9, 2.6}) {
        const double pe = partial_effect(fn, v);
        CHECK(std::abs(pe - central_difference(fn, v, 1e-6)) <= 1e-6 * std::abs(pe) + 1e-9);
    }
    CHECK(error_code([&] { outcome(fn, 20.0); }) == ErrorCode::Domain);
    CHECK(error_code([] { LinkMap::spline({0.0, 1.0, 2.0}, {0.0, 2.0, 1.0}); }) == ErrorCode::Validation);
    CHECK(error_code([] { LinkMap::logistic(0.5, 0.4); }) == ErrorCode::Precondition);
    const auto m = LinkMap::logistic();
    for (double z : {-5.0, 0.0, 2.5}) CHECK(m.value(m.inverse(z)) == doctest::Approx(z).epsilon(1e-9));
}

TEST_CASE("partial effects") {
    CHECK(partial_effect(AffineAction{4.0, -1.5}, 10.0) == -1.5);
    CHECK(partial_effect(PolynomialAction{{0.0, 0.0, 1.0}}, 2.0) == 4.0);
    CHECK(partial_effect(PolynomialAction{{3.0}}, 2.0) == 0.0);
}

TEST_CASE("within-agent APE") {
    CHECK(within_agent_ape(AffineAction{0.0, 1.7}, -2.0, 5.0) == doctest::Approx(1.7));
    const ActionFunction sq = PolynomialAction{{0.0, 0.0, 1.0}};
    CHECK(within_agent_ape(sq, 0.0, 2.0) == doctest::Approx(2.0));
    CHECK(within_agent_ape(sq, 1.0, 1.0) == 2.0);
}

TEST_CASE("property: FTC identity, symmetry and finite-difference partial effects") {
    testing::Gen g(606);
    const GridBelief xi = GridBelief::discretized_normal(make_grid(linspace(-3, 3, 121)), 0.2, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ActionFunction> fns;
        fns.push_back(AffineAction{g.uniform(-3, 3), g.uniform(-3, 3)});
        std::vector<double> c(1 + g.index(4));
        for (auto& v : c) v = g.uniform(-2, 2);
        fns.push_back(PolynomialAction{c});
        fns.push_back(logistic_action(g.uniform(0.2, 2.0)));
        fns.push_back(BinaryLatentAction{xi});
        for (const auto& fn : fns) {
            const double a = g.uniform(-2.5, 2.5), b = g.uniform(-2.5, 2.5);
            const double psi = b > a ? 1.0 : (b < a ? -1.0 : 0.0);
            const double lhs = psi * std::abs(b - a) * within_agent_ape(fn, a, b);
            const double rhs = outcome(fn, b) - outcome(fn, a);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
            CHECK(within_agent_ape(fn, a, b) == within_agent_ape(fn, b, a));
            if (std::holds_alternative<BinaryLatentAction>(fn)) continue;  // piecewise constant in v
            const double pe = partial_effect(fn, a);
            const double fd = central_difference(fn, a, 1e-5 * std::max(1.0, std::abs(a)));
            CHECK(std::abs(pe - fd) <= std::max(1e-6, 1e-5 * std::abs(pe)));
        }
    }
}

TEST_CASE("property: binary latent average action is a CDF") {
    testing::Gen g(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w(10);
        for (auto& v : w) v = g.uniform();
        const ActionFunction fn = BinaryLatentAction{GridBelief::normalized(make_grid(linspace(-1, 1, 10)), w)};
        double prev = -1.0;
        for (double v = -2.0; v <= 2.0; v += 0.01) {
            const double y = outcome(fn, v);
            CHECK(y >= 0.0);
            CHECK(y <= 1.0 + 1e-12);
            CHECK(y >= prev);
            prev = y;
        }
    }
}

TEST_CASE("action validation") {
    CHECK(error_code([] { validate_action(PolynomialAction{{}}); }) == ErrorCode::Validation);
    CHECK(error_code([] { validate_action(AffineAction{NAN, 1.0}); }) == ErrorCode::Validation);
    CHECK(error_code([] { outcome(AffineAction{0.0, 1.0}, INFINITY); }) == ErrorCode::Domain);
    CHECK(describe(AffineAction{1.0, 2.0}).find("affine") != std::string::npos);
}
