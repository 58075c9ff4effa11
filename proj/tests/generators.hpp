#pragma once

// Random signal families and grid priors for property tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ipe/beliefs.hpp"
#include "support.hpp"

namespace testing {

using ipe::GridBelief;
using ipe::SignalFamily;
using ipe::StateGrid;

// Random log-supermodular kernel c(s) exp(a(s) b(w)) with increasing a, b:
// satisfies MLR by construction.
inline SignalFamily random_mlr_family(Gen& g, const StateGrid& states, std::size_t J) {
    std::vector<double> signals(J), a(J);
    double acc = g.uniform(-2.0, 0.0), aa = g.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < J; ++j) {
        signals[j] = acc;
        a[j] = aa;
        acc += g.uniform(0.05, 0.5);
        aa += g.uniform(0.0, 0.6);
    }
    std::vector<double> b(states->size());
    double bb = g.uniform(-1.0, 1.0);
    for (auto& v : b) {
        v = bb;
        bb += g.uniform(0.0, 0.4);
    }
    std::vector<double> c(J);
    for (auto& v : c) v = g.uniform(0.2, 2.0);
    auto kernel = [&](double s, double w) {
        const auto j = static_cast<std::size_t>(std::lower_bound(signals.begin(), signals.end(), s) - signals.begin());
        const auto m = static_cast<std::size_t>(std::lower_bound(states->begin(), states->end(), w) - states->begin());
        return c[j] * std::exp(a[j] * b[m]);
    };
    return SignalFamily::from_kernel(signals, states, kernel);
}

inline GridBelief random_prior(Gen& g, const StateGrid& states) {
    std::vector<double> w(states->size());
    for (auto& v : w) v = g.uniform() < 0.15 ? 0.0 : g.uniform(0.01, 1.0);
    w[g.index(w.size())] += 0.5;
    return GridBelief::normalized(states, w);
}

}  // namespace testing
