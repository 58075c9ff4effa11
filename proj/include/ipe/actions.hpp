#pragma once

// Feature-action functions v -> Y(v), their partial effects, and the
// within-agent average partial effect over an interval of feature values.

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ipe/beliefs.hpp"

namespace ipe {

// Strictly increasing map m used by link-form actions Y = m^{-1}(index).
// Either the identity or a monotone piecewise-cubic Hermite (PCHIP) spline.
class LinkMap {
public:
    static LinkMap identity() { return LinkMap(); }
    // Knots (y_k, m_k) must both be strictly increasing.
    static LinkMap spline(std::vector<double> y, std::vector<double> m);
    // Spline through the logit m(y) = log(y / (1 - y)) on [lo, hi] within (0, 1).
    static LinkMap logistic(double lo = 1e-4, double hi = 1.0 - 1e-4, std::size_t knots = 401);

    bool is_identity() const noexcept { return y_.empty(); }
    double value(double y) const;       // m(y)
    double derivative(double y) const;  // m'(y)
    // m^{-1}(z) by bisection; Domain error outside [m(y_0), m(y_K)].
    double inverse(double z) const;
    std::string name() const { return is_identity() ? "identity" : name_; }
    const std::vector<double>& knots_y() const noexcept { return y_; }
    const std::vector<double>& knots_m() const noexcept { return m_; }

private:
    LinkMap() = default;
    std::size_t segment(double y) const;
    std::vector<double> y_, m_, d_;
    std::string name_ = "spline";
};

struct AffineAction {
    double theta0 = 0.0;
    double theta1 = 0.0;
};
struct PolynomialAction {
    std::vector<double> coefficients;  // c_0 + c_1 v + ... + c_d v^d
};
// Y = m^{-1}(theta_focal * v + sum_{k != focal} theta_k * frozen_k).
// Non-focal features are held at their `frozen` values.
struct LinkAction {
    LinkMap map = LinkMap::identity();
    std::vector<double> theta;
    std::vector<double> frozen;  // same length as theta; the focal entry is ignored
    std::size_t focal = 0;
};
// Average action P(xi <= v) for a binary choice with latent threshold xi.
struct BinaryLatentAction {
    GridBelief thresholds;
};

using ActionFunction = std::variant<AffineAction, PolynomialAction, LinkAction, BinaryLatentAction>;

void validate_action(const ActionFunction& fn);
std::string describe(const ActionFunction& fn);

double outcome(const ActionFunction& fn, double v);
double partial_effect(const ActionFunction& fn, double v);
// Secant slope (Y(b) - Y(a)) / (b - a), the integral of the partial effect
// against the uniform density on [min(a,b), max(a,b)]; the point partial
// effect when a == b.
double within_agent_ape(const ActionFunction& fn, double a, double b);

}  // namespace ipe
