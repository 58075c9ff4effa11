#include "ipe/actions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ipe/error.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "actions";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

double link_index(const LinkAction& a, double v) {
    double z = 0.0;
    for (std::size_t k = 0; k < a.theta.size(); ++k) z += a.theta[k] * (k == a.focal ? v : a.frozen[k]);
    return z;
}

double polynomial(const std::vector<double>& c, double v) {
    double y = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) y = y * v + *it;
    return y;
}

double polynomial_derivative(const std::vector<double>& c, double v) {
    double y = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) y = y * v + static_cast<double>(k) * c[k];
    return y;
}

double central_difference(const ActionFunction& fn, double v) {
    const double h = std::max(1e-6, 1e-6 * std::abs(v));
    return (outcome(fn, v + h) - outcome(fn, v - h)) / (2.0 * h);
}

}  // namespace

LinkMap LinkMap::spline(std::vector<double> y, std::vector<double> m) {
    if (y.size() < 2 || y.size() != m.size()) fail(ErrorCode::Dimension, "link spline needs at least two (y, m) knots");
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (!std::isfinite(y[k]) || !std::isfinite(m[k])) fail(ErrorCode::Validation, "link spline knots must be finite");
        if (k > 0 && !(y[k] > y[k - 1] && m[k] > m[k - 1])) {
            fail(ErrorCode::Validation, "link spline must be strictly increasing (knot " + std::to_string(k) + ")");
        }
    }
    LinkMap out;
    const std::size_t n = y.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = y[k + 1] - y[k];
        delta[k] = (m[k + 1] - m[k]) / h[k];
    }
    // Fritsch-Carlson slopes: weighted harmonic means inside, secants at the
    // ends. All slopes stay positive, so the interpolant is strictly increasing.
    out.d_.assign(n, 0.0);
    out.d_.front() = delta.front();
    out.d_.back() = delta.back();
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        out.d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    out.y_ = std::move(y);
    out.m_ = std::move(m);

    // Probe check between knots.
    constexpr int kProbes = 8;
    double prev = out.m_.front();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        for (int p = 1; p <= kProbes; ++p) {
            const double yy = out.y_[k] + h[k] * p / kProbes;
            const double mm = out.value(yy);
            if (!(mm > prev) || !(out.derivative(yy) > 0.0)) {
                fail(ErrorCode::Validation, "link spline is not strictly increasing between knots");
            }
            prev = mm;
        }
    }
    return out;
}

LinkMap LinkMap::logistic(double lo, double hi, std::size_t knots) {
    if (!(lo > 0.0 && hi < 1.0 && lo < hi) || knots < 2) {
        fail(ErrorCode::Precondition, "logistic link needs 0 < lo < hi < 1 and at least two knots");
    }
    auto y = linspace(lo, hi, knots);
    std::vector<double> m(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) m[k] = std::log(y[k] / (1.0 - y[k]));
    auto out = spline(std::move(y), std::move(m));
    out.name_ = "logistic";
    return out;
}

std::size_t LinkMap::segment(double y) const {
    const auto it = std::upper_bound(y_.begin(), y_.end(), y);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - y_.begin()));
    return std::min(k, y_.size() - 1) - 1;
}

double LinkMap::value(double y) const {
    if (is_identity()) return y;
    if (y < y_.front() || y > y_.back()) fail(ErrorCode::Domain, "link map evaluated outside its knot range");
    const std::size_t k = segment(y);
    const double h = y_[k + 1] - y_[k];
    const double t = (y - y_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * m_[k] + (t3 - 2 * t2 + t) * h * d_[k] + (-2 * t3 + 3 * t2) * m_[k + 1] +
           (t3 - t2) * h * d_[k + 1];
}

double LinkMap::derivative(double y) const {
    if (is_identity()) return 1.0;
    if (y < y_.front() || y > y_.back()) fail(ErrorCode::Domain, "link map evaluated outside its knot range");
    const std::size_t k = segment(y);
    const double h = y_[k + 1] - y_[k];
    const double t = (y - y_[k]) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * m_[k] + (-6 * t2 + 6 * t) * m_[k + 1]) / h + (3 * t2 - 4 * t + 1) * d_[k] +
           (3 * t2 - 2 * t) * d_[k + 1];
}

double LinkMap::inverse(double z) const {
    if (is_identity()) return z;
    if (!(z >= m_.front() && z <= m_.back())) {
        std::ostringstream os;
        os.precision(17);
        os << "link index " << z << " outside the invertible range [" << m_.front() << ", " << m_.back() << "]";
        fail(ErrorCode::Domain, os.str());
    }
    const auto it = std::lower_bound(m_.begin(), m_.end(), z);
    if (*it == z) return y_[static_cast<std::size_t>(it - m_.begin())];
    const auto k = static_cast<std::size_t>(it - m_.begin()) - 1;
    double lo = y_[k], hi = y_[k + 1];
    // Bisect until the bracket cannot be split further (well below 1e-12), so
    // finite differences of the outcome stay smooth.
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (value(mid) < z ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void validate_action(const ActionFunction& fn) {
    std::visit(
        [](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, AffineAction>) {
                if (!std::isfinite(a.theta0) || !std::isfinite(a.theta1)) fail(ErrorCode::Validation, "affine action coefficients must be finite");
            } else if constexpr (std::is_same_v<A, PolynomialAction>) {
                if (a.coefficients.empty()) fail(ErrorCode::Validation, "polynomial action needs at least one coefficient");
                for (double c : a.coefficients)
                    if (!std::isfinite(c)) fail(ErrorCode::Validation, "polynomial coefficients must be finite");
            } else if constexpr (std::is_same_v<A, LinkAction>) {
                if (a.theta.empty()) fail(ErrorCode::Validation, "link action needs at least one theta");
                if (a.frozen.size() != a.theta.size()) fail(ErrorCode::Dimension, "link action needs one frozen value per theta");
                if (a.focal >= a.theta.size()) fail(ErrorCode::Dimension, "link action focal index out of range");
                for (std::size_t k = 0; k < a.theta.size(); ++k)
                    if (!std::isfinite(a.theta[k]) || !std::isfinite(a.frozen[k])) fail(ErrorCode::Validation, "link action parameters must be finite");
            }
        },
        fn);
}

std::string describe(const ActionFunction& fn) {
    std::ostringstream os;
    std::visit(
        [&](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, AffineAction>) os << "affine(" << a.theta0 << ", " << a.theta1 << ")";
            else if constexpr (std::is_same_v<A, PolynomialAction>) os << "polynomial(degree " << a.coefficients.size() - 1 << ")";
            else if constexpr (std::is_same_v<A, LinkAction>) os << "link(" << a.map.name() << ")";
            else os << "binary_latent(" << a.thresholds.size() << " thresholds)";
        },
        fn);
    return os.str();
}

double outcome(const ActionFunction& fn, double v) {
    if (!std::isfinite(v)) fail(ErrorCode::Domain, "feature value must be finite");
    return std::visit(
        [v](const auto& a) -> double {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, AffineAction>) {
                return a.theta0 + a.theta1 * v;
            } else if constexpr (std::is_same_v<A, PolynomialAction>) {
                return polynomial(a.coefficients, v);
            } else if constexpr (std::is_same_v<A, LinkAction>) {
                return a.map.inverse(link_index(a, v));
            } else {
                double p = 0.0;
                const auto states = a.thresholds.states();
                const auto masses = a.thresholds.masses();
                for (std::size_t m = 0; m < states.size() && states[m] <= v; ++m) p += masses[m];
                return std::min(p, 1.0);
            }
        },
        fn);
}

double partial_effect(const ActionFunction& fn, double v) {
    if (const auto* a = std::get_if<AffineAction>(&fn)) return a->theta1;
    if (const auto* p = std::get_if<PolynomialAction>(&fn)) return polynomial_derivative(p->coefficients, v);
    if (const auto* l = std::get_if<LinkAction>(&fn)) return l->theta[l->focal] / l->map.derivative(outcome(fn, v));
    return central_difference(fn, v);
}

double within_agent_ape(const ActionFunction& fn, double a, double b) {
    if (a == b) return partial_effect(fn, a);
    return (outcome(fn, b) - outcome(fn, a)) / (b - a);
}

}  // namespace ipe
