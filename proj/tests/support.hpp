#pragma once

// Shared test helpers: error-code capture, hand-rolled generators, and small
// dense oracles that do not go through the library's QR code.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ipe/error.hpp"

namespace testing {

// Code of the ipe::Error thrown by f, or nullopt if none was thrown.
inline std::optional<ipe::ErrorCode> error_code(const std::function<void()>& f) {
    try {
        f();
    } catch (const ipe::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// xorshift64* generator so property tests do not share the library's RNG.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
    std::uint64_t next() {
        s_ ^= s_ >> 12;
        s_ ^= s_ << 25;
        s_ ^= s_ >> 27;
        return s_ * 2685821657736338717ULL;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    // Box-Muller, no caching.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t s_;
};

// Solves A x = b (A row-major n x n) by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[p * n + c])) p = r;
        if (a[p * n + c] == 0.0) throw std::runtime_error("singular oracle system");
        if (p != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[p * n + k], a[c * n + k]);
            std::swap(b[p], b[c]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t c = n; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= a[c * n + k] * x[k];
        x[c] = s / a[c * n + c];
    }
    return x;
}

// Normal-equations least squares over column vectors.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& cols, const std::vector<double>& y) {
    const std::size_t k = cols.size();
    std::vector<double> xtx(k * k, 0.0), xty(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t i = 0; i < y.size(); ++i) xtx[a * k + b] += cols[a][i] * cols[b][i];
        for (std::size_t i = 0; i < y.size(); ++i) xty[a] += cols[a][i] * y[i];
    }
    return solve_dense(xtx, xty);
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace testing
