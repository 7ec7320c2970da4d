#pragma once

// Scalar special functions: log-gamma, digamma, trigamma.
// Strategy: recurrence shift-up to x >= 8, then the Stirling/Bernoulli
// asymptotic series.  Dependency-free and accurate to ~1e-13 absolute
// over the model's operating range.

#include <cmath>
#include <stdexcept>
#include <string>

namespace codareg {

namespace detail {

inline void check_positive(double x, const char* fn) {
    if (!std::isfinite(x) || x <= 0.0 || x < 1e-300 || x > 1e300) {
        throw std::domain_error(std::string(fn) + ": argument must be positive and finite, got " +
                                std::to_string(x));
    }
}

// Bernoulli-number coefficients B_{2k} / (2k (2k-1)) of the Stirling series.
inline constexpr double kStirling[] = {
    1.0 / 12.0,           -1.0 / 360.0,         1.0 / 1260.0,
    -1.0 / 1680.0,        1.0 / 1188.0,         -691.0 / 360360.0,
    1.0 / 156.0,          -3617.0 / 122400.0,
};

// B_{2k} / (2k) for the digamma series.
inline constexpr double kDigamma[] = {
    1.0 / 12.0,   -1.0 / 120.0, 1.0 / 252.0,  -1.0 / 240.0,
    1.0 / 132.0,  -691.0 / 32760.0, 1.0 / 12.0,
};

// B_{2k} for the trigamma series.
inline constexpr double kTrigamma[] = {
    1.0 / 6.0,   -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0,
};

inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // ln(2*pi)/2
inline constexpr double kShift = 8.0;

}  // namespace detail

// ln Gamma(x) for x > 0.
inline double log_gamma(double x) {
    detail::check_positive(x, "log_gamma");
    double shift = 0.0;
    while (x < detail::kShift) {
        shift -= std::log(x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0;
    double p = inv;
    for (double c : detail::kStirling) {
        series += c * p;
        p *= inv2;
    }
    return shift + (x - 0.5) * std::log(x) - x + detail::kHalfLogTwoPi + series;
}

// psi(x) = d/dx ln Gamma(x) for x > 0.
inline double digamma(double x) {
    detail::check_positive(x, "digamma");
    double shift = 0.0;
    while (x < detail::kShift) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0;
    double p = inv2;
    for (double c : detail::kDigamma) {
        series += c * p;
        p *= inv2;
    }
    return shift + std::log(x) - 0.5 * inv - series;
}

// psi'(x) for x > 0.
inline double trigamma(double x) {
    detail::check_positive(x, "trigamma");
    double shift = 0.0;
    while (x < detail::kShift) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0;
    double p = inv * inv2;
    for (double c : detail::kTrigamma) {
        series += c * p;
        p *= inv2;
    }
    return shift + inv + 0.5 * inv2 + series;
}

}  // namespace codareg
