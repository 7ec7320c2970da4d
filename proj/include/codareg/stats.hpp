#pragma once

// Small numeric helpers shared by the model, sampler, and metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace codareg {

// Linear-interpolated order-statistic quantile (type 7).  Sorts a copy.
inline double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile_type7: empty input");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile_type7: p outside [0,1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = h - static_cast<double>(lo);
    // lo + w*(hi - lo) rather than the two-product form: it returns the
    // common value exactly when the bracketing order statistics are equal
    return v[lo] + w * (v[hi] - v[lo]);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// log( (1/n) sum exp(x_i) ), max-stabilized.
inline double log_mean_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s / static_cast<double>(v.size()));
}

}  // namespace codareg
