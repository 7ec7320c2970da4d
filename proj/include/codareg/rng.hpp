#pragma once

// Deterministic random streams.  std::mt19937_64 output is pinned by the
// standard, and all variate transforms are implemented here, so identical
// seeds give identical draws on every platform/toolchain.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace codareg {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via the Marsaglia polar method (cached second value).
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cache_ = v * f;
        has_cache_ = true;
        return u * f;
    }

    // Gamma(shape, 1) via Marsaglia–Tsang squeeze/rejection; the shape < 1
    // case uses the u^(1/shape) boost so sub-unit shapes stay exact.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::domain_error("Rng::gamma: shape must be > 0");
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            const double u = 1.0 - uniform01();  // (0, 1]
            return g * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Dirichlet draw through the gamma representation; optionally exposes the
    // underlying gamma components.  Degenerate draws (underflowed parts) are
    // resampled up to 100 times.
    std::vector<double> dirichlet(const std::vector<double>& alpha,
                                  std::vector<double>* gamma_parts = nullptr) {
        std::vector<double> w(alpha.size());
        for (int attempt = 0; attempt < 100; ++attempt) {
            double total = 0.0;
            for (std::size_t c = 0; c < alpha.size(); ++c) {
                w[c] = gamma(alpha[c]);
                total += w[c];
            }
            bool ok = total > 0.0 && std::isfinite(total);
            std::vector<double> y(alpha.size());
            if (ok) {
                for (std::size_t c = 0; c < alpha.size(); ++c) {
                    y[c] = w[c] / total;
                    if (!(y[c] > 0.0) || !(y[c] < 1.0)) { ok = false; break; }
                }
            }
            if (ok) {
                if (gamma_parts) *gamma_parts = w;
                return y;
            }
        }
        throw std::runtime_error("Rng::dirichlet: degenerate draw after 100 attempts");
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double cache_ = 0.0;
    bool has_cache_ = false;
};

}  // namespace codareg
