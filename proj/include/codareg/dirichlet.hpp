#pragma once

// Dirichlet distribution core: simplex compositions, the alpha <-> (mu, phi)
// parameterizations, density, moments, entropy, and sampling through the
// gamma stochastic representation.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/rng.hpp"
#include "codareg/special.hpp"

namespace codareg {

// A point in the open C-simplex: strictly positive parts summing to one.
class Composition {
public:
    // Validates and renormalizes.  `tol` bounds the acceptable deviation of
    // the raw sum from 1 before renormalization.
    explicit Composition(std::vector<double> parts, double tol = 1e-9)
        : parts_(std::move(parts)) {
        if (parts_.size() < 2) throw std::invalid_argument("Composition: need C >= 2 parts");
        double sum = 0.0;
        for (double p : parts_) {
            if (!std::isfinite(p) || p <= 0.0 || p >= 1.0)
                throw std::invalid_argument("Composition: parts must lie strictly in (0,1), got " +
                                            std::to_string(p));
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("Composition: parts sum to " + std::to_string(sum) +
                                        ", outside tolerance " + std::to_string(tol));
        for (double& p : parts_) p /= sum;
    }

    std::size_t size() const { return parts_.size(); }
    double operator[](std::size_t c) const { return parts_[c]; }
    const std::vector<double>& parts() const { return parts_; }

private:
    std::vector<double> parts_;
};

// Multiplicative zero-replacement for ingestion: y' = (y*(n-1) + 1/C) / n.
inline std::vector<double> adjust_zeros(const std::vector<double>& y, std::size_t n_obs) {
    const double n = static_cast<double>(n_obs);
    const double c = static_cast<double>(y.size());
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] * (n - 1.0) + 1.0 / c) / n;
    return out;
}

// Shape-parameter form with lossless access to the mean/precision form.
class DirichletParams {
public:
    explicit DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
        if (alpha_.size() < 2) throw std::invalid_argument("DirichletParams: need C >= 2");
        for (double a : alpha_)
            if (!std::isfinite(a) || a <= 0.0)
                throw std::invalid_argument("DirichletParams: alpha must be positive, got " +
                                            std::to_string(a));
    }

    static DirichletParams from_mean_precision(const std::vector<double>& mu, double phi) {
        if (!(phi > 0.0)) throw std::invalid_argument("DirichletParams: phi must be > 0");
        std::vector<double> alpha(mu.size());
        for (std::size_t c = 0; c < mu.size(); ++c) alpha[c] = mu[c] * phi;
        return DirichletParams(std::move(alpha));
    }

    std::size_t size() const { return alpha_.size(); }
    const std::vector<double>& alpha() const { return alpha_; }

    double phi() const {
        double s = 0.0;
        for (double a : alpha_) s += a;
        return s;
    }

    std::vector<double> mu() const {
        const double s = phi();
        std::vector<double> m(alpha_.size());
        for (std::size_t c = 0; c < alpha_.size(); ++c) m[c] = alpha_[c] / s;
        return m;
    }

private:
    std::vector<double> alpha_;
};

// ln f(y | alpha) = ln G(phi) - sum ln G(alpha_c) + sum (alpha_c - 1) ln y_c.
inline double log_density(const DirichletParams& params, const Composition& y) {
    if (params.size() != y.size())
        throw std::invalid_argument("log_density: dimension mismatch");
    const auto& alpha = params.alpha();
    double lp = log_gamma(params.phi());
    for (std::size_t c = 0; c < alpha.size(); ++c) {
        lp -= log_gamma(alpha[c]);
        lp += (alpha[c] - 1.0) * std::log(y[c]);
    }
    return lp;
}

struct Moments {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<std::vector<double>> covariance;
};

inline Moments moments(const DirichletParams& params) {
    const auto& alpha = params.alpha();
    const double phi = params.phi();
    const double denom = phi * phi * (phi + 1.0);
    const std::size_t C = alpha.size();
    Moments m;
    m.mean.resize(C);
    m.variance.resize(C);
    m.covariance.assign(C, std::vector<double>(C, 0.0));
    for (std::size_t c = 0; c < C; ++c) {
        m.mean[c] = alpha[c] / phi;
        m.variance[c] = alpha[c] * (phi - alpha[c]) / denom;
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t d = 0; d < C; ++d)
            m.covariance[c][d] = (c == d) ? m.variance[c] : -alpha[c] * alpha[d] / denom;
    return m;
}

// Differential entropy:
//   H = sum ln G(a_c) - ln G(phi) + (phi - C) psi(phi) - sum (a_c - 1) psi(a_c).
inline double entropy(const DirichletParams& params) {
    const auto& alpha = params.alpha();
    const double phi = params.phi();
    const double C = static_cast<double>(alpha.size());
    double h = -log_gamma(phi) + (phi - C) * digamma(phi);
    for (double a : alpha) h += log_gamma(a) - (a - 1.0) * digamma(a);
    return h;
}

inline std::vector<Composition> sample(const DirichletParams& params, std::size_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    std::vector<Composition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.dirichlet(params.alpha()));
    return out;
}

// Disassemble compositions into gamma-scale components (inverse of the
// stochastic representation): the total sum(w) ~ Gamma(phi, 1) is independent
// of the composition, so drawing it and scaling reproduces the joint law
// w_c ~ Gamma(alpha_c, 1).
inline std::vector<std::vector<double>> gamma_components(const DirichletParams& params,
                                                         const std::vector<Composition>& y_sample,
                                                         Rng& rng) {
    const double phi = params.phi();
    std::vector<std::vector<double>> w(y_sample.size());
    for (std::size_t i = 0; i < y_sample.size(); ++i) {
        if (y_sample[i].size() != params.size())
            throw std::invalid_argument("gamma_components: dimension mismatch");
        const double total = rng.gamma(phi);
        w[i].resize(params.size());
        for (std::size_t c = 0; c < params.size(); ++c) w[i][c] = y_sample[i][c] * total;
    }
    return w;
}

}  // namespace codareg
