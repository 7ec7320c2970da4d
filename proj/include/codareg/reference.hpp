#pragma once

// Objective reference-component selection: plain Dirichlet maximum
// likelihood (method-of-moments start, damped Newton in log-alpha space)
// followed by the gamma-shape decision rule (argmax alpha == argmin
// skewness == argmin kurtosis).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/dirichlet.hpp"
#include "codareg/special.hpp"

namespace codareg {

struct MleError : std::runtime_error {
    MleError(std::string msg, std::vector<double> last, double gnorm)
        : std::runtime_error(std::move(msg)), last_iterate(std::move(last)), grad_norm(gnorm) {}
    std::vector<double> last_iterate;
    double grad_norm;
};

namespace detail {

inline double dirichlet_loglik_suff(const std::vector<double>& alpha,
                                    const std::vector<double>& slog, double n) {
    double phi = 0.0;
    for (double a : alpha) phi += a;
    double ll = n * log_gamma(phi);
    for (std::size_t c = 0; c < alpha.size(); ++c)
        ll += -n * log_gamma(alpha[c]) + (alpha[c] - 1.0) * slog[c];
    return ll;
}

}  // namespace detail

struct MleOptions {
    double grad_tol = 1e-8;  // max-norm of the alpha-space gradient
    int max_iter = 500;
};

// MLE from sufficient statistics: slog_c = sum_i ln y_ic over n observations.
// Newton steps are taken in log(alpha) space (positivity-preserving) with a
// halving line search that never decreases the log-likelihood beyond
// floating-point plateau noise.
inline DirichletParams fit_dirichlet_mle_suff(const std::vector<double>& slog, double n,
                                              std::vector<double> alpha0,
                                              const MleOptions& opt = {}) {
    const std::size_t C = slog.size();
    std::vector<double> alpha = std::move(alpha0);
    double ll = detail::dirichlet_loglik_suff(alpha, slog, n);

    std::vector<double> g(C), step(C), cand(C);
    double gnorm = 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        double phi = 0.0;
        for (double a : alpha) phi += a;
        const double dphi = digamma(phi);
        gnorm = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            g[c] = n * (dphi - digamma(alpha[c])) + slog[c];
            gnorm = std::max(gnorm, std::abs(g[c]));
        }
        if (gnorm <= opt.grad_tol) return DirichletParams(alpha);

        // Hessian in log-alpha space: diag(d) + z * a a', with
        // d_c = alpha_c^2 q_c + alpha_c g_c, q_c = -n psi'(alpha_c),
        // z = n psi'(phi), a_c = alpha_c.  Solve by Sherman-Morrison and
        // take the ascent direction -H^{-1} g (H is negative definite near
        // the optimum; the line search guards the far-from-optimum case).
        const double z = n * trigamma(phi);
        std::vector<double> d(C);
        double ata = 0.0, atg = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double curv = -n * trigamma(alpha[c]) * alpha[c] * alpha[c];  // < 0 always
            d[c] = curv + alpha[c] * g[c];
            if (d[c] > 0.1 * curv) d[c] = 0.1 * curv;  // keep the diagonal safely negative
            step[c] = alpha[c] * g[c] / d[c];          // D^{-1} (a o g)
            ata += alpha[c] * alpha[c] / d[c];
            atg += alpha[c] * step[c];
        }
        const double corr = z * atg / (1.0 + z * ata);
        for (std::size_t c = 0; c < C; ++c)
            step[c] -= corr * alpha[c] / d[c];         // Newton direction in log-alpha

        // Plateau tolerance: the log-likelihood is a sum of n order-one terms,
        // so its evaluation noise scales with n even when cancellation makes
        // |ll| itself small.  Near the optimum the true Newton improvement
        // drops below that noise and steps would otherwise be rejected.
        const double noise = 1e-13 * (std::abs(ll) + n);
        double t = 1.0;
        bool accepted = false;
        double ll_new = ll;
        while (t >= 1e-12) {
            for (std::size_t c = 0; c < C; ++c) cand[c] = alpha[c] * std::exp(-t * step[c]);
            ll_new = detail::dirichlet_loglik_suff(cand, slog, n);
            if (std::isfinite(ll_new) && ll_new >= ll - noise) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted)
            throw MleError("fit_dirichlet_mle: line search failed at iteration " +
                               std::to_string(it),
                           alpha, gnorm);
        alpha = cand;
        ll = std::max(ll, ll_new);
    }
    throw MleError("fit_dirichlet_mle: no convergence after " + std::to_string(opt.max_iter) +
                       " iterations (grad max-norm " + std::to_string(gnorm) + ")",
                   alpha, gnorm);
}

// Method-of-moments initializer: match E[y] and E[y_1^2].
inline std::vector<double> method_of_moments(const std::vector<Composition>& data) {
    const std::size_t C = data.front().size();
    const double n = static_cast<double>(data.size());
    std::vector<double> m1(C, 0.0);
    double m2_first = 0.0;
    for (const auto& y : data) {
        for (std::size_t c = 0; c < C; ++c) m1[c] += y[c];
        m2_first += y[0] * y[0];
    }
    for (double& v : m1) v /= n;
    m2_first /= n;
    const double denom = m2_first - m1[0] * m1[0];
    double phi0 = denom > 1e-12 ? (m1[0] - m2_first) / denom : static_cast<double>(C);
    if (!(phi0 > 1e-3)) phi0 = static_cast<double>(C);
    std::vector<double> alpha(C);
    for (std::size_t c = 0; c < C; ++c) alpha[c] = std::max(m1[c] * phi0, 1e-3);
    return alpha;
}

inline DirichletParams fit_dirichlet_mle(const std::vector<Composition>& data,
                                         const MleOptions& opt = {}) {
    if (data.empty()) throw std::invalid_argument("fit_dirichlet_mle: empty data");
    const std::size_t C = data.front().size();
    if (data.size() < C + 1)
        throw std::invalid_argument("fit_dirichlet_mle: need at least C+1 observations");
    std::vector<double> slog(C, 0.0);
    for (const auto& y : data)
        for (std::size_t c = 0; c < C; ++c) slog[c] += std::log(y[c]);
    return fit_dirichlet_mle_suff(slog, static_cast<double>(data.size()),
                                  method_of_moments(data), opt);
}

struct ShapeReport {
    std::vector<double> alpha_hat;
    std::vector<double> skewness;   // 2 / sqrt(alpha_hat)
    std::vector<double> kurtosis;   // 3 + 6 / alpha_hat
    double phi_hat = 0.0;
    double entropy_hat = 0.0;
    std::size_t reference = 0;      // selected component (0-based)
    bool tie_warning = false;
};

inline ShapeReport shape_metrics(const DirichletParams& params) {
    ShapeReport r;
    r.alpha_hat = params.alpha();
    r.phi_hat = params.phi();
    r.entropy_hat = entropy(params);
    r.skewness.resize(params.size());
    r.kurtosis.resize(params.size());
    for (std::size_t c = 0; c < params.size(); ++c) {
        r.skewness[c] = 2.0 / std::sqrt(r.alpha_hat[c]);
        r.kurtosis[c] = 3.0 + 6.0 / r.alpha_hat[c];
    }
    return r;
}

struct SelectionResult {
    std::size_t index = 0;
    bool tie = false;
};

// argmax alpha-hat; ties within 1e-9 resolve to the lowest index with a
// warning flag (the theory is reference-invariant, so any choice is valid).
inline SelectionResult select_reference(const ShapeReport& report) {
    SelectionResult sel;
    double best = report.alpha_hat.at(0);
    for (std::size_t c = 1; c < report.alpha_hat.size(); ++c) {
        if (report.alpha_hat[c] > best + 1e-9) {
            best = report.alpha_hat[c];
            sel.index = c;
        } else if (std::abs(report.alpha_hat[c] - best) <= 1e-9) {
            sel.tie = true;
        }
    }
    return sel;
}

// Convenience: fit, score, and select in one pass.
inline ShapeReport analyze_reference(const std::vector<Composition>& data,
                                     const MleOptions& opt = {}) {
    ShapeReport r = shape_metrics(fit_dirichlet_mle(data, opt));
    const SelectionResult sel = select_reference(r);
    r.reference = sel.index;
    r.tie_warning = sel.tie;
    return r;
}

}  // namespace codareg
