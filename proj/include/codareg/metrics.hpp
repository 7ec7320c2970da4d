#pragma once

// Fit and prediction diagnostics for compositional regression: Aitchison
// distance, Kullback-Leibler divergence, predictive coverage, rMSE, and the
// DIC / WAIC information criteria.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/dirichlet.hpp"
#include "codareg/model.hpp"
#include "codareg/nuts.hpp"
#include "codareg/stats.hpp"

namespace codareg {

// Euclidean distance between centered log-ratio transforms:
// sqrt(sum_c (ln r_c - mean ln r)^2) with r = y1/y2.
inline double aitchison_distance(const Composition& y1, const Composition& y2) {
    if (y1.size() != y2.size())
        throw std::invalid_argument("aitchison_distance: dimension mismatch");
    const std::size_t C = y1.size();
    std::vector<double> lr(C);
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        lr[c] = std::log(y1[c]) - std::log(y2[c]);
        mean += lr[c];
    }
    mean /= static_cast<double>(C);
    double ss = 0.0;
    for (std::size_t c = 0; c < C; ++c) ss += (lr[c] - mean) * (lr[c] - mean);
    return std::sqrt(ss);
}

// Relative entropy sum_c y1_c ln(y1_c / y2_c); asymmetric in its arguments.
inline double kl_divergence(const Composition& y1, const Composition& y2) {
    if (y1.size() != y2.size()) throw std::invalid_argument("kl_divergence: dimension mismatch");
    double kl = 0.0;
    for (std::size_t c = 0; c < y1.size(); ++c)
        kl += y1[c] * (std::log(y1[c]) - std::log(y2[c]));
    return std::max(kl, 0.0);
}

struct CoverageResult {
    double overall = 0.0;                 // mean across components
    std::vector<double> by_component;     // per-component coverage fractions
};

// Fraction of observations inside closed componentwise predictive intervals
// at the given level (quantiles (1-level)/2 and 1-(1-level)/2, type-7).
// predictive[i][j] is the j-th predictive draw of composition i.
inline CoverageResult coverage(const std::vector<Composition>& observed,
                               const std::vector<std::vector<std::vector<double>>>& predictive,
                               double level) {
    if (observed.empty()) throw std::invalid_argument("coverage: no observations");
    if (predictive.size() != observed.size())
        throw std::invalid_argument("coverage: observed/predictive row mismatch");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("coverage: level in (0,1)");
    const std::size_t C = observed.front().size();
    const double lo_p = (1.0 - level) / 2.0;
    const double hi_p = 1.0 - lo_p;

    CoverageResult out;
    out.by_component.assign(C, 0.0);
    std::vector<double> col;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const auto& draws = predictive[i];
        if (draws.size() < 100)
            throw std::invalid_argument("coverage: need >= 100 predictive draws per observation");
        col.resize(draws.size());
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t j = 0; j < draws.size(); ++j) col[j] = draws[j][c];
            const double lo = quantile_type7(col, lo_p);
            const double hi = quantile_type7(col, hi_p);
            if (observed[i][c] >= lo && observed[i][c] <= hi) out.by_component[c] += 1.0;
        }
    }
    for (double& v : out.by_component) v /= static_cast<double>(observed.size());
    for (double v : out.by_component) out.overall += v;
    out.overall /= static_cast<double>(C);
    return out;
}

inline CoverageResult coverage_95(const std::vector<Composition>& observed,
                                  const std::vector<std::vector<std::vector<double>>>& predictive) {
    return coverage(observed, predictive, 0.95);
}

// 100 * sqrt(mean squared error)
inline double rmse_percent(const std::vector<double>& estimated,
                           const std::vector<double>& truth) {
    if (estimated.size() != truth.size() || estimated.empty())
        throw std::invalid_argument("rmse_percent: length mismatch or empty");
    double ss = 0.0;
    for (std::size_t j = 0; j < estimated.size(); ++j) {
        const double d = estimated[j] - truth[j];
        ss += d * d;
    }
    return 100.0 * std::sqrt(ss / static_cast<double>(estimated.size()));
}

struct DicResult {
    double dic = 0.0;
    double p_d = 0.0;
    double deviance_at_mean = 0.0;   // D at the posterior-mean group-level coefficients
    double mean_deviance = 0.0;      // posterior mean of D
};

// Deviance information criterion: DIC = D(theta_bar) + 2 p_D with
// p_D = mean(D) - D(theta_bar).  The mean is taken over the group-level
// effective coefficients (beta + sigma*raw, theta + sigma*raw), the focus
// the likelihood actually depends on.  Averaging the raw non-centered
// vector instead would miss E[sigma*raw] by the sigma-raw covariance and
// can push p_D negative.
inline DicResult dic(const PosteriorDraws& draws, const CoDaTable& data, const ModelSpec& spec) {
    if (draws.total_draws() < 100) throw std::invalid_argument("dic: need >= 100 draws");
    const Model model(spec, data);
    const ParameterLayout lay(spec);

    std::vector<std::vector<std::vector<double>>> beta_bar(
        spec.L, std::vector<std::vector<double>>(spec.C - 1, std::vector<double>(spec.P, 0.0)));
    std::vector<std::vector<double>> theta_bar(spec.L, std::vector<double>(spec.Q, 0.0));
    double mean_dev = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < draws.n_chains(); ++k)
        for (std::size_t m = 0; m < draws.n_samples(); ++m) {
            const auto& q = draws.values[k][m];
            const GroupEffects e = group_effects(spec, q);
            for (std::size_t l = 0; l < spec.L; ++l) {
                for (std::size_t s = 0; s + 1 < spec.C; ++s)
                    for (std::size_t p = 0; p < spec.P; ++p)
                        beta_bar[l][s][p] += e.beta[l][s][p];
                for (std::size_t qq = 0; qq < spec.Q; ++qq) theta_bar[l][qq] += e.theta[l][qq];
            }
            mean_dev += -2.0 * model.log_likelihood(q);
            ++n;
        }
    mean_dev /= static_cast<double>(n);

    // Encode the averaged effects in a vector the likelihood reads back
    // verbatim: zero global coefficients, unit sigmas, means in the raw slots.
    std::vector<double> q_bar(lay.dim(), 0.0);
    for (std::size_t l = 0; l < spec.L; ++l) {
        for (std::size_t s = 0; s + 1 < spec.C; ++s)
            for (std::size_t p = 0; p < spec.P; ++p)
                q_bar[lay.braw(l, s, p)] = beta_bar[l][s][p] / static_cast<double>(n);
        for (std::size_t qq = 0; qq < spec.Q; ++qq)
            q_bar[lay.traw(l, qq)] = theta_bar[l][qq] / static_cast<double>(n);
    }

    DicResult out;
    out.deviance_at_mean = -2.0 * model.log_likelihood(q_bar);
    if (!std::isfinite(out.deviance_at_mean))
        throw std::runtime_error("dic: non-finite deviance at the posterior mean");
    out.mean_deviance = mean_dev;
    out.p_d = mean_dev - out.deviance_at_mean;
    out.dic = out.deviance_at_mean + 2.0 * out.p_d;
    return out;
}

struct WaicResult {
    double waic = 0.0;     // -2 * elppd
    double p_waic = 0.0;
    double lppd = 0.0;
    double elppd = 0.0;    // lppd - p_waic
};

// Widely applicable information criterion: lppd by stabilized log-mean-exp
// of per-observation densities across draws, p_WAIC by their per-observation
// sample variance.  Two streaming passes over the draws keep memory at O(N).
inline WaicResult waic(const PosteriorDraws& draws, const CoDaTable& data, const ModelSpec& spec) {
    if (draws.total_draws() < 100) throw std::invalid_argument("waic: need >= 100 draws");
    const Model model(spec, data);
    const std::size_t N = data.n_obs();
    const double J = static_cast<double>(draws.total_draws());

    std::vector<double> mx(N, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < draws.n_chains(); ++k)
        for (std::size_t m = 0; m < draws.n_samples(); ++m) {
            const auto ll = model.log_likelihood_by_obs(draws.values[k][m]);
            for (std::size_t i = 0; i < N; ++i) mx[i] = std::max(mx[i], ll[i]);
        }
    for (std::size_t i = 0; i < N; ++i)
        if (!std::isfinite(mx[i]))
            throw std::runtime_error("waic: predictive density underflows in every draw at row " +
                                     std::to_string(i + 1));

    std::vector<double> expsum(N, 0.0), wmean(N, 0.0), wssq(N, 0.0);
    std::size_t j = 0;
    for (std::size_t k = 0; k < draws.n_chains(); ++k)
        for (std::size_t m = 0; m < draws.n_samples(); ++m) {
            const auto ll = model.log_likelihood_by_obs(draws.values[k][m]);
            ++j;
            for (std::size_t i = 0; i < N; ++i) {
                expsum[i] += std::exp(ll[i] - mx[i]);
                const double d = ll[i] - wmean[i];
                wmean[i] += d / static_cast<double>(j);
                wssq[i] += d * (ll[i] - wmean[i]);
            }
        }

    WaicResult out;
    for (std::size_t i = 0; i < N; ++i) {
        out.lppd += mx[i] + std::log(expsum[i] / J);
        out.p_waic += wssq[i] / (J - 1.0);
    }
    out.elppd = out.lppd - out.p_waic;
    out.waic = -2.0 * out.elppd;
    return out;
}

// All six diagnostics of a fitted model in one bundle.
struct FitReport {
    double aitchison_mean = 0.0;
    double kl_mean = 0.0;
    double coverage_95 = 0.0;
    double rmse_percent = 0.0;   // fitted mean vs observed composition, x100 scale
    double dic = 0.0;
    double p_d = 0.0;
    double waic = 0.0;
    double p_waic = 0.0;
    double lppd = 0.0;
    double elppd = 0.0;
    std::vector<double> coverage_by_component;
    std::vector<double> aitchison_by_obs;
    std::vector<double> kl_by_obs;
};

// Scores fitted point predictions + predictive draws against the observed
// table and attaches the information criteria.
inline FitReport fit_report(const PosteriorDraws& draws, const CoDaTable& data,
                            const ModelSpec& spec,
                            const std::vector<std::vector<double>>& fitted_mean,
                            const std::vector<std::vector<std::vector<double>>>& predictive) {
    if (fitted_mean.size() != data.n_obs())
        throw std::invalid_argument("fit_report: fitted row count mismatch");
    FitReport rep;
    const std::size_t N = data.n_obs();
    std::vector<double> flat_obs, flat_fit;
    for (std::size_t i = 0; i < N; ++i) {
        const Composition yhat(fitted_mean[i], 1e-6);
        rep.aitchison_by_obs.push_back(aitchison_distance(data.y[i], yhat));
        rep.kl_by_obs.push_back(kl_divergence(data.y[i], yhat));
        rep.aitchison_mean += rep.aitchison_by_obs.back();
        rep.kl_mean += rep.kl_by_obs.back();
        for (std::size_t c = 0; c < spec.C; ++c) {
            flat_obs.push_back(data.y[i][c]);
            flat_fit.push_back(yhat[c]);
        }
    }
    rep.aitchison_mean /= static_cast<double>(N);
    rep.kl_mean /= static_cast<double>(N);
    rep.rmse_percent = rmse_percent(flat_fit, flat_obs);

    const CoverageResult cov = coverage_95(data.y, predictive);
    rep.coverage_95 = cov.overall;
    rep.coverage_by_component = cov.by_component;

    const DicResult d = dic(draws, data, spec);
    rep.dic = d.dic;
    rep.p_d = d.p_d;
    const WaicResult w = waic(draws, data, spec);
    rep.waic = w.waic;
    rep.p_waic = w.p_waic;
    rep.lppd = w.lppd;
    rep.elppd = w.elppd;
    return rep;
}

}  // namespace codareg
