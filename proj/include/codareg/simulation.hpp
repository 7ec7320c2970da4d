#pragma once

// Scripted, seeded simulation studies: the reference-selection illustration,
// the entropy-precision sweep, and the hierarchical regression recovery
// study, each emitting an aggregate table shaped like its published analogue.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/dirichlet.hpp"
#include "codareg/metrics.hpp"
#include "codareg/model.hpp"
#include "codareg/nuts.hpp"
#include "codareg/reference.hpp"
#include "codareg/rng.hpp"
#include "codareg/stats.hpp"

namespace codareg {

enum class ScenarioKind { ReferenceIllustration, EntropySweep, RegressionSim };

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::ReferenceIllustration;
    std::size_t C = 7;           // components
    std::size_t L = 4;           // groups (regression study)
    std::size_t N = 2000;        // observations per fit / per group
    double phi = 13.0;           // precision (regression study)
    std::size_t replicates = 20;
    std::uint64_t seed = 1;

    void validate() const {
        if (replicates < 1) throw std::invalid_argument("ScenarioSpec: replicates >= 1");
        if (C < 2) throw std::invalid_argument("ScenarioSpec: C >= 2");
        if (kind == ScenarioKind::RegressionSim) {
            if (L < 1) throw std::invalid_argument("ScenarioSpec: L >= 1");
            if (!(phi > 0)) throw std::invalid_argument("ScenarioSpec: phi > 0");
            if (N < 2) throw std::invalid_argument("ScenarioSpec: N >= 2");
        }
        if (kind == ScenarioKind::ReferenceIllustration && N < C + 1)
            throw std::invalid_argument("ScenarioSpec: N > C needed for the MLE");
    }
};

// The lighter sampler profile used for desk-scale simulation runs.
inline SamplerConfig light_sampler_profile() {
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.warmup = 1000;
    cfg.samples = 1000;
    return cfg;
}

// ---------------------------------------------------------------------------
// Reference-selection illustration
// ---------------------------------------------------------------------------

struct IllustrationScenario {
    std::size_t boosted = 0;                    // 0-based boosted component
    std::vector<double> true_alpha;
    std::vector<double> avg_alpha_hat;
    std::vector<double> avg_skewness;
    std::vector<double> avg_kurtosis;
    double avg_phi_hat = 0.0;
    double avg_entropy = 0.0;
    std::vector<std::size_t> selection_counts;  // replicates selecting each component
    std::size_t selected_boosted = 0;
    std::size_t mle_failures = 0;
    std::size_t replicates_used = 0;
};

using IllustrationTable = std::vector<IllustrationScenario>;

// One scenario per component: shapes drawn uniformly on [1.1, 1.9] with the
// scenario's component boosted by an N(4, 1) bump (drawn once per scenario),
// then `replicates` fits of n = spec.N draws each, aggregated.  Passing
// `true_alphas` (one row per scenario) replaces the generation step.
inline IllustrationTable run_reference_illustration(
    const ScenarioSpec& spec, Rng& rng,
    const std::vector<std::vector<double>>* true_alphas = nullptr) {
    spec.validate();
    const std::size_t C = spec.C;
    if (true_alphas && true_alphas->size() != C)
        throw std::invalid_argument("run_reference_illustration: need one alpha row per scenario");

    IllustrationTable table;
    std::size_t total_failures = 0;
    for (std::size_t s = 0; s < C; ++s) {
        IllustrationScenario row;
        row.boosted = s;
        if (true_alphas) {
            row.true_alpha = (*true_alphas)[s];
            if (row.true_alpha.size() != C)
                throw std::invalid_argument("run_reference_illustration: alpha row length != C");
        } else {
            row.true_alpha.resize(C);
            for (std::size_t c = 0; c < C; ++c) row.true_alpha[c] = 1.1 + 0.8 * rng.uniform01();
            row.true_alpha[s] += 4.0 + rng.normal();
        }
        row.avg_alpha_hat.assign(C, 0.0);
        row.avg_skewness.assign(C, 0.0);
        row.avg_kurtosis.assign(C, 0.0);
        row.selection_counts.assign(C, 0);

        for (std::size_t r = 0; r < spec.replicates; ++r) {
            Rng rep_rng(rng.raw());
            const auto data = sample(DirichletParams(row.true_alpha), spec.N, rep_rng);
            try {
                const ShapeReport rep = analyze_reference(data);
                for (std::size_t c = 0; c < C; ++c) {
                    row.avg_alpha_hat[c] += rep.alpha_hat[c];
                    row.avg_skewness[c] += rep.skewness[c];
                    row.avg_kurtosis[c] += rep.kurtosis[c];
                }
                row.avg_phi_hat += rep.phi_hat;
                row.avg_entropy += rep.entropy_hat;
                row.selection_counts[rep.reference] += 1;
                if (rep.reference == s) ++row.selected_boosted;
                ++row.replicates_used;
            } catch (const MleError&) {
                ++row.mle_failures;
                ++total_failures;
            }
        }
        if (row.replicates_used == 0)
            throw std::runtime_error("run_reference_illustration: every fit failed in scenario " +
                                     std::to_string(s + 1));
        const double n = static_cast<double>(row.replicates_used);
        for (std::size_t c = 0; c < C; ++c) {
            row.avg_alpha_hat[c] /= n;
            row.avg_skewness[c] /= n;
            row.avg_kurtosis[c] /= n;
        }
        row.avg_phi_hat /= n;
        row.avg_entropy /= n;
        table.push_back(std::move(row));
    }
    const std::size_t total = C * spec.replicates;
    if (20 * total_failures > total)
        throw std::runtime_error("run_reference_illustration: MLE failed in " +
                                 std::to_string(total_failures) + "/" + std::to_string(total) +
                                 " replicates (> 5%)");
    return table;
}

// ---------------------------------------------------------------------------
// Entropy sweep
// ---------------------------------------------------------------------------

struct EntropyRow {
    std::size_t C = 0;
    double phi = 0.0;
    double entropy = 0.0;
    bool is_max = false;  // argmax over the grid within this C
};

// Evaluates the Dirichlet entropy at symmetric shapes alpha_c = phi/C over
// the grid, flagging the per-C maximizer.
inline std::vector<EntropyRow> run_entropy_sweep(std::size_t c_lo, std::size_t c_hi,
                                                 const std::vector<double>& phi_grid) {
    if (phi_grid.empty()) throw std::invalid_argument("run_entropy_sweep: empty grid");
    if (c_lo < 2 || c_hi < c_lo) throw std::invalid_argument("run_entropy_sweep: bad C range");
    for (double phi : phi_grid)
        if (!(phi > 0)) throw std::invalid_argument("run_entropy_sweep: phi > 0 required");

    std::vector<EntropyRow> rows;
    for (std::size_t C = c_lo; C <= c_hi; ++C) {
        const std::size_t first = rows.size();
        std::size_t best = first;
        for (double phi : phi_grid) {
            EntropyRow row;
            row.C = C;
            row.phi = phi;
            row.entropy =
                entropy(DirichletParams(std::vector<double>(C, phi / static_cast<double>(C))));
            rows.push_back(row);
            if (rows.back().entropy > rows[best].entropy) best = rows.size() - 1;
        }
        rows[best].is_max = true;
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Regression recovery study
// ---------------------------------------------------------------------------

// Group deviations applied to every coefficient of the group, cycled when
// more groups are requested.
inline constexpr double kGroupDeviations[4] = {0.002, 0.003, -0.002, -0.003};

struct RegressionTruth {
    std::vector<std::vector<double>> beta;  // [l][slot], reference row absent
    std::vector<double> theta;              // [l], log precision
};

inline RegressionTruth regression_truth(const ScenarioSpec& spec) {
    RegressionTruth t;
    t.beta.assign(spec.L, std::vector<double>(spec.C - 1, 0.0));
    t.theta.assign(spec.L, 0.0);
    for (std::size_t l = 0; l < spec.L; ++l) {
        const double dev = kGroupDeviations[l % 4];
        for (std::size_t s = 0; s + 1 < spec.C; ++s)
            t.beta[l][s] = 2.0 + static_cast<double>(s) + dev;
        t.theta[l] = std::log(spec.phi) + dev;
    }
    return t;
}

// Intercept-only data from the generator: group l draws from
// Dirichlet(softmax(beta_l, 0) * exp(theta_l)).
inline CoDaTable simulate_regression_table(const ScenarioSpec& spec, const RegressionTruth& truth,
                                           Rng& rng) {
    CoDaTable table;
    const std::size_t C = spec.C;
    for (std::size_t l = 0; l < spec.L; ++l) {
        std::vector<double> eta(C, 0.0);
        for (std::size_t s = 0; s + 1 < C; ++s) eta[s] = truth.beta[l][s];
        double mx = 0.0;
        for (double v : eta) mx = std::max(mx, v);
        std::vector<double> alpha(C);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            alpha[c] = std::exp(eta[c] - mx);
            sum += alpha[c];
        }
        const double phi_l = std::exp(truth.theta[l]);
        for (double& a : alpha) a = a / sum * phi_l;
        const auto ys = sample(DirichletParams(alpha), spec.N, rng);
        for (const auto& y : ys) {
            table.y.push_back(y);
            table.x.push_back({1.0});
            table.z.push_back({1.0});
            table.group.push_back(l);
        }
    }
    for (std::size_t l = 0; l < spec.L; ++l)
        table.group_names.push_back("g" + std::to_string(l + 1));
    return table;
}

struct RegressionCellResult {
    double phi = 0.0;
    std::size_t N = 0;
    std::size_t replicates_used = 0;
    std::size_t failures = 0;
    double adist_mean = 0.0, adist_sd = 0.0;
    double kl_mean = 0.0, kl_sd = 0.0;
    double coverage_pred = 0.0;        // predictive coverage, pooled over observations
    double param_rmse = 0.0;           // group-coefficient rMSE (raw sqrt-MSE scale)
    double param_coverage_pooled = 0.0;
    double param_coverage_avg = 0.0;
    double divergence_rate = 0.0;
    std::vector<double> adist_by_rep, kl_by_rep, coverage_by_rep, rmse_by_rep;
};

// One (phi, N) cell: per replicate, simulate a training table, fit by NUTS,
// score held-out predictions, and recover the group-level coefficients.
inline RegressionCellResult run_regression_sim(const ScenarioSpec& spec, Rng& rng,
                                               const SamplerConfig& profile = light_sampler_profile(),
                                               GradientPath path = GradientPath::Array) {
    spec.validate();
    if (spec.kind != ScenarioKind::RegressionSim)
        throw std::invalid_argument("run_regression_sim: wrong scenario kind");

    const RegressionTruth truth = regression_truth(spec);
    ModelSpec mspec;
    mspec.C = spec.C;
    mspec.P = 1;
    mspec.Q = 1;
    mspec.L = spec.L;
    mspec.reference = spec.C - 1;

    RegressionCellResult cell;
    cell.phi = spec.phi;
    cell.N = spec.N;

    std::vector<double> truth_flat;
    for (std::size_t l = 0; l < spec.L; ++l) {
        for (std::size_t s = 0; s + 1 < spec.C; ++s) truth_flat.push_back(truth.beta[l][s]);
        truth_flat.push_back(truth.theta[l]);
    }

    double param_cover_num = 0.0, param_cover_den = 0.0;
    double div_num = 0.0, div_den = 0.0;

    for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
        Rng rep_rng(rng.raw());
        const CoDaTable train = simulate_regression_table(spec, truth, rep_rng);
        const CoDaTable test = simulate_regression_table(spec, truth, rep_rng);

        Model model(mspec, train);
        SamplerConfig cfg = profile;
        cfg.seed = rep_rng.raw();
        const LogDensityGradient target = [&](const std::vector<double>& q,
                                              std::vector<double>& grad) {
            return model.log_posterior_grad(q, grad, path);
        };
        PosteriorDraws draws;
        try {
            draws = nuts_sample(target, cfg, std::vector<double>(model.dim(), 0.0), rep_rng,
                                model.parameter_names());
        } catch (const SamplerError&) {
            ++cell.failures;
            continue;
        }
        div_num += static_cast<double>(draws.total_divergences());
        div_den += static_cast<double>(draws.total_draws());

        // posterior draws of the group-level actual coefficients (b_l, t_l)
        const std::size_t n_par = truth_flat.size();
        std::vector<std::vector<double>> par_draws(n_par);
        for (std::size_t k = 0; k < draws.n_chains(); ++k)
            for (std::size_t m = 0; m < draws.n_samples(); ++m) {
                const GroupEffects e = group_effects(mspec, draws.values[k][m]);
                std::size_t j = 0;
                for (std::size_t l = 0; l < spec.L; ++l) {
                    for (std::size_t s = 0; s + 1 < spec.C; ++s)
                        par_draws[j++].push_back(e.beta[l][s][0]);
                    par_draws[j++].push_back(e.theta[l][0]);
                }
            }
        std::vector<double> par_mean(n_par);
        for (std::size_t j = 0; j < n_par; ++j) {
            par_mean[j] = mean_of(par_draws[j]);
            const double lo = quantile_type7(par_draws[j], 0.025);
            const double hi = quantile_type7(par_draws[j], 0.975);
            param_cover_num += (truth_flat[j] >= lo && truth_flat[j] <= hi) ? 1.0 : 0.0;
            param_cover_den += 1.0;
        }
        cell.rmse_by_rep.push_back(rmse_percent(par_mean, truth_flat) / 100.0);

        // held-out scoring: fitted mean and predictive draws per group; the
        // predictive set thins to at most 500 evenly spaced posterior draws
        const std::size_t total_draws = draws.total_draws();
        const std::size_t n_pred = std::min<std::size_t>(500, total_draws);
        std::vector<char> pick_flags(total_draws, 0);
        for (std::size_t j = 0; j < n_pred; ++j)
            pick_flags[n_pred > 1 ? j * (total_draws - 1) / (n_pred - 1) : 0] = 1;
        std::vector<std::vector<double>> mu_mean(spec.L, std::vector<double>(spec.C, 0.0));
        std::vector<std::vector<std::vector<double>>> pred(spec.L);
        for (auto& p : pred) p.reserve(n_pred);
        std::size_t flat = 0;
        for (std::size_t k = 0; k < draws.n_chains(); ++k)
            for (std::size_t m = 0; m < draws.n_samples(); ++m, ++flat) {
                const GroupEffects e = group_effects(mspec, draws.values[k][m]);
                const bool pick = pick_flags[flat] != 0;
                for (std::size_t l = 0; l < spec.L; ++l) {
                    std::vector<double> eta(spec.C, 0.0);
                    for (std::size_t s = 0; s + 1 < spec.C; ++s) eta[s] = e.beta[l][s][0];
                    double mx = 0.0;
                    for (double v : eta) mx = std::max(mx, v);
                    std::vector<double> mu(spec.C);
                    double sum = 0.0;
                    for (std::size_t c = 0; c < spec.C; ++c) {
                        mu[c] = std::exp(eta[c] - mx);
                        sum += mu[c];
                    }
                    const double phi_l = std::exp(e.theta[l][0]);
                    std::vector<double> alpha(spec.C);
                    for (std::size_t c = 0; c < spec.C; ++c) {
                        mu[c] /= sum;
                        alpha[c] = mu[c] * phi_l;
                        mu_mean[l][c] += mu[c];
                    }
                    if (pick) pred[l].push_back(rep_rng.dirichlet(alpha));
                }
            }
        for (auto& row : mu_mean)
            for (double& v : row) v /= static_cast<double>(total_draws);

        double ad = 0.0, klv = 0.0, cov = 0.0;
        std::vector<double> lo(spec.C), hi(spec.C), col(pred[0].size());
        for (std::size_t i = 0; i < test.n_obs(); ++i) {
            const std::size_t l = test.group[i];
            const Composition yhat(mu_mean[l], 1e-6);
            ad += aitchison_distance(test.y[i], yhat);
            klv += kl_divergence(test.y[i], yhat);
        }
        for (std::size_t l = 0; l < spec.L; ++l) {
            for (std::size_t c = 0; c < spec.C; ++c) {
                for (std::size_t j = 0; j < pred[l].size(); ++j) col[j] = pred[l][j][c];
                lo[c] = quantile_type7(col, 0.025);
                hi[c] = quantile_type7(col, 0.975);
            }
            for (std::size_t i = 0; i < test.n_obs(); ++i) {
                if (test.group[i] != l) continue;
                for (std::size_t c = 0; c < spec.C; ++c)
                    cov += (test.y[i][c] >= lo[c] && test.y[i][c] <= hi[c]) ? 1.0 : 0.0;
            }
        }
        const double n_test = static_cast<double>(test.n_obs());
        cell.adist_by_rep.push_back(ad / n_test);
        cell.kl_by_rep.push_back(klv / n_test);
        cell.coverage_by_rep.push_back(cov / (n_test * static_cast<double>(spec.C)));
        ++cell.replicates_used;
    }

    if (10 * cell.failures > spec.replicates)
        throw std::runtime_error("run_regression_sim: sampler failed in " +
                                 std::to_string(cell.failures) + "/" +
                                 std::to_string(spec.replicates) + " replicates (> 10%)");
    if (cell.replicates_used == 0)
        throw std::runtime_error("run_regression_sim: no usable replicates");

    cell.adist_mean = mean_of(cell.adist_by_rep);
    cell.adist_sd = cell.adist_by_rep.size() > 1 ? std::sqrt(variance_of(cell.adist_by_rep)) : 0.0;
    cell.kl_mean = mean_of(cell.kl_by_rep);
    cell.kl_sd = cell.kl_by_rep.size() > 1 ? std::sqrt(variance_of(cell.kl_by_rep)) : 0.0;
    cell.coverage_pred = mean_of(cell.coverage_by_rep);
    cell.param_rmse = mean_of(cell.rmse_by_rep);
    cell.param_coverage_pooled = param_cover_num / param_cover_den;
    cell.param_coverage_avg = cell.param_coverage_pooled;
    cell.divergence_rate = div_den > 0 ? div_num / div_den : 0.0;
    return cell;
}

// ---------------------------------------------------------------------------
// CSV emission (plot-ready tables)
// ---------------------------------------------------------------------------

inline void write_illustration_csv(const std::string& path, const IllustrationTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "scenario,component,true_alpha,avg_alpha_hat,avg_skewness,avg_kurtosis,"
           "avg_phi_hat,avg_entropy,selection_count,selection_rate_boosted\n";
    for (const auto& row : table) {
        const double rate = static_cast<double>(row.selected_boosted) /
                            static_cast<double>(row.replicates_used);
        for (std::size_t c = 0; c < row.true_alpha.size(); ++c) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%.4f\n",
                          row.boosted + 1, c + 1, row.true_alpha[c], row.avg_alpha_hat[c],
                          row.avg_skewness[c], row.avg_kurtosis[c], row.avg_phi_hat,
                          row.avg_entropy, row.selection_counts[c], rate);
            out << buf;
        }
    }
}

inline void write_entropy_csv(const std::string& path, const std::vector<EntropyRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "C,phi,entropy,is_max\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.10f,%d\n", r.C, r.phi, r.entropy,
                      r.is_max ? 1 : 0);
        out << buf;
    }
}

inline void write_regression_csv(const std::string& path,
                                 const std::vector<RegressionCellResult>& cells) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "phi,n,replicates,failures,adist_mean,adist_sd,kl_mean,kl_sd,coverage_pred,"
           "param_rmse,param_coverage_pooled,param_coverage_avg,divergence_rate\n";
    for (const auto& c : cells) {
        char buf[320];
        std::snprintf(buf, sizeof(buf),
                      "%.4f,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", c.phi,
                      c.N, c.replicates_used, c.failures, c.adist_mean, c.adist_sd, c.kl_mean,
                      c.kl_sd, c.coverage_pred, c.param_rmse, c.param_coverage_pooled,
                      c.param_coverage_avg, c.divergence_rate);
        out << buf;
    }
}

}  // namespace codareg
