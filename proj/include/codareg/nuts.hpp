#pragma once

// Self-contained No-U-Turn sampler: leapfrog tree doubling with multinomial
// state selection, dual-averaging step-size adaptation, windowed diagonal
// mass-matrix estimation, multi-chain execution, and convergence statistics
// (split R-hat, autocorrelation ESS).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "codareg/rng.hpp"

namespace codareg {

// target(q, grad) -> log density; fills grad (same length as q).  Non-finite
// regions must return -inf (gradient contents are then ignored).
using LogDensityGradient =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

class SamplerError : public std::runtime_error {
public:
    explicit SamplerError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SamplerConfig {
    std::size_t chains = 3;
    std::size_t warmup = 9000;
    std::size_t samples = 1000;       // retained draws per chain
    std::uint64_t seed = 1;
    double target_accept = 0.8;
    std::size_t max_tree_depth = 10;
    double init_jitter = 2.0;

    void validate() const {
        if (chains < 1) throw std::invalid_argument("SamplerConfig: chains >= 1");
        if (warmup < 100) throw std::invalid_argument("SamplerConfig: warmup >= 100");
        if (samples < 1) throw std::invalid_argument("SamplerConfig: samples >= 1");
        if (!(target_accept >= 0.6 && target_accept < 1.0))
            throw std::invalid_argument("SamplerConfig: target_accept in [0.6, 1)");
        if (max_tree_depth < 1) throw std::invalid_argument("SamplerConfig: max_tree_depth >= 1");
        if (!(init_jitter >= 0.0)) throw std::invalid_argument("SamplerConfig: init_jitter >= 0");
    }
};

struct PosteriorDraws {
    std::vector<std::string> names;
    // values[k][m] = parameter vector of chain k at retained iteration m
    std::vector<std::vector<std::vector<double>>> values;
    std::vector<std::vector<double>> accept_stats;  // per chain, per iteration
    std::vector<std::vector<double>> step_size;     // per chain, per iteration
    std::vector<std::vector<char>> divergent;       // per chain, per iteration
    std::vector<std::vector<double>> log_density;   // per chain, per iteration

    std::size_t n_chains() const { return values.size(); }
    std::size_t n_samples() const { return values.empty() ? 0 : values.front().size(); }
    std::size_t dim() const { return names.size(); }

    std::size_t total_draws() const { return n_chains() * n_samples(); }
    std::size_t total_divergences() const {
        std::size_t n = 0;
        for (const auto& ch : divergent)
            for (char d : ch) n += (d != 0);
        return n;
    }
    double divergence_rate() const {
        return total_draws() == 0 ? 0.0
                                  : static_cast<double>(total_divergences()) /
                                        static_cast<double>(total_draws());
    }

    std::size_t index_of(const std::string& param) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == param) return i;
        throw std::invalid_argument("PosteriorDraws: unknown parameter '" + param + "'");
    }

    // column of one parameter, one chain
    std::vector<double> column(std::size_t chain, std::size_t param) const {
        std::vector<double> col(n_samples());
        for (std::size_t m = 0; m < col.size(); ++m) col[m] = values[chain][m][param];
        return col;
    }
};

namespace detail {

inline double dot_scaled(const std::vector<double>& a, const std::vector<double>& w,
                         const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i] * b[i];
    return s;
}

struct LeapfrogState {
    std::vector<double> q, p, grad;
    double lp = 0.0;
};

inline void leapfrog(const LogDensityGradient& target, LeapfrogState& s,
                     const std::vector<double>& inv_mass, double eps) {
    const std::size_t n = s.q.size();
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * eps * s.grad[i];
    for (std::size_t i = 0; i < n; ++i) s.q[i] += eps * inv_mass[i] * s.p[i];
    s.lp = target(s.q, s.grad);
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * eps * s.grad[i];
}

inline double joint(double lp, const std::vector<double>& p, const std::vector<double>& inv_mass) {
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) k += p[i] * p[i] * inv_mass[i];
    return lp - 0.5 * k;
}

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Tree {
    LeapfrogState minus, plus;
    std::vector<double> q_prop;
    std::vector<double> rho;
    double lw = 0.0;          // log of total multinomial weight
    bool ok = true;           // subtree usable (no divergence / internal U-turn)
    bool div = false;         // divergence encountered
    double alpha = 0.0;       // sum of per-leaf acceptance statistics
    std::size_t n_alpha = 0;  // number of leaves built
};

struct ChainWorkspace {
    const LogDensityGradient& target;
    const std::vector<double>& inv_mass;
    Rng& rng;
    double eps;
    double h0;
    std::size_t max_depth;

    Tree build(const LeapfrogState& from, double dir, std::size_t depth) {
        Tree t;
        if (depth == 0) {
            LeapfrogState s = from;
            leapfrog(target, s, inv_mass, dir * eps);
            double h = joint(s.lp, s.p, inv_mass);
            if (!std::isfinite(h)) h = -std::numeric_limits<double>::infinity();
            t.q_prop = s.q;
            t.rho = s.p;
            t.lw = h - h0;
            t.div = (h0 - h) > 1000.0;
            t.ok = !t.div;
            t.alpha = std::isfinite(h) ? std::min(1.0, std::exp(h - h0)) : 0.0;
            t.n_alpha = 1;
            t.minus = s;
            t.plus = std::move(s);
            return t;
        }
        Tree t1 = build(from, dir, depth - 1);
        if (!t1.ok) return t1;
        Tree t2 = build(dir > 0 ? t1.plus : t1.minus, dir, depth - 1);
        if (dir > 0)
            t1.plus = t2.plus;
        else
            t1.minus = t2.minus;
        t1.alpha += t2.alpha;
        t1.n_alpha += t2.n_alpha;
        if (!t2.ok) {
            t1.ok = false;
            t1.div = t2.div;
            return t1;
        }
        const double tot = log_add_exp(t1.lw, t2.lw);
        if (std::log(rng.uniform01()) < t2.lw - tot) t1.q_prop = std::move(t2.q_prop);
        t1.lw = tot;
        for (std::size_t i = 0; i < t1.rho.size(); ++i) t1.rho[i] += t2.rho[i];
        std::vector<double> dq(t1.rho.size());
        for (std::size_t i = 0; i < dq.size(); ++i) dq[i] = t1.plus.q[i] - t1.minus.q[i];
        if (dot_scaled(dq, inv_mass, t1.minus.p) < 0.0 ||
            dot_scaled(dq, inv_mass, t1.plus.p) < 0.0)
            t1.ok = false;
        return t1;
    }
};

struct ChainResult {
    std::vector<std::vector<double>> draws;
    std::vector<double> accept_stats;
    std::vector<double> step_size;
    std::vector<char> divergent;
    std::vector<double> log_density;
    double adapted_eps = 0.0;
};

inline ChainResult run_chain(const LogDensityGradient& target, std::size_t dim,
                             const SamplerConfig& cfg, const std::vector<double>& start,
                             std::uint64_t chain_seed, std::size_t chain_index) {
    Rng rng(chain_seed);
    const std::string tag = "chain " + std::to_string(chain_index + 1) + ": ";

    LeapfrogState cur;
    cur.q = start;
    cur.grad.resize(dim);
    cur.p.resize(dim);
    cur.lp = target(cur.q, cur.grad);
    if (!std::isfinite(cur.lp))
        throw SamplerError(tag + "starting point has non-finite log density");

    std::vector<double> inv_mass(dim, 1.0);

    // coarse initial step size: double/halve until the one-step acceptance
    // crosses 1/2
    double eps = 1.0;
    {
        LeapfrogState s = cur;
        for (std::size_t i = 0; i < dim; ++i)
            s.p[i] = rng.normal() / std::sqrt(inv_mass[i]);
        const double h_ref = joint(s.lp, s.p, inv_mass);
        LeapfrogState probe = s;
        leapfrog(target, probe, inv_mass, eps);
        double h1 = joint(probe.lp, probe.p, inv_mass);
        if (!std::isfinite(h1)) h1 = -std::numeric_limits<double>::infinity();
        const double a = (h1 - h_ref) > std::log(0.5) ? 1.0 : -1.0;
        while (true) {
            eps *= std::pow(2.0, a);
            probe = s;
            leapfrog(target, probe, inv_mass, eps);
            h1 = joint(probe.lp, probe.p, inv_mass);
            if (!std::isfinite(h1)) h1 = -std::numeric_limits<double>::infinity();
            if (a * (h1 - h_ref) <= a * std::log(0.5) || eps < 1e-10 || eps > 1e7) break;
        }
    }

    // dual averaging, restarted at every mass-matrix update
    double mu_da = std::log(10.0 * eps);
    double log_eps_bar = 0.0, h_bar = 0.0;
    std::size_t m_da = 0;
    constexpr double kGamma = 0.05, kKappa = 0.75;
    constexpr double kT0 = 10.0;

    // Stan-style adaptation schedule: step-size-only buffers flank doubling
    // metric-estimation windows
    std::size_t init_buf = 75, term_buf = 50, base_win = 25;
    if (cfg.warmup < 150) {
        init_buf = static_cast<std::size_t>(cfg.warmup * 0.15);
        term_buf = static_cast<std::size_t>(cfg.warmup * 0.1);
        base_win = cfg.warmup - init_buf - term_buf;
    }
    std::vector<double> wm(dim, 0.0), ws(dim, 0.0);
    std::size_t wn = 0;

    ChainResult out;
    out.draws.reserve(cfg.samples);
    out.accept_stats.reserve(cfg.samples);
    out.step_size.reserve(cfg.samples);
    out.divergent.reserve(cfg.samples);
    out.log_density.reserve(cfg.samples);

    const std::size_t total = cfg.warmup + cfg.samples;
    std::size_t next_win = init_buf + base_win;
    std::size_t win_size = base_win;
    std::size_t warmup_divergences = 0;

    ChainWorkspace ws_tree{target, inv_mass, rng, eps, 0.0, cfg.max_tree_depth};

    for (std::size_t it = 0; it < total; ++it) {
        LeapfrogState minus = cur, plus = cur;
        for (std::size_t i = 0; i < dim; ++i) {
            const double p0 = rng.normal() / std::sqrt(inv_mass[i]);
            minus.p[i] = p0;
            plus.p[i] = p0;
        }
        const double h0 = joint(cur.lp, minus.p, inv_mass);
        std::vector<double> q_sel = cur.q;
        std::vector<double> rho = minus.p;
        double lw = 0.0;
        bool diverged = false;
        double alpha_sum = 0.0;
        std::size_t n_alpha = 0;

        ws_tree.eps = eps;
        ws_tree.h0 = h0;
        for (std::size_t depth = 0; depth < cfg.max_tree_depth; ++depth) {
            const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
            Tree t = ws_tree.build(dir > 0 ? plus : minus, dir, depth);
            if (t.ok) {
                if (dir > 0)
                    plus = t.plus;
                else
                    minus = t.minus;
            }
            alpha_sum += t.alpha;
            n_alpha += t.n_alpha;
            if (!t.ok) {
                diverged = t.div;
                break;
            }
            // biased progressive sampling across doublings
            if (std::log(rng.uniform01()) < t.lw - lw) q_sel = std::move(t.q_prop);
            lw = log_add_exp(lw, t.lw);
            for (std::size_t i = 0; i < dim; ++i) rho[i] += t.rho[i];
            std::vector<double> dq(dim);
            for (std::size_t i = 0; i < dim; ++i) dq[i] = plus.q[i] - minus.q[i];
            if (dot_scaled(dq, inv_mass, minus.p) < 0.0 || dot_scaled(dq, inv_mass, plus.p) < 0.0)
                break;
        }
        cur.q = std::move(q_sel);
        cur.lp = target(cur.q, cur.grad);
        const double astat = alpha_sum / static_cast<double>(std::max<std::size_t>(n_alpha, 1));

        if (it < cfg.warmup) {
            if (diverged) ++warmup_divergences;
            ++m_da;
            const double md = static_cast<double>(m_da);
            h_bar = (1.0 - 1.0 / (md + kT0)) * h_bar + (cfg.target_accept - astat) / (md + kT0);
            const double log_eps = mu_da - std::sqrt(md) / kGamma * h_bar;
            const double w = std::pow(md, -kKappa);
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
            eps = std::exp(log_eps);

            if (it >= init_buf && it < cfg.warmup - term_buf) {
                ++wn;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double d = cur.q[i] - wm[i];
                    wm[i] += d / static_cast<double>(wn);
                    ws[i] += d * (cur.q[i] - wm[i]);
                }
                if (it + 1 == std::min(next_win, cfg.warmup - term_buf)) {
                    const double denom = static_cast<double>(std::max<std::size_t>(wn - 1, 1));
                    const double shrink_n = static_cast<double>(wn);
                    for (std::size_t i = 0; i < dim; ++i) {
                        const double var = ws[i] / denom;
                        inv_mass[i] = var * (shrink_n / (shrink_n + 5.0)) +
                                      1e-3 * (5.0 / (shrink_n + 5.0));
                        wm[i] = 0.0;
                        ws[i] = 0.0;
                    }
                    wn = 0;
                    win_size *= 2;
                    next_win = it + 1 + win_size;
                    // restart step-size adaptation under the new metric
                    eps = std::exp(log_eps_bar);
                    mu_da = std::log(10.0 * eps);
                    h_bar = 0.0;
                    log_eps_bar = 0.0;
                    m_da = 0;
                }
            }
            if (it + 1 == cfg.warmup) {
                eps = std::exp(log_eps_bar);
                if (warmup_divergences == cfg.warmup)
                    throw SamplerError(tag + "every warmup iteration diverged (step size " +
                                       std::to_string(eps) + "); target may be ill-conditioned");
            }
        } else {
            out.draws.push_back(cur.q);
            out.accept_stats.push_back(astat);
            out.step_size.push_back(eps);
            out.divergent.push_back(diverged ? 1 : 0);
            out.log_density.push_back(cur.lp);
        }
    }
    out.adapted_eps = eps;
    return out;
}

}  // namespace detail

// Hamiltonian drift |H(end) - H(start)| over an n-step leapfrog integration
// with unit mass; exposed so the integrator can be verified directly.
inline double hamiltonian_drift(const LogDensityGradient& target, std::vector<double> q,
                                std::vector<double> p, double eps, std::size_t steps) {
    const std::vector<double> inv_mass(q.size(), 1.0);
    detail::LeapfrogState s;
    s.q = std::move(q);
    s.p = std::move(p);
    s.grad.resize(s.q.size());
    s.lp = target(s.q, s.grad);
    const double h_start = detail::joint(s.lp, s.p, inv_mass);
    for (std::size_t k = 0; k < steps; ++k) detail::leapfrog(target, s, inv_mass, eps);
    return std::abs(detail::joint(s.lp, s.p, inv_mass) - h_start);
}

// Runs config.chains independent NUTS chains.  `rng` supplies the jittered
// starting points (init + U(-init_jitter, +init_jitter) per coordinate, up
// to 100 redraws per chain until the target is finite), drawn sequentially
// before any chain starts; chain k then samples from its own stream seeded
// config.seed + k, so draws are bitwise reproducible and independent of the
// thread count.
inline PosteriorDraws nuts_sample(const LogDensityGradient& target, const SamplerConfig& config,
                                  const std::vector<double>& init, Rng& rng,
                                  std::vector<std::string> names = {}, std::size_t threads = 1) {
    config.validate();
    const std::size_t dim = init.size();
    if (dim == 0) throw std::invalid_argument("nuts_sample: empty init vector");
    if (!names.empty() && names.size() != dim)
        throw std::invalid_argument("nuts_sample: names length != dim");
    if (names.empty()) {
        names.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) names[i] = "p[" + std::to_string(i + 1) + "]";
    }

    std::vector<std::vector<double>> starts(config.chains);
    {
        std::vector<double> q(dim), grad(dim);
        for (std::size_t k = 0; k < config.chains; ++k) {
            bool found = false;
            for (int attempt = 0; attempt < 100 && !found; ++attempt) {
                for (std::size_t i = 0; i < dim; ++i)
                    q[i] = init[i] + config.init_jitter * (2.0 * rng.uniform01() - 1.0);
                const double lp = target(q, grad);
                found = std::isfinite(lp);
                for (std::size_t i = 0; i < dim && found; ++i) found = std::isfinite(grad[i]);
            }
            if (!found)
                throw SamplerError("chain " + std::to_string(k + 1) +
                                   ": no finite log density after 100 jittered initializations");
            starts[k] = q;
        }
    }

    std::vector<detail::ChainResult> results(config.chains);
    std::vector<std::string> failures(config.chains);
    auto run_one = [&](std::size_t k) {
        try {
            results[k] = detail::run_chain(target, dim, config, starts[k], config.seed + k, k);
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    };

    if (threads <= 1 || config.chains <= 1) {
        for (std::size_t k = 0; k < config.chains; ++k) run_one(k);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(config.chains);
        for (std::size_t k = 0; k < config.chains; ++k) pool.emplace_back(run_one, k);
        for (auto& t : pool) t.join();
    }
    for (const auto& f : failures)
        if (!f.empty()) throw SamplerError(f);

    PosteriorDraws out;
    out.names = std::move(names);
    out.values.resize(config.chains);
    out.accept_stats.resize(config.chains);
    out.step_size.resize(config.chains);
    out.divergent.resize(config.chains);
    out.log_density.resize(config.chains);
    for (std::size_t k = 0; k < config.chains; ++k) {
        out.values[k] = std::move(results[k].draws);
        out.accept_stats[k] = std::move(results[k].accept_stats);
        out.step_size[k] = std::move(results[k].step_size);
        out.divergent[k] = std::move(results[k].divergent);
        out.log_density[k] = std::move(results[k].log_density);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convergence statistics
// ---------------------------------------------------------------------------

namespace detail {

inline void require_diagnosable(const PosteriorDraws& draws) {
    if (draws.n_chains() < 2)
        throw std::invalid_argument("diagnostics: need at least 2 chains");
    if (draws.n_samples() < 4)
        throw std::invalid_argument("diagnostics: need at least 4 draws per chain");
}

}  // namespace detail

// Split-chain potential scale reduction factor.
inline double rhat(const PosteriorDraws& draws, std::size_t param) {
    detail::require_diagnosable(draws);
    const std::size_t K = draws.n_chains();
    const std::size_t half = draws.n_samples() / 2;
    const std::size_t S = 2 * K;

    std::vector<double> means(S), vars(S);
    for (std::size_t k = 0; k < K; ++k) {
        for (int part = 0; part < 2; ++part) {
            const std::size_t off = part == 0 ? 0 : half;
            double m = 0.0;
            for (std::size_t i = 0; i < half; ++i) m += draws.values[k][off + i][param];
            m /= static_cast<double>(half);
            double v = 0.0;
            for (std::size_t i = 0; i < half; ++i) {
                const double d = draws.values[k][off + i][param] - m;
                v += d * d;
            }
            v /= static_cast<double>(half - 1);
            means[2 * k + part] = m;
            vars[2 * k + part] = v;
        }
    }
    double W = 0.0, grand = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        W += vars[s];
        grand += means[s];
    }
    W /= static_cast<double>(S);
    grand /= static_cast<double>(S);
    double B = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        const double d = means[s] - grand;
        B += d * d;
    }
    B *= static_cast<double>(half) / static_cast<double>(S - 1);
    const double n = static_cast<double>(half);
    const double var_hat = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_hat / W);
}

inline double rhat(const PosteriorDraws& draws, const std::string& param) {
    return rhat(draws, draws.index_of(param));
}

// Multi-chain autocorrelation ESS with Geyer initial-monotone positive-pair
// truncation, capped at 1.5x the total draw count.
inline double effective_sample_size(const PosteriorDraws& draws, std::size_t param) {
    detail::require_diagnosable(draws);
    const std::size_t K = draws.n_chains();
    const std::size_t M = draws.n_samples();

    std::vector<std::vector<double>> x(K);
    std::vector<double> cmean(K);
    double W = 0.0, grand = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        x[k] = draws.column(k, param);
        double m = 0.0;
        for (double v : x[k]) m += v;
        m /= static_cast<double>(M);
        cmean[k] = m;
        grand += m;
        double v = 0.0;
        for (double q : x[k]) v += (q - m) * (q - m);
        W += v / static_cast<double>(M - 1);
        for (double& q : x[k]) q -= m;  // center in place for autocovariances
    }
    W /= static_cast<double>(K);
    grand /= static_cast<double>(K);
    double B = 0.0;
    if (K > 1) {
        for (std::size_t k = 0; k < K; ++k) B += (cmean[k] - grand) * (cmean[k] - grand);
        B *= static_cast<double>(M) / static_cast<double>(K - 1);
    }
    const double var_plus = (static_cast<double>(M) - 1.0) / static_cast<double>(M) * W +
                            B / static_cast<double>(M);
    if (!(var_plus > 0.0)) return static_cast<double>(K * M);

    auto rho_at = [&](std::size_t t) {
        double acov = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i + t < M; ++i) s += x[k][i] * x[k][i + t];
            acov += s / static_cast<double>(M);
        }
        acov /= static_cast<double>(K);
        return 1.0 - (W - acov) / var_plus;
    };

    double rho_sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 < M; t += 2) {
        double pair = rho_at(t) + rho_at(t + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev);
        prev = pair;
        rho_sum += pair;
    }
    const double tau = 1.0 + 2.0 * rho_sum;
    const double total = static_cast<double>(K * M);
    return std::min(total / tau, 1.5 * total);
}

inline double effective_sample_size(const PosteriorDraws& draws, const std::string& param) {
    return effective_sample_size(draws, draws.index_of(param));
}

}  // namespace codareg
