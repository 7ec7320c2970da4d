#pragma once

// Hierarchical Dirichlet regression model: design matrices, softmax mean
// link with a structural reference-zero row, log precision link, non-centered
// group effects, priors, joint log-posterior, and its analytic gradient in
// two interchangeable evaluation paths (observation-major scalar loops vs
// group-blocked vectorized precomputation).

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/dirichlet.hpp"
#include "codareg/rng.hpp"
#include "codareg/special.hpp"
#include "codareg/stats.hpp"

namespace codareg {

struct CoDaTable {
    std::vector<Composition> y;                // N compositions, dimension C
    std::vector<std::vector<double>> x;        // N x P mean covariates (col 0 == 1)
    std::vector<std::vector<double>> z;        // N x Q precision covariates (col 0 == 1)
    std::vector<std::size_t> group;            // N labels in 0..L-1
    std::vector<std::string> group_names;      // optional: original label per group index

    std::size_t n_obs() const { return y.size(); }

    void validate(std::size_t C, std::size_t P, std::size_t Q, std::size_t L) const {
        if (y.empty()) throw std::invalid_argument("CoDaTable: empty");
        if (x.size() != y.size() || z.size() != y.size() || group.size() != y.size())
            throw std::invalid_argument("CoDaTable: column lengths disagree");
        std::vector<bool> seen(L, false);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i].size() != C) throw std::invalid_argument("CoDaTable: composition dimension");
            if (x[i].size() != P) throw std::invalid_argument("CoDaTable: x row length");
            if (z[i].size() != Q) throw std::invalid_argument("CoDaTable: z row length");
            if (group[i] >= L) throw std::invalid_argument("CoDaTable: group label out of range");
            seen[group[i]] = true;
        }
        for (std::size_t l = 0; l < L; ++l)
            if (!seen[l])
                throw std::invalid_argument("CoDaTable: group " + std::to_string(l + 1) +
                                            " has no observations");
    }
};

struct ModelSpec {
    std::size_t C = 0, P = 0, Q = 0, L = 0;
    std::size_t reference = 0;                 // 0-based component index
    double prior_scale_beta = 5.0;
    double prior_scale_theta = 5.0;
    double hyper_scale = 2.5;                  // half-Cauchy scale for sigma_beta/sigma_theta

    void validate() const {
        if (C < 2 || P < 1 || Q < 1 || L < 1) throw std::invalid_argument("ModelSpec: bad dims");
        if (reference >= C) throw std::invalid_argument("ModelSpec: reference out of range");
        if (!(prior_scale_beta > 0) || !(prior_scale_theta > 0) || !(hyper_scale > 0))
            throw std::invalid_argument("ModelSpec: scales must be positive");
    }
};

// Unconstrained parameter layout.  The reference component's coefficients
// are never stored: non-reference components occupy slots 0..C-2 in
// component order with the reference skipped.
//
//   [ beta_global  (C-1)*P          slot-major, then covariate
//     beta_raw     L*(C-1)*P        group-major, then slot, then covariate
//     theta_global Q
//     theta_raw    L*Q              group-major
//     log_sigma_beta, log_sigma_theta ]
class ParameterLayout {
public:
    explicit ParameterLayout(const ModelSpec& spec)
        : C_(spec.C), P_(spec.P), Q_(spec.Q), L_(spec.L), ref_(spec.reference) {
        nb_ = (C_ - 1) * P_;
        off_braw_ = nb_;
        off_tg_ = off_braw_ + L_ * nb_;
        off_traw_ = off_tg_ + Q_;
        off_lsb_ = off_traw_ + L_ * Q_;
        off_lst_ = off_lsb_ + 1;
        dim_ = off_lst_ + 1;
    }

    std::size_t dim() const { return dim_; }
    std::size_t n_slots() const { return C_ - 1; }

    // slot (0..C-2) -> original component index (skips the reference)
    std::size_t component_of(std::size_t slot) const { return slot < ref_ ? slot : slot + 1; }

    std::size_t bg(std::size_t slot, std::size_t p) const { return slot * P_ + p; }
    std::size_t braw(std::size_t l, std::size_t slot, std::size_t p) const {
        return off_braw_ + (l * (C_ - 1) + slot) * P_ + p;
    }
    std::size_t tg(std::size_t q) const { return off_tg_ + q; }
    std::size_t traw(std::size_t l, std::size_t q) const { return off_traw_ + l * Q_ + q; }
    std::size_t lsb() const { return off_lsb_; }
    std::size_t lst() const { return off_lst_; }

    std::vector<std::string> names() const {
        std::vector<std::string> n(dim_);
        for (std::size_t s = 0; s < C_ - 1; ++s)
            for (std::size_t p = 0; p < P_; ++p)
                n[bg(s, p)] = "beta[" + std::to_string(component_of(s) + 1) + "," +
                              std::to_string(p + 1) + "]";
        for (std::size_t l = 0; l < L_; ++l)
            for (std::size_t s = 0; s < C_ - 1; ++s)
                for (std::size_t p = 0; p < P_; ++p)
                    n[braw(l, s, p)] = "beta_raw[" + std::to_string(l + 1) + "," +
                                       std::to_string(component_of(s) + 1) + "," +
                                       std::to_string(p + 1) + "]";
        for (std::size_t q = 0; q < Q_; ++q) n[tg(q)] = "theta[" + std::to_string(q + 1) + "]";
        for (std::size_t l = 0; l < L_; ++l)
            for (std::size_t q = 0; q < Q_; ++q)
                n[traw(l, q)] =
                    "theta_raw[" + std::to_string(l + 1) + "," + std::to_string(q + 1) + "]";
        n[lsb()] = "log_sigma_beta";
        n[lst()] = "log_sigma_theta";
        return n;
    }

private:
    std::size_t C_, P_, Q_, L_, ref_;
    std::size_t nb_, off_braw_, off_tg_, off_traw_, off_lsb_, off_lst_, dim_;
};

// Group-level actual coefficients reconstructed from the non-centered form.
struct GroupEffects {
    // beta[l][slot][p] with the reference row absent; theta[l][q]
    std::vector<std::vector<std::vector<double>>> beta;
    std::vector<std::vector<double>> theta;
    double sigma_beta = 0.0;
    double sigma_theta = 0.0;
};

inline GroupEffects group_effects(const ModelSpec& spec, const std::vector<double>& q) {
    const ParameterLayout lay(spec);
    GroupEffects e;
    e.sigma_beta = std::exp(q[lay.lsb()]);
    e.sigma_theta = std::exp(q[lay.lst()]);
    e.beta.assign(spec.L, std::vector<std::vector<double>>(spec.C - 1,
                                                           std::vector<double>(spec.P, 0.0)));
    e.theta.assign(spec.L, std::vector<double>(spec.Q, 0.0));
    for (std::size_t l = 0; l < spec.L; ++l) {
        for (std::size_t s = 0; s + 1 < spec.C; ++s)
            for (std::size_t p = 0; p < spec.P; ++p)
                e.beta[l][s][p] = q[lay.bg(s, p)] + e.sigma_beta * q[lay.braw(l, s, p)];
        for (std::size_t qq = 0; qq < spec.Q; ++qq)
            e.theta[l][qq] = q[lay.tg(qq)] + e.sigma_theta * q[lay.traw(l, qq)];
    }
    return e;
}

// Softmax mean link with the reference's linear predictor structurally zero.
inline Composition mean_link(const ModelSpec& spec, const std::vector<double>& q,
                             const std::vector<double>& x_row, std::size_t group) {
    if (x_row.size() != spec.P) throw std::invalid_argument("mean_link: x_row length != P");
    const GroupEffects e = group_effects(spec, q);
    std::vector<double> eta(spec.C, 0.0);
    for (std::size_t s = 0; s + 1 < spec.C; ++s) {
        const std::size_t c = s < spec.reference ? s : s + 1;
        double v = 0.0;
        for (std::size_t p = 0; p < spec.P; ++p) v += x_row[p] * e.beta[group][s][p];
        if (!std::isfinite(v)) throw std::runtime_error("mean_link: non-finite linear predictor");
        eta[c] = v;
    }
    double mx = eta[0];
    for (double v : eta) mx = std::max(mx, v);
    std::vector<double> mu(spec.C);
    double sum = 0.0;
    for (std::size_t c = 0; c < spec.C; ++c) {
        mu[c] = std::exp(eta[c] - mx);
        sum += mu[c];
    }
    for (double& m : mu) m /= sum;
    return Composition(std::move(mu), 1e-6);
}

inline double precision_link(const ModelSpec& spec, const std::vector<double>& q,
                             const std::vector<double>& z_row, std::size_t group) {
    if (z_row.size() != spec.Q) throw std::invalid_argument("precision_link: z_row length != Q");
    const GroupEffects e = group_effects(spec, q);
    double t = 0.0;
    for (std::size_t qq = 0; qq < spec.Q; ++qq) t += z_row[qq] * e.theta[group][qq];
    if (!std::isfinite(t) || std::abs(t) > 700.0)
        throw std::runtime_error("precision_link: |z'theta| overflow at group " +
                                 std::to_string(group + 1));
    return std::exp(t);
}

enum class GradientPath { Array, Vectorized };

// Joint log-posterior evaluator over a fixed dataset.  Immutable after
// construction; safe for concurrent evaluation from multiple chains.
class Model {
public:
    Model(ModelSpec spec, CoDaTable data) : spec_(spec), lay_(spec), data_(std::move(data)) {
        spec_.validate();
        data_.validate(spec_.C, spec_.P, spec_.Q, spec_.L);
        const std::size_t N = data_.n_obs();
        logy_.resize(N, spec_.C);
        X_.resize(N, spec_.P);
        Z_.resize(N, spec_.Q);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t c = 0; c < spec_.C; ++c) logy_(i, c) = std::log(data_.y[i][c]);
            for (std::size_t p = 0; p < spec_.P; ++p) X_(i, p) = data_.x[i][p];
            for (std::size_t qq = 0; qq < spec_.Q; ++qq) Z_(i, qq) = data_.z[i][qq];
        }
        rows_of_group_.assign(spec_.L, {});
        for (std::size_t i = 0; i < N; ++i) rows_of_group_[data_.group[i]].push_back(i);
    }

    const ModelSpec& spec() const { return spec_; }
    const CoDaTable& data() const { return data_; }
    const ParameterLayout& layout() const { return lay_; }
    std::size_t dim() const { return lay_.dim(); }
    std::vector<std::string> parameter_names() const { return lay_.names(); }

    double log_likelihood(const std::vector<double>& q) const {
        return eval(q, nullptr, GradientPath::Array, /*with_prior=*/false);
    }

    // per-observation log densities ln f(y_i | q); -inf where invalid
    std::vector<double> log_likelihood_by_obs(const std::vector<double>& q) const {
        const std::size_t C = spec_.C;
        const GroupEffects e = group_effects(spec_, q);
        std::vector<double> out(data_.n_obs(), -std::numeric_limits<double>::infinity());
        std::vector<double> eta(C), mu(C);
        for (std::size_t i = 0; i < data_.n_obs(); ++i) {
            const std::size_t l = data_.group[i];
            for (std::size_t s = 0; s + 1 < C; ++s) {
                double v = 0.0;
                for (std::size_t p = 0; p < spec_.P; ++p) v += X_(i, p) * e.beta[l][s][p];
                eta[lay_.component_of(s)] = v;
            }
            eta[spec_.reference] = 0.0;
            double t = 0.0;
            for (std::size_t qq = 0; qq < spec_.Q; ++qq) t += Z_(i, qq) * e.theta[l][qq];
            if (!std::isfinite(t) || std::abs(t) > kTGuard) continue;
            const double phi = std::exp(t);
            double mx = eta[0];
            for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, eta[c]);
            if (!std::isfinite(mx)) continue;
            double sum = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                mu[c] = std::exp(eta[c] - mx);
                sum += mu[c];
            }
            double term = log_gamma(phi);
            bool ok = true;
            for (std::size_t c = 0; c < C && ok; ++c) {
                const double a = mu[c] / sum * phi;
                ok = a > 0.0 && std::isfinite(a);
                if (ok) term += -log_gamma(a) + (a - 1.0) * logy_(i, c);
            }
            if (ok && std::isfinite(term)) out[i] = term;
        }
        return out;
    }

    double log_posterior(const std::vector<double>& q) const {
        return eval(q, nullptr, GradientPath::Array, true);
    }

    // Returns the log-posterior and fills `grad`.  Non-finite states yield
    // -inf with a zero gradient (the sampler treats them as divergent).
    double log_posterior_grad(const std::vector<double>& q, std::vector<double>& grad,
                              GradientPath path = GradientPath::Array) const {
        grad.assign(lay_.dim(), 0.0);
        return eval(q, &grad, path, true);
    }

private:
    static constexpr double kTGuard = 600.0;  // |z'theta| beyond this is treated as divergent

    double eval(const std::vector<double>& q, std::vector<double>* grad, GradientPath path,
                bool with_prior) const {
        const std::size_t C = spec_.C, P = spec_.P, Q = spec_.Q, L = spec_.L;
        const std::size_t S = C - 1;
        const double sb = std::exp(q[lay_.lsb()]);
        const double st = std::exp(q[lay_.lst()]);

        // per-group actual coefficients
        Eigen::MatrixXd B(P, S);          // column s = coefficients of slot s
        Eigen::VectorXd theta(Q);
        // per-group accumulators for the chain rule
        Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(P, S);
        Eigen::VectorXd gt = Eigen::VectorXd::Zero(Q);

        double ll = 0.0;
        bool ok = true;
        double g_lsb = 0.0, g_lst = 0.0;

        std::vector<double> eta(C), mu(C), G(C);
        for (std::size_t l = 0; l < L && ok; ++l) {
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t p = 0; p < P; ++p)
                    B(p, s) = q[lay_.bg(s, p)] + sb * q[lay_.braw(l, s, p)];
            for (std::size_t qq = 0; qq < Q; ++qq)
                theta(qq) = q[lay_.tg(qq)] + st * q[lay_.traw(l, qq)];
            gb.setZero();
            gt.setZero();
            const auto& rows = rows_of_group_[l];

            if (path == GradientPath::Vectorized) {
                // Block precomputation: one GEMM per group for all linear
                // predictors, then contiguous per-observation transforms.
                Eigen::MatrixXd eta_blk(rows.size(), S);
                Eigen::VectorXd t_blk(rows.size());
                {
                    Eigen::MatrixXd Xl(rows.size(), P), Zl(rows.size(), Q);
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        Xl.row(r) = X_.row(rows[r]);
                        Zl.row(r) = Z_.row(rows[r]);
                    }
                    eta_blk.noalias() = Xl * B;
                    t_blk.noalias() = Zl * theta;
                }
                for (std::size_t r = 0; r < rows.size() && ok; ++r) {
                    const std::size_t i = rows[r];
                    for (std::size_t s = 0; s < S; ++s) eta[lay_.component_of(s)] = eta_blk(r, s);
                    eta[spec_.reference] = 0.0;
                    ok = obs_term(i, t_blk(r), eta, mu, G, ll, grad, gb, gt);
                }
            } else {
                for (const std::size_t i : rows) {
                    double t = 0.0;
                    for (std::size_t qq = 0; qq < Q; ++qq) t += Z_(i, qq) * theta(qq);
                    for (std::size_t s = 0; s < S; ++s) {
                        double v = 0.0;
                        for (std::size_t p = 0; p < P; ++p) v += X_(i, p) * B(p, s);
                        eta[lay_.component_of(s)] = v;
                    }
                    eta[spec_.reference] = 0.0;
                    ok = obs_term(i, t, eta, mu, G, ll, grad, gb, gt);
                    if (!ok) break;
                }
            }
            if (!ok) break;

            if (grad) {
                for (std::size_t s = 0; s < S; ++s)
                    for (std::size_t p = 0; p < P; ++p) {
                        (*grad)[lay_.bg(s, p)] += gb(p, s);
                        (*grad)[lay_.braw(l, s, p)] += sb * gb(p, s);
                        g_lsb += sb * q[lay_.braw(l, s, p)] * gb(p, s);
                    }
                for (std::size_t qq = 0; qq < Q; ++qq) {
                    (*grad)[lay_.tg(qq)] += gt(qq);
                    (*grad)[lay_.traw(l, qq)] += st * gt(qq);
                    g_lst += st * q[lay_.traw(l, qq)] * gt(qq);
                }
            }
        }

        if (!ok || !std::isfinite(ll)) {
            if (grad) std::fill(grad->begin(), grad->end(), 0.0);
            return -std::numeric_limits<double>::infinity();
        }
        if (!with_prior) return ll;

        double lp = ll + log_prior(q, sb, st, grad, g_lsb, g_lst);
        if (!std::isfinite(lp)) {
            if (grad) std::fill(grad->begin(), grad->end(), 0.0);
            return -std::numeric_limits<double>::infinity();
        }
        return lp;
    }

    // One observation's log-likelihood term and (optionally) its gradient
    // contributions.  Returns false when the state is numerically invalid.
    bool obs_term(std::size_t i, double t, const std::vector<double>& eta, std::vector<double>& mu,
                  std::vector<double>& G, double& ll, std::vector<double>* grad,
                  Eigen::MatrixXd& gb, Eigen::VectorXd& gt) const {
        const std::size_t C = spec_.C, P = spec_.P, Q = spec_.Q, S = C - 1;
        if (!std::isfinite(t) || std::abs(t) > kTGuard) return false;
        const double phi = std::exp(t);

        double mx = eta[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, eta[c]);
        if (!std::isfinite(mx)) return false;
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            mu[c] = std::exp(eta[c] - mx);
            sum += mu[c];
        }
        double term = log_gamma(phi);
        for (std::size_t c = 0; c < C; ++c) {
            mu[c] /= sum;
            const double a = mu[c] * phi;
            // 1e-300 is the special-function domain floor; shapes below it
            // (softmax underflow during warmup excursions) are invalid states
            if (!(a >= 1e-300) || !std::isfinite(a)) return false;
            term += -log_gamma(a) + (a - 1.0) * logy_(i, c);
        }
        if (!std::isfinite(term)) return false;
        ll += term;

        if (grad) {
            double mg = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                G[c] = -digamma(mu[c] * phi) + logy_(i, c);
                mg += mu[c] * G[c];
            }
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t c = lay_.component_of(s);
                const double deta = phi * mu[c] * (G[c] - mg);
                for (std::size_t p = 0; p < P; ++p) gb(p, s) += X_(i, p) * deta;
            }
            const double dt = phi * (digamma(phi) + mg);
            for (std::size_t qq = 0; qq < Q; ++qq) gt(qq) += Z_(i, qq) * dt;
        }
        return true;
    }

    double log_prior(const std::vector<double>& q, double sb, double st,
                     std::vector<double>* grad, double g_lsb, double g_lst) const {
        constexpr double kLogSqrt2Pi = 0.91893853320467274178;
        const std::size_t S = spec_.C - 1, P = spec_.P, Q = spec_.Q, L = spec_.L;
        const double vb = spec_.prior_scale_beta * spec_.prior_scale_beta;
        const double vt = spec_.prior_scale_theta * spec_.prior_scale_theta;
        const double A2 = spec_.hyper_scale * spec_.hyper_scale;

        double lp = 0.0;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t p = 0; p < P; ++p) {
                const double b = q[lay_.bg(s, p)];
                lp += -0.5 * b * b / vb - std::log(spec_.prior_scale_beta) - kLogSqrt2Pi;
                if (grad) (*grad)[lay_.bg(s, p)] += -b / vb;
            }
        for (std::size_t qq = 0; qq < Q; ++qq) {
            const double v = q[lay_.tg(qq)];
            lp += -0.5 * v * v / vt - std::log(spec_.prior_scale_theta) - kLogSqrt2Pi;
            if (grad) (*grad)[lay_.tg(qq)] += -v / vt;
        }
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t p = 0; p < P; ++p) {
                    const double r = q[lay_.braw(l, s, p)];
                    lp += -0.5 * r * r - kLogSqrt2Pi;
                    if (grad) (*grad)[lay_.braw(l, s, p)] += -r;
                }
            for (std::size_t qq = 0; qq < Q; ++qq) {
                const double r = q[lay_.traw(l, qq)];
                lp += -0.5 * r * r - kLogSqrt2Pi;
                if (grad) (*grad)[lay_.traw(l, qq)] += -r;
            }
        }
        // half-Cauchy(0, A) on sigma = exp(u), plus the Jacobian term u:
        //   lp += ln(2/(pi A)) - ln(1 + (sigma/A)^2) + u
        //   d lp / du = 1 - 2 sigma^2 / (A^2 + sigma^2)
        const double kHC = std::log(2.0 / (M_PI * spec_.hyper_scale));
        lp += kHC - std::log1p(sb * sb / A2) + q[lay_.lsb()];
        lp += kHC - std::log1p(st * st / A2) + q[lay_.lst()];
        if (grad) {
            (*grad)[lay_.lsb()] += g_lsb + 1.0 - 2.0 * sb * sb / (A2 + sb * sb);
            (*grad)[lay_.lst()] += g_lst + 1.0 - 2.0 * st * st / (A2 + st * st);
        }
        return lp;
    }

    ModelSpec spec_;
    ParameterLayout lay_;
    CoDaTable data_;
    Eigen::MatrixXd logy_, X_, Z_;
    std::vector<std::vector<std::size_t>> rows_of_group_;
};

// Free-function forms of the likelihood/posterior ops (thin wrappers over a
// transient Model; prefer the class when evaluating repeatedly).
inline double log_likelihood(const ModelSpec& spec, const std::vector<double>& q,
                             const CoDaTable& data) {
    return Model(spec, data).log_likelihood(q);
}

inline double log_posterior(const ModelSpec& spec, const std::vector<double>& q,
                            const CoDaTable& data) {
    return Model(spec, data).log_posterior(q);
}

// Posterior-predictive sampling: one composition per (draw, new observation).
struct PredictiveDraws {
    // values[i][j] = composition drawn for observation i under posterior draw j
    std::vector<std::vector<std::vector<double>>> values;
    // summaries[i][c] = {q2.5, q5, mean, q95, q97.5}
    std::vector<std::vector<std::array<double, 5>>> summaries;
    // fitted point prediction: posterior mean of mu per observation
    std::vector<std::vector<double>> fitted_mean;
};

inline PredictiveDraws predict(const ModelSpec& spec,
                               const std::vector<std::vector<double>>& draws,
                               const std::vector<std::vector<double>>& new_x,
                               const std::vector<std::vector<double>>& new_z,
                               const std::vector<std::size_t>& groups, Rng& rng) {
    if (draws.empty()) throw std::invalid_argument("predict: no posterior draws");
    if (new_x.size() != new_z.size() || new_x.size() != groups.size())
        throw std::invalid_argument("predict: row counts disagree");
    const ParameterLayout lay(spec);
    const std::size_t N = new_x.size(), D = draws.size(), C = spec.C;

    PredictiveDraws out;
    out.values.assign(N, std::vector<std::vector<double>>(D));
    out.summaries.assign(N, std::vector<std::array<double, 5>>(C));
    out.fitted_mean.assign(N, std::vector<double>(C, 0.0));

    std::vector<double> alpha(C);
    for (std::size_t j = 0; j < D; ++j) {
        const GroupEffects e = group_effects(spec, draws[j]);
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t l = groups[i];
            if (l >= spec.L) throw std::invalid_argument("predict: group label out of range");
            std::vector<double> eta(C, 0.0);
            for (std::size_t s = 0; s + 1 < C; ++s) {
                const std::size_t c = s < spec.reference ? s : s + 1;
                double v = 0.0;
                for (std::size_t p = 0; p < spec.P; ++p) v += new_x[i][p] * e.beta[l][s][p];
                eta[c] = v;
            }
            double t = 0.0;
            for (std::size_t qq = 0; qq < spec.Q; ++qq) t += new_z[i][qq] * e.theta[l][qq];
            const double phi = std::exp(t);
            double mx = 0.0;
            for (double v : eta) mx = std::max(mx, v);
            double sum = 0.0;
            std::vector<double> mu(C);
            for (std::size_t c = 0; c < C; ++c) {
                mu[c] = std::exp(eta[c] - mx);
                sum += mu[c];
            }
            for (std::size_t c = 0; c < C; ++c) {
                mu[c] /= sum;
                alpha[c] = mu[c] * phi;
                out.fitted_mean[i][c] += mu[c];
            }
            out.values[i][j] = rng.dirichlet(alpha);
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) out.fitted_mean[i][c] /= static_cast<double>(D);

    std::vector<double> col(D);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t j = 0; j < D; ++j) col[j] = out.values[i][j][c];
            out.summaries[i][c] = {quantile_type7(col, 0.025), quantile_type7(col, 0.05),
                                   mean_of(col), quantile_type7(col, 0.95),
                                   quantile_type7(col, 0.975)};
        }
    return out;
}

}  // namespace codareg
