#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "codareg/dirichlet.hpp"
#include "codareg/reference.hpp"
#include "codareg/rng.hpp"

using codareg::Composition;
using codareg::DirichletParams;
using codareg::Rng;

namespace {

double loglik(const std::vector<double>& alpha, const std::vector<Composition>& data) {
    const DirichletParams p(alpha);
    double ll = 0.0;
    for (const auto& y : data) ll += codareg::log_density(p, y);
    return ll;
}

}  // namespace

TEST_CASE("MLE recovers generating shapes", "[reference]") {
    Rng rng(314);
    const std::vector<double> truth{4.59, 1.88, 1.87, 1.13, 1.26, 1.36, 1.65};
    const auto data = codareg::sample(DirichletParams(truth), 5000, rng);
    const DirichletParams fitted = codareg::fit_dirichlet_mle(data);
    for (std::size_t c = 0; c < truth.size(); ++c)
        CHECK(fitted.alpha()[c] == Catch::Approx(truth[c]).margin(0.15));
}

TEST_CASE("MLE on the uniform simplex", "[reference]") {
    Rng rng(2718);
    const auto data = codareg::sample(DirichletParams({1.0, 1.0}), 5000, rng);
    const DirichletParams fitted = codareg::fit_dirichlet_mle(data);
    CHECK(fitted.alpha()[0] == Catch::Approx(1.0).margin(0.06));
    CHECK(fitted.alpha()[1] == Catch::Approx(1.0).margin(0.06));
}

TEST_CASE("MLE dominates the truth and the initializer on the realized sample", "[reference]") {
    Rng rng(163);
    const std::vector<double> truth{2, 3, 5};
    const auto data = codareg::sample(DirichletParams(truth), 200, rng);
    const DirichletParams fitted = codareg::fit_dirichlet_mle(data);
    const std::vector<double> mom = codareg::method_of_moments(data);
    CHECK(loglik(fitted.alpha(), data) >= loglik(truth, data) - 1e-9);
    CHECK(loglik(fitted.alpha(), data) >= loglik(mom, data) - 1e-9);
}

TEST_CASE("MLE gradient norm at the optimum", "[reference]") {
    Rng rng(55);
    const auto data = codareg::sample(DirichletParams({1.5, 2.5, 4.0}), 800, rng);
    const DirichletParams fitted = codareg::fit_dirichlet_mle(data);
    // gradient of the mean log-likelihood: psi(phi) - psi(alpha_c) + mean ln y_c
    const std::size_t C = 3;
    std::vector<double> mean_log(C, 0.0);
    for (const auto& y : data)
        for (std::size_t c = 0; c < C; ++c) mean_log[c] += std::log(y[c]);
    for (auto& v : mean_log) v /= static_cast<double>(data.size());
    const double dphi = codareg::digamma(fitted.phi());
    for (std::size_t c = 0; c < C; ++c) {
        const double g = dphi - codareg::digamma(fitted.alpha()[c]) + mean_log[c];
        CHECK(std::abs(g) <= 1e-8);
    }
}

TEST_CASE("MLE is scale-consistent under duplication", "[reference]") {
    Rng rng(77);
    auto data = codareg::sample(DirichletParams({2.0, 1.3, 3.1}), 400, rng);
    const DirichletParams once = codareg::fit_dirichlet_mle(data);
    auto doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    const DirichletParams twice = codareg::fit_dirichlet_mle(doubled);
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(std::abs(once.alpha()[c] - twice.alpha()[c]) < 1e-6);
}

TEST_CASE("MLE preconditions", "[reference]") {
    Rng rng(12);
    const auto tiny = codareg::sample(DirichletParams({1, 1, 1}), 3, rng);  // < C+1 rows
    CHECK_THROWS_AS(codareg::fit_dirichlet_mle(tiny), std::invalid_argument);
}

TEST_CASE("shape metrics exact arithmetic", "[reference]") {
    const auto r = codareg::shape_metrics(DirichletParams({4.59, 5.27, 4.0}));
    CHECK(r.skewness[0] == Catch::Approx(0.9335).margin(5e-5));
    CHECK(r.kurtosis[0] == Catch::Approx(4.3072).margin(5e-5));
    CHECK(r.skewness[1] == Catch::Approx(0.8712).margin(5e-5));
    CHECK(r.kurtosis[1] == Catch::Approx(4.13852).margin(5e-5));
    CHECK(r.skewness[2] == Catch::Approx(1.0).margin(1e-15));
    CHECK(r.kurtosis[2] == Catch::Approx(4.5).margin(1e-15));
    CHECK(r.phi_hat == Catch::Approx(4.59 + 5.27 + 4.0).margin(1e-12));
}

TEST_CASE("shape metrics are monotone in alpha", "[reference]") {
    const auto r = codareg::shape_metrics(DirichletParams({0.5, 1.0, 2.0, 4.0, 8.0}));
    for (std::size_t c = 1; c < 5; ++c) {
        CHECK(r.skewness[c] < r.skewness[c - 1]);
        CHECK(r.kurtosis[c] < r.kurtosis[c - 1]);
    }
}

TEST_CASE("reference selection argmax and tie handling", "[reference]") {
    {
        // benchmark scenario row with the boost on component 3
        const auto r =
            codareg::shape_metrics(DirichletParams({1.55, 1.44, 4.17, 1.81, 1.72, 1.32, 1.71}));
        const auto sel = codareg::select_reference(r);
        CHECK(sel.index == 2);
        CHECK_FALSE(sel.tie);
    }
    {
        const auto r = codareg::shape_metrics(DirichletParams({2.0, 2.0, 2.0}));
        const auto sel = codareg::select_reference(r);
        CHECK(sel.index == 0);
        CHECK(sel.tie);
    }
    // argmax alpha == argmin skew == argmin kurt
    const auto r = codareg::shape_metrics(DirichletParams({1.2, 3.7, 0.9, 2.2}));
    const auto sel = codareg::select_reference(r);
    std::size_t amin_skew = 0, amin_kurt = 0;
    for (std::size_t c = 1; c < 4; ++c) {
        if (r.skewness[c] < r.skewness[amin_skew]) amin_skew = c;
        if (r.kurtosis[c] < r.kurtosis[amin_kurt]) amin_kurt = c;
    }
    CHECK(sel.index == amin_skew);
    CHECK(sel.index == amin_kurt);
}

TEST_CASE("boosted-component protocol selects the boost", "[reference]") {
    Rng rng(9001);
    const std::size_t boosted = 4;
    std::size_t hits = 0;
    const std::size_t reps = 25;
    for (std::size_t r = 0; r < reps; ++r) {
        std::vector<double> alpha(7);
        for (auto& a : alpha) a = 1.1 + 0.8 * rng.uniform01();
        alpha[boosted] += 4.0 + rng.normal();
        const auto data = codareg::sample(DirichletParams(alpha), 2000, rng);
        const auto rep = codareg::analyze_reference(data);
        if (rep.reference == boosted) ++hits;
    }
    CHECK(hits >= 24);  // >= 95%
}
