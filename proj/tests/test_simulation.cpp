#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "codareg/simulation.hpp"

using codareg::Rng;
using codareg::ScenarioKind;
using codareg::ScenarioSpec;

TEST_CASE("scenario spec validation", "[simulation]") {
    ScenarioSpec s;
    CHECK_NOTHROW(s.validate());
    s.replicates = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.replicates = 5;
    s.C = 1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.C = 7;
    s.N = 5;  // too few observations for a C=7 shape fit
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    ScenarioSpec r;
    r.kind = ScenarioKind::RegressionSim;
    r.phi = 0.0;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r.phi = 13.0;
    r.N = 1;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("entropy sweep peaks where shapes hit one", "[simulation]") {
    std::vector<double> grid;
    for (double phi = 0.5; phi <= 26.0 + 1e-12; phi += 0.25) grid.push_back(phi);
    const auto rows = codareg::run_entropy_sweep(3, 13, grid);
    REQUIRE(rows.size() == 11 * grid.size());

    for (std::size_t C = 3; C <= 13; ++C) {
        std::vector<const codareg::EntropyRow*> block;
        for (const auto& r : rows)
            if (r.C == C) block.push_back(&r);
        REQUIRE(block.size() == grid.size());

        // the flagged maximizer sits at phi == C (uniform Dirichlet), where
        // the entropy equals -ln Gamma(C)
        std::size_t max_idx = 0;
        std::size_t n_max = 0;
        for (std::size_t i = 0; i < block.size(); ++i)
            if (block[i]->is_max) {
                max_idx = i;
                ++n_max;
            }
        REQUIRE(n_max == 1);
        CHECK(block[max_idx]->phi == Catch::Approx(static_cast<double>(C)));
        CHECK(block[max_idx]->entropy ==
              Catch::Approx(-codareg::log_gamma(static_cast<double>(C))).margin(1e-10));

        // unimodal in phi: rising before the peak, falling after it
        for (std::size_t i = 0; i + 1 < block.size(); ++i) {
            if (i + 1 <= max_idx)
                CHECK(block[i + 1]->entropy > block[i]->entropy);
            else
                CHECK(block[i + 1]->entropy < block[i]->entropy);
        }
    }

    CHECK_THROWS_AS(codareg::run_entropy_sweep(3, 5, {}), std::invalid_argument);
    CHECK_THROWS_AS(codareg::run_entropy_sweep(1, 5, grid), std::invalid_argument);
    CHECK_THROWS_AS(codareg::run_entropy_sweep(5, 3, grid), std::invalid_argument);
    CHECK_THROWS_AS(codareg::run_entropy_sweep(3, 5, {1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("reference illustration selects the boosted component", "[simulation]") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::ReferenceIllustration;
    spec.C = 4;
    spec.N = 1500;
    spec.replicates = 3;
    Rng rng(4242);
    const codareg::IllustrationTable table = codareg::run_reference_illustration(spec, rng);
    REQUIRE(table.size() == 4);

    std::size_t hits = 0, total = 0;
    for (std::size_t s = 0; s < table.size(); ++s) {
        const auto& row = table[s];
        CHECK(row.boosted == s);
        CHECK(row.replicates_used == 3);
        CHECK(row.mle_failures == 0);
        REQUIRE(row.true_alpha.size() == 4);

        // boosted scenario shape dominates its peers by construction
        for (std::size_t c = 0; c < 4; ++c)
            if (c != s) CHECK(row.true_alpha[s] > row.true_alpha[c]);

        std::size_t count_sum = 0;
        for (std::size_t c = 0; c < 4; ++c) count_sum += row.selection_counts[c];
        CHECK(count_sum == row.replicates_used);
        CHECK(row.selected_boosted == row.selection_counts[s]);
        hits += row.selected_boosted;
        total += row.replicates_used;

        CHECK(row.avg_phi_hat > 0.0);
        CHECK(std::isfinite(row.avg_entropy));
    }
    CHECK(total == 12);
    CHECK(hits >= 10);
}

TEST_CASE("reference illustration honors supplied shapes", "[simulation]") {
    ScenarioSpec spec;
    spec.C = 3;
    spec.N = 2500;
    spec.replicates = 2;
    const std::vector<std::vector<double>> truths{
        {5.0, 1.4, 1.6}, {1.3, 4.5, 1.7}, {1.5, 1.2, 6.0}};
    Rng rng(17);
    const auto table = codareg::run_reference_illustration(spec, rng, &truths);
    REQUIRE(table.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(table[s].true_alpha == truths[s]);
        CHECK(table[s].selected_boosted == 2);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(table[s].avg_alpha_hat[c] == Catch::Approx(truths[s][c]).margin(0.35));
    }

    const std::vector<std::vector<double>> wrong_rows{{1.0, 1.0, 1.0}};
    Rng rng2(18);
    CHECK_THROWS_AS(codareg::run_reference_illustration(spec, rng2, &wrong_rows),
                    std::invalid_argument);
    const std::vector<std::vector<double>> wrong_len{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}};
    Rng rng3(19);
    CHECK_THROWS_AS(codareg::run_reference_illustration(spec, rng3, &wrong_len),
                    std::invalid_argument);
}

TEST_CASE("illustration runs are reproducible", "[simulation]") {
    ScenarioSpec spec;
    spec.C = 3;
    spec.N = 400;
    spec.replicates = 2;
    auto run = [&]() {
        Rng rng(777);
        return codareg::run_reference_illustration(spec, rng);
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a[s].true_alpha == b[s].true_alpha);
        CHECK(a[s].avg_alpha_hat == b[s].avg_alpha_hat);
        CHECK(a[s].avg_skewness == b[s].avg_skewness);
        CHECK(a[s].selection_counts == b[s].selection_counts);
        CHECK(a[s].avg_entropy == b[s].avg_entropy);
    }
}

TEST_CASE("regression truth table", "[simulation]") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::RegressionSim;
    spec.C = 3;
    spec.L = 6;
    spec.phi = 13.0;
    const codareg::RegressionTruth t = codareg::regression_truth(spec);
    REQUIRE(t.beta.size() == 6);
    REQUIRE(t.theta.size() == 6);
    for (std::size_t l = 0; l < 6; ++l) {
        const double dev = codareg::kGroupDeviations[l % 4];
        for (std::size_t s = 0; s < 2; ++s)
            CHECK(t.beta[l][s] == Catch::Approx(2.0 + static_cast<double>(s) + dev));
        CHECK(t.theta[l] == Catch::Approx(std::log(13.0) + dev));
    }
}

TEST_CASE("simulated tables match the generator moments", "[simulation]") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::RegressionSim;
    spec.C = 3;
    spec.L = 4;
    spec.N = 5000;
    spec.phi = 13.0;
    const codareg::RegressionTruth truth = codareg::regression_truth(spec);
    Rng rng(31);
    const codareg::CoDaTable table = codareg::simulate_regression_table(spec, truth, rng);
    REQUIRE(table.n_obs() == 4 * 5000);
    REQUIRE(table.group_names.size() == 4);
    CHECK(table.group_names[0] == "g1");
    CHECK_NOTHROW(table.validate(3, 1, 1, 4));

    for (std::size_t l = 0; l < 4; ++l) {
        // generator mean: softmax(beta_l0, beta_l1, 0)
        const std::vector<double> eta{truth.beta[l][0], truth.beta[l][1], 0.0};
        double sum = 0.0;
        std::vector<double> mu(3);
        for (std::size_t c = 0; c < 3; ++c) {
            mu[c] = std::exp(eta[c]);
            sum += mu[c];
        }
        for (double& m : mu) m /= sum;

        std::vector<double> avg(3, 0.0);
        std::size_t n = 0;
        for (std::size_t i = 0; i < table.n_obs(); ++i) {
            if (table.group[i] != l) continue;
            for (std::size_t c = 0; c < 3; ++c) avg[c] += table.y[i][c];
            ++n;
        }
        REQUIRE(n == 5000);
        const double phi_l = std::exp(truth.theta[l]);
        for (std::size_t c = 0; c < 3; ++c) {
            avg[c] /= static_cast<double>(n);
            const double se =
                std::sqrt(mu[c] * (1.0 - mu[c]) / (phi_l + 1.0) / static_cast<double>(n));
            CHECK(std::abs(avg[c] - mu[c]) <= 4.0 * se);
        }
    }
}

TEST_CASE("regression study smoke run", "[simulation][slow]") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::RegressionSim;
    spec.C = 3;
    spec.L = 2;
    spec.N = 150;
    spec.phi = 13.0;
    spec.replicates = 2;

    codareg::SamplerConfig profile;
    profile.chains = 2;
    profile.warmup = 300;
    profile.samples = 150;

    Rng rng(2026);
    const codareg::RegressionCellResult cell = codareg::run_regression_sim(spec, rng, profile);
    CHECK(cell.phi == Catch::Approx(13.0));
    CHECK(cell.N == 150);
    CHECK(cell.replicates_used == 2);
    CHECK(cell.failures == 0);
    REQUIRE(cell.adist_by_rep.size() == 2);
    REQUIRE(cell.kl_by_rep.size() == 2);
    REQUIRE(cell.coverage_by_rep.size() == 2);
    REQUIRE(cell.rmse_by_rep.size() == 2);
    CHECK(cell.adist_mean ==
          Catch::Approx(0.5 * (cell.adist_by_rep[0] + cell.adist_by_rep[1])).margin(1e-12));
    CHECK(cell.adist_mean > 0.0);
    CHECK(cell.kl_mean > 0.0);
    CHECK(cell.coverage_pred > 0.7);
    CHECK(cell.coverage_pred <= 1.0);
    CHECK(cell.param_rmse > 0.0);
    CHECK(cell.param_rmse < 0.5);
    CHECK(cell.param_coverage_pooled >= 0.5);
    CHECK(cell.divergence_rate <= 0.05);

    // identical seeds reproduce the cell bit for bit
    Rng rng2(2026);
    const codareg::RegressionCellResult again = codareg::run_regression_sim(spec, rng2, profile);
    CHECK(again.adist_mean == cell.adist_mean);
    CHECK(again.kl_mean == cell.kl_mean);
    CHECK(again.rmse_by_rep == cell.rmse_by_rep);

    ScenarioSpec wrong = spec;
    wrong.kind = ScenarioKind::ReferenceIllustration;
    Rng rng3(1);
    CHECK_THROWS_AS(codareg::run_regression_sim(wrong, rng3, profile), std::invalid_argument);
}

TEST_CASE("csv writers emit plot-ready tables", "[simulation]") {
    std::vector<double> grid{1.0, 2.0, 3.0, 4.0};
    const auto rows = codareg::run_entropy_sweep(3, 3, grid);
    const std::string path = "entropy_sweep_test.csv";
    codareg::write_entropy_csv(path, rows);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "C,phi,entropy,is_max");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++lines;
    CHECK(lines == rows.size());
    in.close();
    std::remove(path.c_str());
}
