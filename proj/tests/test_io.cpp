#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "codareg/io.hpp"

using codareg::IngestConfig;
using codareg::IngestError;
using codareg::PosteriorDraws;

namespace {

struct TempFile {
    std::string path;
    TempFile(const std::string& name, const std::string& content) : path(name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

PosteriorDraws tiny_draws() {
    PosteriorDraws d;
    d.names = {"a", "b"};
    d.values = {
        {{1.0 / 3.0, 0.1 + 0.2}, {3.141592653589793, -5.5}},
        {{1e300, 4.25e-300}, {-0.0, 123456.789012345678}},
    };
    for (int k = 0; k < 2; ++k) {
        d.accept_stats.emplace_back(2, 0.9);
        d.step_size.emplace_back(2, 0.05);
        d.divergent.push_back({0, 1});
        d.log_density.emplace_back(2, -3.5);
    }
    return d;
}

}  // namespace

TEST_CASE("csv reading", "[io]") {
    TempFile f("tmp_io_basic.csv", "a, b ,c\n1,2,3\n 4 ,5,6\n\n");
    const codareg::CsvTable t = codareg::read_csv(f.path);
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == "4");  // whitespace trimmed
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("zz"), IngestError);

    TempFile bad("tmp_io_bad.csv", "a,b\n1,2,3\n");
    CHECK_THROWS_WITH(codareg::read_csv(bad.path),
                      Catch::Matchers::ContainsSubstring("row 2"));
    TempFile empty("tmp_io_empty.csv", "");
    CHECK_THROWS_AS(codareg::read_csv(empty.path), IngestError);
    CHECK_THROWS_AS(codareg::read_csv("tmp_io_does_not_exist.csv"), IngestError);
}

TEST_CASE("ingestion happy path", "[io]") {
    TempFile f("tmp_io_ingest.csv",
               "s1,s2,s3,x1,z1,site\n"
               "0.2,0.3,0.5,1.5,0.2,north\n"
               "0.5,0.2500001,0.25,-0.5,0.1,south\n"
               "0.1,0.6,0.3,0.0,0.0,north\n");
    IngestConfig cfg;
    cfg.components = {"s1", "s2", "s3"};
    cfg.covariates = {"x1"};
    cfg.precision_covariates = {"z1"};
    cfg.group = "site";
    const codareg::CoDaTable t = codareg::ingest_csv(f.path, cfg);
    REQUIRE(t.n_obs() == 3);
    CHECK_NOTHROW(t.validate(3, 2, 2, 2));

    // intercept prepended to both designs
    CHECK(t.x[0] == std::vector<double>{1.0, 1.5});
    CHECK(t.z[1] == std::vector<double>{1.0, 0.1});

    // rows renormalized to exact closure
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) sum += t.y[1][c];
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    CHECK(t.y[0][2] == Catch::Approx(0.5).margin(1e-9));

    // group labels indexed in order of first appearance
    REQUIRE(t.group_names == std::vector<std::string>{"north", "south"});
    CHECK(t.group == std::vector<std::size_t>{0, 1, 0});
}

TEST_CASE("ingestion without a group column", "[io]") {
    TempFile f("tmp_io_nogroup.csv", "s1,s2\n0.4,0.6\n0.7,0.3\n");
    IngestConfig cfg;
    cfg.components = {"s1", "s2"};
    const codareg::CoDaTable t = codareg::ingest_csv(f.path, cfg);
    CHECK(t.group_names == std::vector<std::string>{"all"});
    CHECK(t.group == std::vector<std::size_t>{0, 0});
    CHECK(t.x[0] == std::vector<double>{1.0});
    CHECK(t.z[0] == std::vector<double>{1.0});
}

TEST_CASE("ingestion zero handling", "[io]") {
    const std::string body = "s1,s2,s3\n0.0,0.4,0.6\n0.2,0.3,0.5\n";
    IngestConfig cfg;
    cfg.components = {"s1", "s2", "s3"};

    TempFile f1("tmp_io_zero1.csv", body);
    CHECK_THROWS_WITH(codareg::ingest_csv(f1.path, cfg),
                      Catch::Matchers::ContainsSubstring("row 2") &&
                          Catch::Matchers::ContainsSubstring("s1"));

    cfg.adjust_zeros = true;
    TempFile f2("tmp_io_zero2.csv", body);
    const codareg::CoDaTable t = codareg::ingest_csv(f2.path, cfg);
    // multiplicative adjustment with n = 2 rows: (y*(n-1) + 1/C) / n
    CHECK(t.y[0][0] == Catch::Approx((0.0 * 1.0 + 1.0 / 3.0) / 2.0).margin(1e-12));
    CHECK(t.y[0][1] == Catch::Approx((0.4 * 1.0 + 1.0 / 3.0) / 2.0).margin(1e-12));
    // untouched rows stay put
    CHECK(t.y[1][1] == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("ingestion rejects malformed tables", "[io]") {
    IngestConfig cfg;
    cfg.components = {"s1", "s2"};

    TempFile neg("tmp_io_neg.csv", "s1,s2\n-0.1,1.1\n");
    CHECK_THROWS_WITH(codareg::ingest_csv(neg.path, cfg),
                      Catch::Matchers::ContainsSubstring("negative"));

    TempFile sum("tmp_io_sum.csv", "s1,s2\n0.4,0.7\n");
    CHECK_THROWS_WITH(codareg::ingest_csv(sum.path, cfg),
                      Catch::Matchers::ContainsSubstring("sums to"));

    IngestConfig loose = cfg;
    loose.row_sum_tolerance = 0.2;
    TempFile sum2("tmp_io_sum2.csv", "s1,s2\n0.4,0.7\n");
    CHECK_NOTHROW(codareg::ingest_csv(sum2.path, loose));

    TempFile text("tmp_io_text.csv", "s1,s2,x1\n0.4,0.6,hello\n");
    IngestConfig with_x = cfg;
    with_x.covariates = {"x1"};
    CHECK_THROWS_WITH(codareg::ingest_csv(text.path, with_x),
                      Catch::Matchers::ContainsSubstring("hello"));

    TempFile ok("tmp_io_ok.csv", "s1,s2\n0.4,0.6\n");
    IngestConfig missing = cfg;
    missing.components = {"s1", "nope"};
    CHECK_THROWS_WITH(codareg::ingest_csv(ok.path, missing),
                      Catch::Matchers::ContainsSubstring("nope"));

    IngestConfig one;
    one.components = {"s1"};
    CHECK_THROWS_AS(codareg::ingest_csv(ok.path, one), IngestError);

    TempFile norow("tmp_io_norow.csv", "s1,s2\n");
    CHECK_THROWS_AS(codareg::ingest_csv(norow.path, cfg), IngestError);
}

TEST_CASE("draw storage round trip preserves every bit", "[io]") {
    const PosteriorDraws d = tiny_draws();
    const std::string path = "tmp_io_draws.csv";
    codareg::write_draws_csv(path, d);
    const PosteriorDraws r = codareg::read_draws_csv(path);
    REQUIRE(r.names == d.names);
    REQUIRE(r.n_chains() == 2);
    REQUIRE(r.n_samples() == 2);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(r.values[k][m][j] == d.values[k][m][j]);

    // header sanity
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "chain,iter,a,b");
    in.close();
    std::remove(path.c_str());

    // comma-bearing parameter names are quoted on disk and recovered verbatim
    PosteriorDraws named = tiny_draws();
    named.names = {"beta[1,2]", "log_sigma_beta"};
    codareg::write_draws_csv(path, named);
    std::ifstream in2(path);
    std::getline(in2, header);
    in2.close();
    CHECK(header == "chain,iter,\"beta[1,2]\",log_sigma_beta");
    CHECK(codareg::read_draws_csv(path).names == named.names);
    std::remove(path.c_str());

    TempFile notdraws("tmp_io_notdraws.csv", "x,y\n1,2\n");
    CHECK_THROWS_AS(codareg::read_draws_csv(notdraws.path), IngestError);
    TempFile zero("tmp_io_zero_chain.csv", "chain,iter,a\n0,1,0.5\n");
    CHECK_THROWS_AS(codareg::read_draws_csv(zero.path), IngestError);
    TempFile ragged("tmp_io_ragged.csv", "chain,iter,a\n1,1,0.5\n1,2,0.6\n2,1,0.7\n");
    CHECK_THROWS_AS(codareg::read_draws_csv(ragged.path), IngestError);
}

TEST_CASE("sampler stats sidecar", "[io]") {
    const nlohmann::json j = codareg::sampler_stats_json(tiny_draws());
    CHECK(j["chains"] == 2);
    CHECK(j["samples_per_chain"] == 2);
    CHECK(j["total_divergences"] == 2);
    CHECK(j["divergence_rate"].get<double>() == Catch::Approx(0.5));
    REQUIRE(j["chain_stats"].size() == 2);
    CHECK(j["chain_stats"][0]["divergent"] == nlohmann::json({0, 1}));
    CHECK(j["chain_stats"][1]["step_size"][0].get<double>() == Catch::Approx(0.05));
}

TEST_CASE("fnv1a digests", "[io]") {
    // published 64-bit FNV-1a reference values
    CHECK(codareg::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(codareg::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(codareg::fnv1a_hex("foobar") == "85944171f73967e8");

    TempFile f("tmp_io_digest.txt", "foobar");
    CHECK(codareg::digest_file(f.path) == "85944171f73967e8");
    TempFile g("tmp_io_digest2.txt", "foobaz");
    CHECK(codareg::digest_file(g.path) != codareg::digest_file(f.path));
    CHECK_THROWS_AS(codareg::digest_file("tmp_io_missing.bin"), IngestError);
}

TEST_CASE("timestamps honor SOURCE_DATE_EPOCH", "[io]") {
    setenv("SOURCE_DATE_EPOCH", "0", 1);
    CHECK(codareg::timestamp_utc() == "1970-01-01T00:00:00Z");
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    CHECK(codareg::timestamp_utc() == "2023-11-14T22:13:20Z");
    unsetenv("SOURCE_DATE_EPOCH");
    const std::string now = codareg::timestamp_utc();
    REQUIRE(now.size() == 20);
    CHECK(now[10] == 'T');
    CHECK(now.back() == 'Z');
}

TEST_CASE("run manifest serialization", "[io]") {
    codareg::RunManifest m;
    m.command = "fit";
    m.configuration["chains"] = "4";
    m.seed = 99;
    m.input_digests["data.csv"] = "cbf29ce484222325";
    m.created_utc = "1970-01-01T00:00:00Z";
    const nlohmann::json j = m.to_json();
    CHECK(j["command"] == "fit");
    CHECK(j["configuration"]["chains"] == "4");
    CHECK(j["seed"] == 99);
    CHECK(j["input_digests"]["data.csv"] == "cbf29ce484222325");
    CHECK(j["version"] == codareg::kVersion);

    const std::string path = "tmp_io_manifest.json";
    codareg::write_json(path, j);
    const nlohmann::json r = codareg::read_json(path);
    CHECK(r == j);
    std::remove(path.c_str());
    CHECK_THROWS_AS(codareg::read_json("tmp_io_missing.json"), IngestError);
}

TEST_CASE("key=value configuration files", "[io]") {
    TempFile f("tmp_io_cfg.conf",
               "# run settings\n"
               "components = s1, s2 , s3\n"
               "chains=4\n"
               "  target_accept =  0.9   # inline comment\n"
               "\n"
               "group =\n");
    const codareg::KeyValueConfig cfg = codareg::parse_config_file(f.path);
    CHECK(cfg.at("chains") == "4");
    CHECK(cfg.at("target_accept") == "0.9");
    CHECK(cfg.at("group") == "");
    CHECK(codareg::config_list(cfg, "components") ==
          std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(codareg::config_list(cfg, "group").empty());
    CHECK(codareg::config_list(cfg, "absent").empty());

    TempFile bad("tmp_io_cfg_bad.conf", "chains = 4\njust some words\n");
    CHECK_THROWS_WITH(codareg::parse_config_file(bad.path),
                      Catch::Matchers::ContainsSubstring("line 2"));
    TempFile nokey("tmp_io_cfg_nokey.conf", "= 4\n");
    CHECK_THROWS_AS(codareg::parse_config_file(nokey.path), IngestError);
    CHECK_THROWS_AS(codareg::parse_config_file("tmp_io_cfg_missing.conf"), IngestError);
}

TEST_CASE("fit report serialization", "[io]") {
    codareg::FitReport rep;
    rep.aitchison_mean = 1.25;
    rep.kl_mean = 0.07;
    rep.coverage_95 = 0.96;
    rep.coverage_by_component = {0.95, 0.97};
    rep.rmse_percent = 12.5;
    rep.dic = -100.0;
    rep.p_d = 8.0;
    rep.waic = -99.0;
    rep.p_waic = 7.5;
    rep.lppd = 57.0;
    rep.elppd = 49.5;
    const nlohmann::json j = codareg::fit_report_json(rep);
    CHECK(j["aitchison_mean"].get<double>() == Catch::Approx(1.25));
    CHECK(j["coverage_by_component"].size() == 2);
    CHECK(j["waic"].get<double>() == Catch::Approx(-99.0));
    CHECK(j["p_d"].get<double>() == Catch::Approx(8.0));
}

TEST_CASE("draw summaries and the text report", "[io]") {
    codareg::Rng rng(123);
    PosteriorDraws d;
    d.names = {"alpha", "beta"};
    for (int k = 0; k < 2; ++k) {
        std::vector<std::vector<double>> rows;
        for (int m = 0; m < 400; ++m) rows.push_back({rng.normal(), 5.0 + 2.0 * rng.normal()});
        d.values.push_back(std::move(rows));
        d.accept_stats.emplace_back(400, 0.9);
        d.step_size.emplace_back(400, 0.1);
        d.divergent.emplace_back(400, 0);
        d.log_density.emplace_back(400, -1.0);
    }
    const auto sums = codareg::summarize_draws(d);
    REQUIRE(sums.size() == 2);
    CHECK(sums[0].name == "alpha");
    CHECK(sums[0].mean == Catch::Approx(0.0).margin(0.15));
    CHECK(sums[0].sd == Catch::Approx(1.0).margin(0.15));
    CHECK(sums[1].mean == Catch::Approx(5.0).margin(0.3));
    CHECK(sums[1].q50 == Catch::Approx(5.0).margin(0.3));
    CHECK(sums[1].q025 < sums[1].q50);
    CHECK(sums[1].q50 < sums[1].q975);
    CHECK(sums[0].rhat == Catch::Approx(1.0).margin(0.02));
    CHECK(sums[0].ess > 100.0);

    const std::string path = "tmp_io_summary.txt";
    codareg::write_summary_text(path, d, sums);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line.find("parameter") == 0);
    CHECK(line.find("rhat") != std::string::npos);
    std::size_t lines = 1;
    while (std::getline(in, line)) ++lines;
    CHECK(lines >= 4);  // header + two parameters + footer
    in.close();
    std::remove(path.c_str());

    // single-chain draws still summarize, with diagnostics marked unavailable
    PosteriorDraws solo;
    solo.names = {"x"};
    solo.values.push_back({{1.0}, {2.0}, {3.0}, {4.0}});
    solo.accept_stats.emplace_back(4, 1.0);
    solo.step_size.emplace_back(4, 0.1);
    solo.divergent.emplace_back(4, 0);
    solo.log_density.emplace_back(4, 0.0);
    const auto ssum = codareg::summarize_draws(solo);
    REQUIRE(ssum.size() == 1);
    CHECK(std::isnan(ssum[0].rhat));
    CHECK(std::isnan(ssum[0].ess));
    CHECK(ssum[0].mean == Catch::Approx(2.5));
}
