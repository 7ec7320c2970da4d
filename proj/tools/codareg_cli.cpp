// codareg: Bayesian Dirichlet regression for compositional data.
//
// Subcommands: select-reference, fit, predict, diagnose, simulate.
// Exit codes: 0 success; 1 usage; 2 ingestion/validation failure;
// 3 sampler/estimation failure; 4 convergence failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codareg/io.hpp"
#include "codareg/metrics.hpp"
#include "codareg/model.hpp"
#include "codareg/nuts.hpp"
#include "codareg/reference.hpp"
#include "codareg/simulation.hpp"
#include "codareg/version.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIngest = 2;
constexpr int kExitSampler = 3;
constexpr int kExitConvergence = 4;

struct GlobalArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::size_t threads = 1;
    bool dry_run = false;
};

void add_global_flags(CLI::App* cmd, GlobalArgs& g) {
    cmd->add_option("--config", g.config_path, "key = value run configuration file");
    cmd->add_option("--seed", g.seed, "random seed (overrides the config file)")
        ->each([&g](const std::string&) { g.seed_given = true; });
    cmd->add_option("--out", g.out_dir, "output directory (created if missing)");
    cmd->add_option("--threads", g.threads, "worker threads for chains")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--dry-run", g.dry_run, "validate inputs and print the resolved configuration");
}

std::string cfg_get(const codareg::KeyValueConfig& cfg, const std::string& key,
                    const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

double cfg_real(const codareg::KeyValueConfig& cfg, const std::string& key, double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw codareg::IngestError("config key '" + key + "': cannot parse '" + it->second +
                                   "' as a number");
    }
}

std::uint64_t cfg_count(const codareg::KeyValueConfig& cfg, const std::string& key,
                        std::uint64_t fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        const long long v = std::stoll(it->second);
        if (v < 0) throw std::invalid_argument(it->second);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw codareg::IngestError("config key '" + key + "': cannot parse '" + it->second +
                                   "' as a count");
    }
}

bool cfg_bool(const codareg::KeyValueConfig& cfg, const std::string& key, bool fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw codareg::IngestError("config key '" + key + "': expected true/false, got '" +
                               it->second + "'");
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw codareg::IngestError("--out directory is required");
    std::filesystem::create_directories(dir);
}

void print_resolved(const std::map<std::string, std::string>& resolved) {
    std::printf("resolved configuration:\n");
    for (const auto& [k, v] : resolved) std::printf("  %s = %s\n", k.c_str(), v.c_str());
}

codareg::RunManifest make_manifest(const std::string& command,
                                   const std::map<std::string, std::string>& resolved,
                                   std::uint64_t seed,
                                   const std::vector<std::string>& input_files) {
    codareg::RunManifest man;
    man.command = command;
    man.configuration = resolved;
    man.seed = seed;
    for (const auto& f : input_files)
        if (!f.empty()) man.input_digests[f] = codareg::digest_file(f);
    man.created_utc = codareg::timestamp_utc();
    return man;
}

// Shared ingestion setup for select-reference and fit.
struct ResolvedData {
    codareg::IngestConfig ingest;
    codareg::CoDaTable table;
    std::map<std::string, std::string> resolved;
};

ResolvedData load_data(const GlobalArgs& g, const codareg::KeyValueConfig& cfg) {
    ResolvedData r;
    const std::string data = g.data_path.empty() ? cfg_get(cfg, "data", "") : g.data_path;
    if (data.empty()) throw codareg::IngestError("no data file: pass --data or config key 'data'");
    r.ingest.components = codareg::config_list(cfg, "components");
    if (r.ingest.components.empty())
        throw codareg::IngestError("config key 'components' (comma-separated columns) is required");
    r.ingest.covariates = codareg::config_list(cfg, "covariates");
    r.ingest.precision_covariates = codareg::config_list(cfg, "precision_covariates");
    r.ingest.group = cfg_get(cfg, "group", "");
    r.ingest.adjust_zeros = cfg_bool(cfg, "adjust_zeros", false);
    r.table = codareg::ingest_csv(data, r.ingest);

    r.resolved["data"] = data;
    r.resolved["components"] = join(r.ingest.components);
    r.resolved["covariates"] = join(r.ingest.covariates);
    r.resolved["precision_covariates"] = join(r.ingest.precision_covariates);
    r.resolved["group"] = r.ingest.group.empty() ? "(single group)" : r.ingest.group;
    r.resolved["group_names"] = join(r.table.group_names);
    r.resolved["adjust_zeros"] = r.ingest.adjust_zeros ? "true" : "false";
    r.resolved["rows"] = std::to_string(r.table.n_obs());
    return r;
}

// ---------------------------------------------------------------- select-reference

int run_select_reference(const GlobalArgs& g) {
    const codareg::KeyValueConfig cfg =
        g.config_path.empty() ? codareg::KeyValueConfig{} : codareg::parse_config_file(g.config_path);
    ResolvedData data = load_data(g, cfg);
    if (g.dry_run) {
        print_resolved(data.resolved);
        return 0;
    }
    const codareg::ShapeReport rep = codareg::analyze_reference(data.table.y);

    nlohmann::json j;
    j["selected_component"] = rep.reference + 1;
    j["selected_column"] = data.ingest.components[rep.reference];
    j["tie_warning"] = rep.tie_warning;
    j["alpha_hat"] = rep.alpha_hat;
    j["skewness"] = rep.skewness;
    j["kurtosis"] = rep.kurtosis;
    j["phi_hat"] = rep.phi_hat;
    j["entropy_hat"] = rep.entropy_hat;

    std::printf("selected reference: component %zu ('%s')%s\n", rep.reference + 1,
                data.ingest.components[rep.reference].c_str(),
                rep.tie_warning ? "  [tie broken toward the lowest index]" : "");
    std::printf("%-12s %12s %12s %12s\n", "component", "alpha_hat", "skewness", "kurtosis");
    for (std::size_t c = 0; c < rep.alpha_hat.size(); ++c)
        std::printf("%-12s %12.4f %12.4f %12.4f\n", data.ingest.components[c].c_str(),
                    rep.alpha_hat[c], rep.skewness[c], rep.kurtosis[c]);
    std::printf("phi_hat = %.4f   entropy_hat = %.4f\n", rep.phi_hat, rep.entropy_hat);

    if (!g.out_dir.empty()) {
        ensure_out_dir(g.out_dir);
        codareg::write_json(g.out_dir + "/selection.json", j);
        auto man = make_manifest("select-reference", data.resolved, g.seed,
                                 {data.resolved["data"], g.config_path});
        codareg::write_json(g.out_dir + "/manifest.json", man.to_json());
    }
    return 0;
}

// ---------------------------------------------------------------- fit

int run_fit(const GlobalArgs& g) {
    const codareg::KeyValueConfig cfg =
        g.config_path.empty() ? codareg::KeyValueConfig{} : codareg::parse_config_file(g.config_path);
    ResolvedData data = load_data(g, cfg);
    const codareg::CoDaTable& table = data.table;

    codareg::ModelSpec mspec;
    mspec.C = data.ingest.components.size();
    mspec.P = 1 + data.ingest.covariates.size();
    mspec.Q = 1 + data.ingest.precision_covariates.size();
    mspec.L = table.group_names.size();
    mspec.prior_scale_beta = cfg_real(cfg, "prior_scale_beta", 5.0);
    mspec.prior_scale_theta = cfg_real(cfg, "prior_scale_theta", 5.0);
    mspec.hyper_scale = cfg_real(cfg, "hyper_scale", 2.5);

    codareg::SamplerConfig scfg;
    scfg.chains = cfg_count(cfg, "chains", 3);
    scfg.warmup = cfg_count(cfg, "warmup", 9000);
    scfg.samples = cfg_count(cfg, "samples", 1000);
    scfg.target_accept = cfg_real(cfg, "target_accept", 0.8);
    scfg.max_tree_depth = cfg_count(cfg, "max_tree_depth", 10);
    scfg.init_jitter = cfg_real(cfg, "init_jitter", 2.0);
    scfg.seed = g.seed_given ? g.seed : cfg_count(cfg, "seed", 1);

    const std::string path_name = cfg_get(cfg, "gradient_path", "array");
    codareg::GradientPath path;
    if (path_name == "array")
        path = codareg::GradientPath::Array;
    else if (path_name == "vectorized")
        path = codareg::GradientPath::Vectorized;
    else
        throw codareg::IngestError("config key 'gradient_path': expected array|vectorized, got '" +
                                   path_name + "'");

    // reference: auto (shape-metric selection) or a fixed 1-based component
    const std::string ref_cfg = cfg_get(cfg, "reference", "auto");
    bool ref_auto = ref_cfg == "auto";
    if (ref_auto) {
        const codareg::ShapeReport rep = codareg::analyze_reference(table.y);
        mspec.reference = rep.reference;
    } else {
        const auto ref = cfg_count(cfg, "reference", 0);
        if (ref < 1 || ref > mspec.C)
            throw codareg::IngestError("config key 'reference': out of range 1.." +
                                       std::to_string(mspec.C));
        mspec.reference = static_cast<std::size_t>(ref - 1);
    }

    auto& resolved = data.resolved;
    resolved["reference"] = std::to_string(mspec.reference + 1) + (ref_auto ? " (auto)" : "");
    resolved["gradient_path"] = path_name;
    resolved["chains"] = std::to_string(scfg.chains);
    resolved["warmup"] = std::to_string(scfg.warmup);
    resolved["samples"] = std::to_string(scfg.samples);
    resolved["target_accept"] = std::to_string(scfg.target_accept);
    resolved["max_tree_depth"] = std::to_string(scfg.max_tree_depth);
    resolved["init_jitter"] = std::to_string(scfg.init_jitter);
    resolved["seed"] = std::to_string(scfg.seed);
    resolved["threads"] = std::to_string(g.threads);
    resolved["prior_scale_beta"] = std::to_string(mspec.prior_scale_beta);
    resolved["prior_scale_theta"] = std::to_string(mspec.prior_scale_theta);
    resolved["hyper_scale"] = std::to_string(mspec.hyper_scale);

    if (g.dry_run) {
        mspec.validate();
        scfg.validate();
        print_resolved(resolved);
        return 0;
    }
    ensure_out_dir(g.out_dir);

    codareg::Model model(mspec, table);
    const codareg::LogDensityGradient target = [&](const std::vector<double>& q,
                                                   std::vector<double>& grad) {
        return model.log_posterior_grad(q, grad, path);
    };
    codareg::Rng rng(scfg.seed);
    const codareg::PosteriorDraws draws =
        codareg::nuts_sample(target, scfg, std::vector<double>(model.dim(), 0.0), rng,
                             model.parameter_names(), g.threads);

    // artifacts
    codareg::write_draws_csv(g.out_dir + "/draws.csv", draws);
    codareg::write_json(g.out_dir + "/sampler_stats.json", codareg::sampler_stats_json(draws));

    const auto summaries = codareg::summarize_draws(draws);
    codareg::write_summary_text(g.out_dir + "/summary.txt", draws, summaries);

    // fit report: posterior-mean fitted compositions + predictive coverage.
    // The information criteria and coverage need >= 100 draws; below that the
    // report still records convergence so the exit code can be assessed.
    const std::size_t total = draws.total_draws();
    nlohmann::json report;
    if (total >= 100) {
        const std::size_t n_pred = std::min<std::size_t>(500, total);
        std::vector<std::vector<double>> thin;
        thin.reserve(n_pred);
        for (std::size_t j = 0; j < n_pred; ++j) {
            const std::size_t flat = n_pred > 1 ? j * (total - 1) / (n_pred - 1) : 0;
            thin.push_back(draws.values[flat / draws.n_samples()][flat % draws.n_samples()]);
        }
        const codareg::PredictiveDraws pd =
            codareg::predict(mspec, thin, table.x, table.z, table.group, rng);
        std::vector<std::vector<std::vector<double>>> predictive(table.n_obs());
        for (std::size_t i = 0; i < table.n_obs(); ++i) predictive[i] = pd.values[i];
        const codareg::FitReport rep =
            codareg::fit_report(draws, table, mspec, pd.fitted_mean, predictive);
        report = codareg::fit_report_json(rep);
    } else {
        report["note"] = "predictive scores and information criteria need >= 100 draws";
    }
    report["reference_component"] = mspec.reference + 1;
    double max_rhat = 0.0;
    bool diagnosable = draws.n_chains() >= 2 && draws.n_samples() >= 4;
    nlohmann::json conv = nlohmann::json::array();
    for (const auto& s : summaries) {
        conv.push_back({{"parameter", s.name},
                        {"mean", s.mean},
                        {"sd", s.sd},
                        {"rhat", s.rhat},
                        {"ess", s.ess}});
        if (diagnosable) max_rhat = std::max(max_rhat, s.rhat);
    }
    report["convergence"] = std::move(conv);
    report["max_rhat"] = diagnosable ? max_rhat : std::numeric_limits<double>::quiet_NaN();
    report["divergence_rate"] = draws.divergence_rate();
    codareg::write_json(g.out_dir + "/report.json", report);

    auto man = make_manifest("fit", resolved, scfg.seed, {resolved["data"], g.config_path});
    codareg::write_json(g.out_dir + "/manifest.json", man.to_json());

    std::printf("fit complete: %zu chains x %zu draws, %zu parameters\n", draws.n_chains(),
                draws.n_samples(), draws.dim());
    std::printf("divergences: %zu (%.3f%%)\n", draws.total_divergences(),
                100.0 * draws.divergence_rate());
    if (!diagnosable) {
        std::printf("convergence not assessable (need >= 2 chains and >= 4 draws)\n");
        return kExitConvergence;
    }
    std::printf("max rhat: %.4f\n", max_rhat);
    if (max_rhat > 1.05 || draws.divergence_rate() > 0.01) {
        std::printf("convergence failure: rhat > 1.05 or divergence rate > 1%%\n");
        return kExitConvergence;
    }
    return 0;
}

// ---------------------------------------------------------------- predict

int run_predict(const GlobalArgs& g, const std::string& fit_dir) {
    if (fit_dir.empty()) throw codareg::IngestError("--fit-dir is required");
    const nlohmann::json man = codareg::read_json(fit_dir + "/manifest.json");
    if (!man.contains("configuration"))
        throw codareg::IngestError("'" + fit_dir + "/manifest.json' has no configuration block");
    const auto conf = man["configuration"].get<std::map<std::string, std::string>>();

    auto split_list = [](const std::string& s) {
        std::vector<std::string> items;
        std::string cur;
        for (char ch : s) {
            if (ch == ',') {
                items.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) items.push_back(cur);
        return items;
    };
    const auto components = split_list(conf.at("components"));
    const auto covariates = split_list(conf.at("covariates"));
    const auto precision_covariates = split_list(conf.at("precision_covariates"));
    const auto group_names = split_list(conf.at("group_names"));
    const std::string group_col =
        conf.at("group") == "(single group)" ? std::string() : conf.at("group");

    codareg::ModelSpec mspec;
    mspec.C = components.size();
    mspec.P = 1 + covariates.size();
    mspec.Q = 1 + precision_covariates.size();
    mspec.L = group_names.size();
    mspec.reference = std::stoul(conf.at("reference")) - 1;  // "k" or "k (auto)"
    mspec.prior_scale_beta = std::stod(conf.at("prior_scale_beta"));
    mspec.prior_scale_theta = std::stod(conf.at("prior_scale_theta"));
    mspec.hyper_scale = std::stod(conf.at("hyper_scale"));

    if (g.data_path.empty()) throw codareg::IngestError("--data with new covariate rows is required");
    const codareg::CsvTable csv = codareg::read_csv(g.data_path);
    std::vector<std::size_t> xcol, zcol;
    for (const auto& n : covariates) xcol.push_back(csv.column(n));
    for (const auto& n : precision_covariates) zcol.push_back(csv.column(n));
    const std::size_t gcol = group_col.empty() ? 0 : csv.column(group_col);

    std::vector<std::vector<double>> new_x, new_z;
    std::vector<std::size_t> groups;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string where = "row " + std::to_string(r + 2);
        std::vector<double> x{1.0}, z{1.0};
        for (std::size_t j = 0; j < xcol.size(); ++j)
            x.push_back(codareg::detail::parse_real(csv.rows[r][xcol[j]], where));
        for (std::size_t j = 0; j < zcol.size(); ++j)
            z.push_back(codareg::detail::parse_real(csv.rows[r][zcol[j]], where));
        std::size_t gi = 0;
        if (!group_col.empty()) {
            const std::string& label = csv.rows[r][gcol];
            bool known = false;
            for (std::size_t l = 0; l < group_names.size(); ++l)
                if (group_names[l] == label) {
                    gi = l;
                    known = true;
                    break;
                }
            if (!known)
                throw codareg::IngestError("unknown group label '" + label + "' at " + where);
        }
        new_x.push_back(std::move(x));
        new_z.push_back(std::move(z));
        groups.push_back(gi);
    }
    if (new_x.empty()) throw codareg::IngestError("'" + g.data_path + "' has no data rows");

    std::map<std::string, std::string> resolved = conf;
    resolved["predict_data"] = g.data_path;
    resolved["fit_dir"] = fit_dir;
    if (g.dry_run) {
        print_resolved(resolved);
        return 0;
    }

    const codareg::PosteriorDraws draws = codareg::read_draws_csv(fit_dir + "/draws.csv");
    const std::size_t total = draws.total_draws();
    const std::size_t n_pred = std::min<std::size_t>(500, total);
    std::vector<std::vector<double>> thin;
    thin.reserve(n_pred);
    for (std::size_t j = 0; j < n_pred; ++j) {
        const std::size_t flat = n_pred > 1 ? j * (total - 1) / (n_pred - 1) : 0;
        thin.push_back(draws.values[flat / draws.n_samples()][flat % draws.n_samples()]);
    }
    codareg::Rng rng(g.seed);
    const codareg::PredictiveDraws pd = codareg::predict(mspec, thin, new_x, new_z, groups, rng);

    ensure_out_dir(g.out_dir);
    {
        std::ofstream out(g.out_dir + "/predictions.csv");
        if (!out) throw std::runtime_error("cannot write predictions.csv");
        out << "row";
        for (const auto& c : components)
            out << ',' << c << "_mean," << c << "_q2.5," << c << "_q5," << c << "_q95," << c
                << "_q97.5";
        out << '\n';
        for (std::size_t i = 0; i < new_x.size(); ++i) {
            out << (i + 1);
            for (std::size_t c = 0; c < mspec.C; ++c) {
                const auto& s = pd.summaries[i][c];
                char buf[160];
                std::snprintf(buf, sizeof(buf), ",%.10f,%.10f,%.10f,%.10f,%.10f",
                              pd.fitted_mean[i][c], s[0], s[1], s[3], s[4]);
                out << buf;
            }
            out << '\n';
        }
    }
    auto out_man = make_manifest("predict", resolved, g.seed,
                                 {g.data_path, fit_dir + "/draws.csv"});
    codareg::write_json(g.out_dir + "/manifest.json", out_man.to_json());
    std::printf("wrote %zu predictions to %s/predictions.csv\n", new_x.size(), g.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------- diagnose

int run_diagnose(const GlobalArgs& g, const std::string& fit_dir) {
    if (fit_dir.empty()) throw codareg::IngestError("--fit-dir is required");
    if (g.dry_run) {
        print_resolved({{"fit_dir", fit_dir}});
        return 0;
    }
    const codareg::PosteriorDraws draws = codareg::read_draws_csv(fit_dir + "/draws.csv");
    const auto summaries = codareg::summarize_draws(draws);

    std::printf("%-28s %10s %10s %10s %10s %10s %8s %10s\n", "parameter", "mean", "sd", "2.5%",
                "50%", "97.5%", "rhat", "ess");
    for (const auto& s : summaries)
        std::printf("%-28s %10.4f %10.4f %10.4f %10.4f %10.4f %8.4f %10.1f\n", s.name.c_str(),
                    s.mean, s.sd, s.q025, s.q50, s.q975, s.rhat, s.ess);

    std::ifstream rep_in(fit_dir + "/report.json");
    if (rep_in) {
        nlohmann::json rep;
        rep_in >> rep;
        std::printf("\n%-16s %12s\n", "criterion", "value");
        for (const char* key : {"aitchison_mean", "kl_mean", "coverage_95", "rmse_percent", "dic",
                                "p_d", "waic", "p_waic", "lppd", "elppd"})
            if (rep.contains(key))
                std::printf("%-16s %12.4f\n", key, rep[key].get<double>());
    }
    if (!g.out_dir.empty()) {
        ensure_out_dir(g.out_dir);
        codareg::write_summary_text(g.out_dir + "/summary.txt", draws, summaries);
        auto man = make_manifest("diagnose", {{"fit_dir", fit_dir}}, g.seed,
                                 {fit_dir + "/draws.csv"});
        codareg::write_json(g.out_dir + "/manifest.json", man.to_json());
    }
    return 0;
}

// ---------------------------------------------------------------- simulate

int run_simulate(const GlobalArgs& g, const std::string& scenario, double phi, std::size_t n,
                 std::size_t replicates) {
    codareg::ScenarioSpec spec;
    spec.phi = phi;
    spec.N = n;
    spec.replicates = replicates;
    spec.seed = g.seed;

    std::map<std::string, std::string> resolved{{"scenario", scenario},
                                                {"phi", std::to_string(phi)},
                                                {"n", std::to_string(n)},
                                                {"replicates", std::to_string(replicates)},
                                                {"seed", std::to_string(g.seed)}};
    if (scenario == "reference") {
        spec.kind = codareg::ScenarioKind::ReferenceIllustration;
        spec.C = 7;
        if (g.dry_run) {
            spec.validate();
            print_resolved(resolved);
            return 0;
        }
        ensure_out_dir(g.out_dir);
        codareg::Rng rng(spec.seed);
        const auto table = codareg::run_reference_illustration(spec, rng);
        codareg::write_illustration_csv(g.out_dir + "/illustration.csv", table);
        std::printf("%-9s %-10s %10s %10s %10s\n", "scenario", "selected", "rate", "alpha_hat",
                    "entropy");
        for (const auto& row : table)
            std::printf("%-9zu %-10zu %10.3f %10.3f %10.3f\n", row.boosted + 1, row.boosted + 1,
                        static_cast<double>(row.selected_boosted) /
                            static_cast<double>(row.replicates_used),
                        row.avg_alpha_hat[row.boosted], row.avg_entropy);
    } else if (scenario == "entropy") {
        spec.kind = codareg::ScenarioKind::EntropySweep;
        if (g.dry_run) {
            print_resolved(resolved);
            return 0;
        }
        ensure_out_dir(g.out_dir);
        std::vector<double> grid;
        for (double v = 0.5; v <= 26.0 + 1e-9; v += 0.25) grid.push_back(v);
        const auto rows = codareg::run_entropy_sweep(3, 13, grid);
        codareg::write_entropy_csv(g.out_dir + "/entropy.csv", rows);
        for (const auto& r : rows)
            if (r.is_max)
                std::printf("C=%zu: max entropy %.4f at phi=%.2f\n", r.C, r.entropy, r.phi);
    } else if (scenario == "regression") {
        spec.kind = codareg::ScenarioKind::RegressionSim;
        spec.C = 3;
        spec.L = 4;
        if (g.dry_run) {
            spec.validate();
            print_resolved(resolved);
            return 0;
        }
        ensure_out_dir(g.out_dir);
        codareg::Rng rng(spec.seed);
        const auto cell = codareg::run_regression_sim(spec, rng);
        codareg::write_regression_csv(g.out_dir + "/regression.csv", {cell});
        std::printf("phi=%.1f n=%zu: aDist=%.3f±%.3f  KL=%.3f  coverage=%.3f  rMSE=%.3f  "
                    "divergence=%.4f  (%zu/%zu replicates)\n",
                    cell.phi, cell.N, cell.adist_mean, cell.adist_sd, cell.kl_mean,
                    cell.coverage_pred, cell.param_rmse, cell.divergence_rate,
                    cell.replicates_used, spec.replicates);
    } else {
        throw codareg::IngestError("--scenario must be reference|entropy|regression");
    }
    auto man = make_manifest("simulate", resolved, g.seed, {});
    codareg::write_json(g.out_dir + "/manifest.json", man.to_json());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian Dirichlet regression for compositional data"};
    app.set_version_flag("--version", std::string("codareg ") + codareg::kVersion);
    app.require_subcommand(1);

    GlobalArgs g_select, g_fit, g_predict, g_diagnose, g_simulate;
    std::string fit_dir_predict, fit_dir_diagnose;
    std::string scenario;
    double sim_phi = 13.0;
    std::size_t sim_n = 30, sim_reps = 20;

    auto* c_select = app.add_subcommand("select-reference",
                                        "choose the reference component by gamma shape metrics");
    add_global_flags(c_select, g_select);
    c_select->add_option("--data", g_select.data_path, "CSV with component columns");

    auto* c_fit = app.add_subcommand("fit", "sample the hierarchical regression posterior");
    add_global_flags(c_fit, g_fit);
    c_fit->add_option("--data", g_fit.data_path, "CSV with components, covariates, group");

    auto* c_predict = app.add_subcommand("predict", "posterior predictive for new covariate rows");
    add_global_flags(c_predict, g_predict);
    c_predict->add_option("--fit-dir", fit_dir_predict, "directory written by `fit`");
    c_predict->add_option("--data", g_predict.data_path, "CSV with covariate and group columns");

    auto* c_diagnose = app.add_subcommand("diagnose", "convergence and fit diagnostics table");
    add_global_flags(c_diagnose, g_diagnose);
    c_diagnose->add_option("--fit-dir", fit_dir_diagnose, "directory written by `fit`");

    auto* c_simulate = app.add_subcommand("simulate", "run a seeded simulation study");
    add_global_flags(c_simulate, g_simulate);
    c_simulate->add_option("--scenario", scenario, "reference | entropy | regression")
        ->required();
    c_simulate->add_option("--phi", sim_phi, "precision (regression scenario)");
    c_simulate->add_option("--n", sim_n, "per-group sample size (regression) or per-fit size");
    c_simulate->add_option("--replicates", sim_reps, "replicates per scenario");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_select->parsed()) return run_select_reference(g_select);
        if (c_fit->parsed()) return run_fit(g_fit);
        if (c_predict->parsed()) return run_predict(g_predict, fit_dir_predict);
        if (c_diagnose->parsed()) return run_diagnose(g_diagnose, fit_dir_diagnose);
        if (c_simulate->parsed()) return run_simulate(g_simulate, scenario, sim_phi, sim_n, sim_reps);
    } catch (const codareg::IngestError& e) {
        std::fprintf(stderr, "error (ingestion): %s\n", e.what());
        return kExitIngest;
    } catch (const codareg::SamplerError& e) {
        std::fprintf(stderr, "error (sampler): %s\n", e.what());
        return kExitSampler;
    } catch (const codareg::MleError& e) {
        std::fprintf(stderr, "error (estimation): %s\n", e.what());
        return kExitSampler;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error (validation): %s\n", e.what());
        return kExitIngest;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
