#pragma once

// File plumbing: CSV ingestion and writing, key=value run configuration,
// content digests, reproducible timestamps, run manifests, and JSON/text
// report serialization.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "codareg/metrics.hpp"
#include "codareg/model.hpp"
#include "codareg/nuts.hpp"
#include "codareg/version.hpp"

namespace codareg {

// Input/validation failures that the CLI maps to exit code 2.
class IngestError : public std::runtime_error {
public:
    explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw IngestError("missing column '" + name + "'");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Comma splitting with RFC-4180 quoting: a field starting with '"' runs to
// the closing quote (doubled quotes escape a literal one) and may contain
// the separator.  Needed because parameter names such as beta[1,2] carry
// commas into the draws-file header.
inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"' && trim(cur).empty() && !was_quoted) {
            in_quotes = true;
            was_quoted = true;
            cur.clear();
        } else if (ch == sep) {
            out.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += ch;
        }
    }
    out.push_back(was_quoted ? cur : trim(cur));
    return out;
}

// Quotes a field iff it needs quoting under RFC 4180.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    q += '"';
    return q;
}

inline double parse_real(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IngestError("cannot parse '" + s + "' as a number at " + where);
    }
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw IngestError("'" + path + "' is empty");
    t.header = detail::split(line, ',');
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto row = detail::split(line, ',');
        if (row.size() != t.header.size())
            throw IngestError("'" + path + "' row " + std::to_string(t.rows.size() + 2) +
                              " has " + std::to_string(row.size()) + " fields, expected " +
                              std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestConfig {
    std::vector<std::string> components;          // required, >= 2 columns
    std::vector<std::string> covariates;          // mean-model columns after the intercept
    std::vector<std::string> precision_covariates;  // precision-model columns after the intercept
    std::string group;                            // optional; absent -> single group
    bool adjust_zeros = false;
    double row_sum_tolerance = 1e-6;
};

// Parses, validates, and closes the compositional columns; builds the design
// matrices with a leading intercept column.
inline CoDaTable ingest_csv(const std::string& path, const IngestConfig& cfg) {
    if (cfg.components.size() < 2) throw IngestError("need at least 2 component columns");
    const CsvTable csv = read_csv(path);
    if (csv.rows.empty()) throw IngestError("'" + path + "' has no data rows");

    std::vector<std::size_t> ycol, xcol, zcol;
    for (const auto& name : cfg.components) ycol.push_back(csv.column(name));
    for (const auto& name : cfg.covariates) xcol.push_back(csv.column(name));
    for (const auto& name : cfg.precision_covariates) zcol.push_back(csv.column(name));
    const std::size_t gcol = cfg.group.empty() ? 0 : csv.column(cfg.group);

    const std::size_t C = ycol.size();
    CoDaTable table;
    std::map<std::string, std::size_t> group_index;

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string where = "row " + std::to_string(r + 2);

        std::vector<double> parts(C);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            parts[c] = detail::parse_real(row[ycol[c]], where + ", column '" +
                                                            cfg.components[c] + "'");
            if (parts[c] < 0.0)
                throw IngestError("negative part at " + where + ", column '" +
                                  cfg.components[c] + "'");
            sum += parts[c];
        }
        if (std::abs(sum - 1.0) > cfg.row_sum_tolerance)
            throw IngestError(where + " sums to " + std::to_string(sum) +
                              ", deviating from 1 by more than " +
                              std::to_string(cfg.row_sum_tolerance));
        for (double& p : parts) p /= sum;

        bool has_zero = false;
        for (double p : parts) has_zero = has_zero || p <= 0.0;
        if (has_zero) {
            if (!cfg.adjust_zeros) {
                std::size_t zc = 0;
                while (parts[zc] > 0.0) ++zc;
                throw IngestError("zero part at " + where + ", column '" + cfg.components[zc] +
                                  "' (enable zero adjustment to proceed)");
            }
            table.y.push_back(Composition(adjust_zeros(parts, csv.rows.size()), 1e-6));
        } else {
            table.y.push_back(Composition(parts, 1e-6));
        }

        std::vector<double> x{1.0};
        for (std::size_t j = 0; j < xcol.size(); ++j)
            x.push_back(detail::parse_real(row[xcol[j]], where + ", column '" +
                                                             cfg.covariates[j] + "'"));
        table.x.push_back(std::move(x));
        std::vector<double> z{1.0};
        for (std::size_t j = 0; j < zcol.size(); ++j)
            z.push_back(detail::parse_real(row[zcol[j]], where + ", column '" +
                                                             cfg.precision_covariates[j] + "'"));
        table.z.push_back(std::move(z));

        if (cfg.group.empty()) {
            table.group.push_back(0);
        } else {
            const std::string& label = row[gcol];
            auto it = group_index.find(label);
            if (it == group_index.end())
                it = group_index.emplace(label, group_index.size()).first;
            table.group.push_back(it->second);
        }
    }

    table.group_names.resize(cfg.group.empty() ? 1 : group_index.size());
    if (cfg.group.empty())
        table.group_names[0] = "all";
    else
        for (const auto& [label, idx] : group_index) table.group_names[idx] = label;
    return table;
}

// ---------------------------------------------------------------------------
// Draw storage
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// One CSV per run: header `chain,iter,<param names...>`, chains then
// iterations in order, 1-based indices, full double precision.
inline void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "chain,iter";
    for (const auto& n : draws.names) out << ',' << detail::csv_field(n);
    out << '\n';
    for (std::size_t k = 0; k < draws.n_chains(); ++k)
        for (std::size_t m = 0; m < draws.n_samples(); ++m) {
            out << (k + 1) << ',' << (m + 1);
            for (double v : draws.values[k][m]) out << ',' << detail::format_real(v);
            out << '\n';
        }
}

inline PosteriorDraws read_draws_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 3 || csv.header[0] != "chain" || csv.header[1] != "iter")
        throw IngestError("'" + path + "' is not a draws file (expect chain,iter,<params>)");
    PosteriorDraws draws;
    draws.names.assign(csv.header.begin() + 2, csv.header.end());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string where = "'" + path + "' row " + std::to_string(r + 2);
        const auto chain = static_cast<std::size_t>(detail::parse_real(row[0], where));
        if (chain == 0) throw IngestError(where + ": chain index must be 1-based");
        if (chain > draws.values.size()) draws.values.resize(chain);
        std::vector<double> q(draws.names.size());
        for (std::size_t j = 0; j < q.size(); ++j) q[j] = detail::parse_real(row[j + 2], where);
        draws.values[chain - 1].push_back(std::move(q));
    }
    if (draws.values.empty()) throw IngestError("'" + path + "' contains no draws");
    for (const auto& ch : draws.values)
        if (ch.size() != draws.values.front().size())
            throw IngestError("'" + path + "' has unequal chain lengths");
    return draws;
}

// Sampler statistics sidecar (per chain, per iteration).
inline nlohmann::json sampler_stats_json(const PosteriorDraws& draws) {
    nlohmann::json j;
    j["chains"] = draws.n_chains();
    j["samples_per_chain"] = draws.n_samples();
    j["total_divergences"] = draws.total_divergences();
    j["divergence_rate"] = draws.divergence_rate();
    for (std::size_t k = 0; k < draws.n_chains(); ++k) {
        nlohmann::json ch;
        ch["accept_stat"] = draws.accept_stats[k];
        ch["step_size"] = draws.step_size[k];
        std::vector<int> div(draws.divergent[k].begin(), draws.divergent[k].end());
        ch["divergent"] = div;
        ch["log_density"] = draws.log_density[k];
        j["chain_stats"].push_back(std::move(ch));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Digests, timestamps, manifest
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string fnv1a_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

inline std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open '" + path + "' for digesting");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

// UTC timestamp; honors SOURCE_DATE_EPOCH so manifests are reproducible.
inline std::string timestamp_utc() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH"))
        t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> configuration;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a hex
    std::string version = kVersion;
    std::string created_utc;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["configuration"] = configuration;
        j["seed"] = seed;
        j["input_digests"] = input_digests;
        j["version"] = version;
        j["created_utc"] = created_utc;
        return j;
    }
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// Run configuration files: `key = value` lines, '#' comments
// ---------------------------------------------------------------------------

using KeyValueConfig = std::map<std::string, std::string>;

inline KeyValueConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open config '" + path + "'");
    KeyValueConfig cfg;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IngestError("config '" + path + "' line " + std::to_string(ln) +
                              ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw IngestError("config '" + path + "' line " + std::to_string(ln) + ": empty key");
        cfg[key] = val;
    }
    return cfg;
}

inline std::vector<std::string> config_list(const KeyValueConfig& cfg, const std::string& key) {
    auto it = cfg.find(key);
    if (it == cfg.end() || detail::trim(it->second).empty()) return {};
    auto items = detail::split(it->second, ',');
    items.erase(std::remove(items.begin(), items.end(), std::string()), items.end());
    return items;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline nlohmann::json fit_report_json(const FitReport& rep) {
    nlohmann::json j;
    j["aitchison_mean"] = rep.aitchison_mean;
    j["kl_mean"] = rep.kl_mean;
    j["coverage_95"] = rep.coverage_95;
    j["coverage_by_component"] = rep.coverage_by_component;
    j["rmse_percent"] = rep.rmse_percent;
    j["dic"] = rep.dic;
    j["p_d"] = rep.p_d;
    j["waic"] = rep.waic;
    j["p_waic"] = rep.p_waic;
    j["lppd"] = rep.lppd;
    j["elppd"] = rep.elppd;
    return j;
}

struct ParameterSummary {
    std::string name;
    double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
    double rhat = 0.0, ess = 0.0;
};

inline std::vector<ParameterSummary> summarize_draws(const PosteriorDraws& draws) {
    std::vector<ParameterSummary> out;
    const std::size_t total = draws.total_draws();
    std::vector<double> pooled(total);
    for (std::size_t d = 0; d < draws.dim(); ++d) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < draws.n_chains(); ++k)
            for (std::size_t m = 0; m < draws.n_samples(); ++m)
                pooled[idx++] = draws.values[k][m][d];
        ParameterSummary s;
        s.name = draws.names[d];
        s.mean = mean_of(pooled);
        s.sd = std::sqrt(variance_of(pooled));
        s.q025 = quantile_type7(pooled, 0.025);
        s.q50 = quantile_type7(pooled, 0.5);
        s.q975 = quantile_type7(pooled, 0.975);
        if (draws.n_chains() >= 2 && draws.n_samples() >= 4) {
            s.rhat = rhat(draws, d);
            s.ess = effective_sample_size(draws, d);
        } else {
            s.rhat = std::numeric_limits<double>::quiet_NaN();
            s.ess = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Human-readable convergence summary with aligned columns.
inline void write_summary_text(const std::string& path, const PosteriorDraws& draws,
                               const std::vector<ParameterSummary>& summaries) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-28s %10s %10s %10s %10s %10s %8s %10s\n", "parameter",
                  "mean", "sd", "2.5%", "50%", "97.5%", "rhat", "ess");
    out << buf;
    for (const auto& s : summaries) {
        std::snprintf(buf, sizeof(buf), "%-28s %10.4f %10.4f %10.4f %10.4f %10.4f %8.4f %10.1f\n",
                      s.name.c_str(), s.mean, s.sd, s.q025, s.q50, s.q975, s.rhat, s.ess);
        out << buf;
    }
    out << '\n';
    std::snprintf(buf, sizeof(buf), "chains: %zu   samples/chain: %zu   divergences: %zu (%.3f%%)\n",
                  draws.n_chains(), draws.n_samples(), draws.total_divergences(),
                  100.0 * draws.divergence_rate());
    out << buf;
}

}  // namespace codareg
