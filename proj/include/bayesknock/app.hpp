#pragma once

// Run configuration and the three command verbs (select, simulate, sensitivity).

#include "bayesknock/chain.hpp"
#include "bayesknock/fdr.hpp"
#include "bayesknock/io.hpp"
#include "bayesknock/sim.hpp"

#include <filesystem>
#include <string>

namespace bayesknock {

enum class BoundStatistic { SignDifference, NonPositive };

struct RunConfig {
    std::string verb = "select";
    std::string input;
    std::string output = "out";

    // data
    std::string response = "y";
    std::string event_column = "event";
    std::string mode = "linear";  ///< linear | aft
    bool log_response = true;
    bool center = true;
    bool nonparanormal = false;
    std::vector<std::string> covariates;

    RegressionHyper hyper;
    GgmHyper ggm;

    // chain
    int burn_in = 8000;
    int iterations = 8000;
    int thin = 1;
    int chains = 1;
    std::uint64_t seed = 1;
    int add_delete_proposals = 1;
    bool exchange_moves = true;
    bool random_scan = false;
    double shrink = kDefaultShrink;
    unsigned threads = 0;
    std::string statistic = "sign";  ///< sign | nonpositive

    // simulate / sensitivity
    std::string scenario = "1";
    int replicates = 1;
    int n = 200;
    int p = 30;
    int n_active = 6;
    int hubs = 40;
    int hub_size = 5;
    std::vector<double> hub_coefficients{5.0, -5.0, 3.0, -3.0};
    double hub_correlation = 0.7;
    double censor_fraction = 0.25;
    std::uint64_t structure_seed = ScenarioSpec{}.structure_seed;
    std::vector<std::string> methods{"BayesKnock"};
    std::string baseline_statistic = "ridge";  ///< ridge | ols
    std::string grid_parameter = "v0";
    std::vector<double> grid_values{1e-4, 1e-2, 0.25};

    void validate() const {
        require(verb == "select" || verb == "simulate" || verb == "sensitivity", "unknown verb '" + verb + "'");
        require(mode == "linear" || mode == "aft", "mode must be linear or aft");
        require(burn_in >= 0, "burn-in must be nonnegative");
        require(iterations >= 1, "iterations must be at least 1");
        require(thin >= 1, "thin must be at least 1");
        require(chains >= 1, "chains must be at least 1");
        require(replicates >= 1, "replicates must be at least 1");
        require(statistic == "sign" || statistic == "nonpositive", "statistic must be sign or nonpositive");
        require(baseline_statistic == "ridge" || baseline_statistic == "ols", "baseline statistic must be ridge or ols");
        require(!output.empty(), "output directory must be given");
        hyper.validate();
        ggm.validate();
        if (verb == "select") {
            require(!input.empty(), "select needs an input file");
        }
        if (verb != "select") {
            parse_scenario(scenario);
            for (const auto& m : methods) {
                parse_method(m);
            }
        }
    }

    static Method parse_method(const std::string& s) {
        if (s == "BayesKnock" || s == "bayesknock") return Method::BayesKnock;
        if (s == "Joint" || s == "joint") return Method::Joint;
        if (s == "KnockoffExact" || s == "knockoff") return Method::KnockoffExact;
        throw Error("unknown method '" + s + "' (expected BayesKnock, Joint or KnockoffExact)");
    }

    ChainConfig chain_config() const {
        ChainConfig c;
        c.burn_in = burn_in;
        c.iterations = iterations;
        c.thin = thin;
        c.seed = seed;
        c.mode = mode == "aft" ? ResponseMode::Aft : ResponseMode::Linear;
        c.add_delete_proposals = add_delete_proposals;
        c.exchange_moves = exchange_moves;
        c.random_scan = random_scan;
        c.shrink = shrink;
        return c;
    }

    ScenarioSpec scenario_spec() const {
        ScenarioSpec s;
        s.id = parse_scenario(scenario);
        s.n = n;
        s.p = p;
        s.n_active = n_active;
        s.hubs = hubs;
        s.hub_size = hub_size;
        s.hub_coefficients = hub_coefficients;
        s.hub_child_correlation = hub_correlation;
        s.censor_fraction = censor_fraction;
        s.structure_seed = structure_seed;
        s.seed = seed;
        return s;
    }

    std::vector<MethodConfig> method_configs() const {
        std::vector<MethodConfig> out;
        for (const auto& m : methods) {
            MethodConfig mc;
            mc.method = parse_method(m);
            mc.hyper = hyper;
            mc.ggm = ggm;
            mc.chain = chain_config();
            mc.chains = chains;
            mc.statistic = baseline_statistic == "ols" ? BaselineStatistic::Ols : BaselineStatistic::RidgeGcv;
            out.push_back(mc);
        }
        return out;
    }

    Json to_json() const {
        Json j;
        j["verb"] = verb;
        j["input"] = input;
        j["output"] = output;
        j["data"] = {{"response", response}, {"event_column", event_column}, {"mode", mode},
                     {"log_response", log_response}, {"center", center}, {"nonparanormal", nonparanormal},
                     {"covariates", covariates}};
        j["hyperparameters"] = {{"v0", ggm.v0}, {"v1", ggm.v1}, {"theta", ggm.theta}, {"xi", ggm.xi},
                                {"h_beta", hyper.h_beta}, {"a_sigma", hyper.a_sigma}, {"b_sigma", hyper.b_sigma},
                                {"a", hyper.a}, {"b", hyper.b}, {"birth_variance", hyper.birth_variance},
                                {"walk_sd", hyper.walk_sd}, {"q", hyper.q}, {"sigma2_slab_term", hyper.sigma2_slab_term}};
        j["chain"] = {{"burn_in", burn_in}, {"iterations", iterations}, {"thin", thin}, {"chains", chains},
                      {"seed", seed}, {"add_delete_proposals", add_delete_proposals}, {"exchange_moves", exchange_moves}, {"random_scan", random_scan},
                      {"shrink", shrink}, {"statistic", statistic}};
        if (verb != "select") {
            j["simulation"] = {{"scenario", scenario}, {"replicates", replicates}, {"n", n}, {"p", p},
                               {"n_active", n_active}, {"hubs", hubs}, {"hub_size", hub_size},
                               {"hub_coefficients", hub_coefficients}, {"hub_correlation", hub_correlation},
                               {"censor_fraction", censor_fraction}, {"structure_seed", structure_seed},
                               {"methods", methods}, {"baseline_statistic", baseline_statistic}};
        }
        if (verb == "sensitivity") {
            j["grid"] = {{"parameter", grid_parameter}, {"values", grid_values}};
        }
        return j;
    }
};

inline Json diagnostics_json(const ChainDiagnostics& d) {
    return {{"add_proposed", d.add_proposed},
            {"add_accepted", d.add_accepted},
            {"delete_proposed", d.delete_proposed},
            {"delete_accepted", d.delete_accepted},
            {"walk_proposed", d.walk_proposed},
            {"walk_accepted", d.walk_accepted},
            {"exchange_proposed", d.exchange_proposed},
            {"exchange_accepted", d.exchange_accepted},
            {"censored_violations", d.censored_violations}};
}

inline Json base_manifest(const RunConfig& cfg) {
    Json m;
    m["program"] = "bayesknock";
    m["version"] = kVersion;
    m["config"] = cfg.to_json();
    m["q"] = cfg.hyper.q;
    return m;
}

/// Fits the model to a prepared dataset and assembles the full report.
inline Report fit_report(const Dataset& data, const RunConfig& cfg) {
    ChainConfig cc = cfg.chain_config();
    cc.mode = data.censored() ? ResponseMode::Aft : ResponseMode::Linear;
    const auto chains = run_chains(data, cfg.hyper, cfg.ggm, cc, cfg.chains, cfg.threads);
    const PosteriorDraws pooled = pool_draws(chains);
    const WDraws w = compute_W(pooled.beta, pooled.beta_tilde);
    const Vector raw = estimate_raw_upper_bound(w);
    const Vector bounds = cfg.statistic == "nonpositive" ? estimate_nonpositive_bound(w).cwiseMin(1.0)
                                                         : estimate_upper_bound(w);

    std::vector<std::string> names;
    for (Index j = 0; j < data.p(); ++j) {
        names.push_back(data.name(j));
    }
    Report r;
    r.selection = select_bfdr(bounds, cfg.hyper.q);
    r.summaries = summarize_draws(pooled, names);
    r.edge_ppi = pooled.edge_ppi;
    r.omega_mean = pooled.omega_mean;

    Json m = base_manifest(cfg);
    m["data"] = {{"n", data.n()}, {"p", data.p()}, {"censored", data.censored_count()}};
    Json per_chain = Json::array();
    for (const auto& c : chains) {
        const ChainGeweke g = chain_geweke(c);
        Json z = Json::array();
        for (Index j = 0; j < g.beta.size(); ++j) {
            z.push_back(number_or_null(g.beta(j)));
        }
        per_chain.push_back({{"seed", g.seed},
                             {"draws", g.draws},
                             {"geweke_mean_beta", number_or_null(g.mean_beta)},
                             {"geweke_sigma2", number_or_null(g.sigma2)},
                             {"geweke_beta", z},
                             {"diagnostics", diagnostics_json(c.diagnostics)}});
    }
    m["chains"] = per_chain;
    m["pooled_draws"] = pooled.draws();
    m["bounds_clipped"] = static_cast<Index>((raw.array() > 1.0).count());
    Json selected = Json::array();
    for (int j : r.selection.selected) {
        selected.push_back(names[static_cast<std::size_t>(j)]);
    }
    m["selected"] = selected;
    m["estimated_bfdr"] = estimated_bfdr(bounds, r.selection.selected);
    r.manifest = std::move(m);
    return r;
}

/// `select`: load the CSV, fit, write the report. Returns the report written.
inline Report run_select(const RunConfig& cfg) {
    cfg.validate();
    LoadOptions lo;
    lo.response = cfg.response;
    lo.event_column = cfg.event_column;
    lo.mode = cfg.mode == "aft" ? ResponseMode::Aft : ResponseMode::Linear;
    lo.log_response = cfg.log_response;
    lo.center = cfg.center;
    lo.nonparanormal = cfg.nonparanormal;
    lo.covariates = cfg.covariates;
    const Dataset data = load_csv(cfg.input, lo);
    Report r = fit_report(data, cfg);
    write_report(r, cfg.output);
    return r;
}

inline void write_replicates_csv(const ReplicateTable& t, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "replicate,seed,method,failed,selected";
    for (const char* name : kMetricNames) {
        out << ',' << name;
    }
    out << ",censored_violations,error\n";
    for (const auto& r : t.records) {
        out << r.replicate + 1 << ',' << r.seed << ',' << r.method << ',' << (r.failed ? 1 : 0) << ','
            << r.outcome.row.selected;
        for (int k = 0; k < kMetricCount; ++k) {
            out << ',' << (r.failed ? std::string("nan") : format_double(metric(r.outcome.row, k)));
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        out << ',' << r.outcome.censored_violations << ",\"" << err << "\"\n";
    }
    detail::close_checked(out, path);
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path,
                              const std::vector<GridPoint>* grid = nullptr) {
    auto out = detail::open_out(path);
    if (grid != nullptr) {
        out << "parameter,value,";
    }
    out << "method,succeeded,failed";
    for (const char* name : kMetricNames) {
        out << ',' << name << "_mean," << name << "_sd";
    }
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = rows[i];
        if (grid != nullptr) {
            out << (*grid)[i].name << ',' << format_double((*grid)[i].value) << ',';
        }
        out << s.method << ',' << s.succeeded << ',' << s.failed;
        for (int k = 0; k < kMetricCount; ++k) {
            out << ',' << format_double(s.mean[static_cast<std::size_t>(k)]) << ','
                << format_double(s.sd[static_cast<std::size_t>(k)]);
        }
        out << '\n';
    }
    detail::close_checked(out, path);
}

inline Json truth_json(const ScenarioSpec& spec) {
    const SimData sim = generate(spec, replicate_seed(spec, 0));
    Json active = Json::array();
    for (int j : sim.active) {
        active.push_back(j + 1);
    }
    Json beta = Json::array();
    for (Index j = 0; j < sim.beta.size(); ++j) {
        beta.push_back(sim.beta(j));
    }
    Json t = {{"p", sim.beta.size()}, {"active", active}, {"beta", beta}, {"error_variance", sim.error_variance}};
    if (spec.id != ScenarioId::S1) {
        t["sigma"] = matrix_to_json(sim.sigma);
    }
    return t;
}

/// `simulate`: replicate table, per-method summary and manifest.
inline ReplicateTable run_simulate(const RunConfig& cfg) {
    cfg.validate();
    const ScenarioSpec spec = cfg.scenario_spec();
    const ReplicateTable table = run_replicates(spec, cfg.method_configs(), cfg.replicates, cfg.threads);
    std::error_code ec;
    std::filesystem::create_directories(cfg.output, ec);
    if (ec) {
        throw Error("cannot create '" + cfg.output + "': " + ec.message());
    }
    const std::filesystem::path dir(cfg.output);
    write_replicates_csv(table, dir / "replicates.csv");
    write_summary_csv(table.summary, dir / "summary.csv");

    Json m = base_manifest(cfg);
    Json seeds = Json::array();
    for (int r = 0; r < cfg.replicates; ++r) {
        seeds.push_back(replicate_seed(spec, r));
    }
    m["replicate_seeds"] = seeds;
    m["truth_first_replicate"] = truth_json(spec);
    int failures = 0;
    for (const auto& r : table.records) {
        failures += r.failed ? 1 : 0;
    }
    m["failed_runs"] = failures;
    write_json(m, dir / "manifest.json");
    return table;
}

/// `sensitivity`: one summary row per grid value of a single hyperparameter.
inline std::vector<SensitivityRow> run_sensitivity(const RunConfig& cfg) {
    cfg.validate();
    require(!cfg.grid_values.empty(), "sensitivity needs at least one grid value");
    require(cfg.methods.size() == 1, "sensitivity takes exactly one method");
    std::vector<GridPoint> grid;
    for (double v : cfg.grid_values) {
        grid.push_back({cfg.grid_parameter, v});
    }
    const ScenarioSpec spec = cfg.scenario_spec();
    const auto rows = sensitivity_grid(spec, cfg.method_configs().front(), grid, cfg.replicates, cfg.threads);
    std::error_code ec;
    std::filesystem::create_directories(cfg.output, ec);
    if (ec) {
        throw Error("cannot create '" + cfg.output + "': " + ec.message());
    }
    const std::filesystem::path dir(cfg.output);
    std::vector<SummaryRow> summaries;
    for (const auto& r : rows) {
        summaries.push_back(r.summary);
    }
    write_summary_csv(summaries, dir / "sensitivity.csv", &grid);
    Json m = base_manifest(cfg);
    Json seeds = Json::array();
    for (int r = 0; r < cfg.replicates; ++r) {
        seeds.push_back(replicate_seed(spec, r));
    }
    m["replicate_seeds"] = seeds;
    write_json(m, dir / "manifest.json");
    return rows;
}

}  // namespace bayesknock
