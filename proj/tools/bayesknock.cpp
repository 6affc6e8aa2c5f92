#include "bayesknock/bayesknock.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace bk = bayesknock;

namespace {

void add_shared(CLI::App* cmd, bk::RunConfig& c) {
    cmd->add_option("-o,--output", c.output, "Output directory")->capture_default_str();

    cmd->add_option("--v0", c.ggm.v0, "Spike variance for precision off-diagonals")->capture_default_str();
    cmd->add_option("--v1", c.ggm.v1, "Slab variance for precision off-diagonals")->capture_default_str();
    cmd->add_option("--theta", c.ggm.theta, "Exponential rate on precision diagonals")->capture_default_str();
    cmd->add_option("--xi", c.ggm.xi, "Prior edge inclusion probability")->capture_default_str();
    cmd->add_option("--h-beta", c.hyper.h_beta, "Coefficient prior variance scale")->capture_default_str();
    cmd->add_option("--a-sigma", c.hyper.a_sigma, "Inverse-gamma shape for the error variance")->capture_default_str();
    cmd->add_option("--b-sigma", c.hyper.b_sigma, "Inverse-gamma scale for the error variance")->capture_default_str();
    cmd->add_option("--ising-a", c.hyper.a, "Ising sparsity parameter")->capture_default_str();
    cmd->add_option("--ising-b", c.hyper.b, "Ising graph coupling parameter")->capture_default_str();
    cmd->add_option("--birth-variance", c.hyper.birth_variance, "Variance of the add-move coefficient proposal")
        ->capture_default_str();
    cmd->add_option("--walk-sd", c.hyper.walk_sd, "Within-model random-walk sd")->capture_default_str();
    cmd->add_option("-q,--q", c.hyper.q, "Target Bayesian FDR level")->capture_default_str();
    cmd->add_flag("--sigma2-slab-term,!--no-sigma2-slab-term", c.hyper.sigma2_slab_term,
                  "Include the coefficient slab in the sigma2 full conditional");

    cmd->add_option("--burn-in", c.burn_in, "Burn-in iterations")->capture_default_str();
    cmd->add_option("--iterations", c.iterations, "Kept draws per chain")->capture_default_str();
    cmd->add_option("--thin", c.thin, "Keep every k-th post-burn-in iteration")->capture_default_str();
    cmd->add_option("--chains", c.chains, "Independent chains (pooled)")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd->add_option("--add-delete-proposals", c.add_delete_proposals, "Add-delete proposals per iteration")
        ->capture_default_str();
    cmd->add_flag("--exchange-moves,!--no-exchange-moves", c.exchange_moves,
                  "Original/knockoff exchange proposal for active variables");
    cmd->add_flag("--random-scan,!--ordered-scan", c.random_scan, "Random column order in the precision sweep");
    cmd->add_option("--shrink", c.shrink, "Equicorrelated s-vector shrink factor in (0, 1)")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--statistic", c.statistic, "Bound statistic: sign or nonpositive")
        ->check(CLI::IsMember({"sign", "nonpositive"}))
        ->capture_default_str();
}

void add_data(CLI::App* cmd, bk::RunConfig& c) {
    cmd->add_option("-i,--input", c.input, "Input CSV (header row, comma separated)")->required();
    cmd->add_option("--response", c.response, "Response column")->capture_default_str();
    cmd->add_option("--event", c.event_column, "Event indicator column for aft mode (1 observed, 0 censored)")
        ->capture_default_str();
    cmd->add_option("--mode", c.mode, "linear or aft")->check(CLI::IsMember({"linear", "aft"}))->capture_default_str();
    cmd->add_flag("--log-response,!--no-log-response", c.log_response,
                  "In aft mode, take logs of the response times");
    cmd->add_flag("--center,!--no-center", c.center, "Center covariates (and the response in linear mode)");
    cmd->add_flag("--nonparanormal,!--no-nonparanormal", c.nonparanormal, "Rank-Gaussianize covariates");
    cmd->add_option("--covariates", c.covariates, "Covariate columns (default: all other columns)")->delimiter(',');
}

void add_scenario(CLI::App* cmd, bk::RunConfig& c) {
    cmd->add_option("--scenario", c.scenario, "Scenario: 1, 2, 3 or aft")
        ->check(CLI::IsMember({"1", "2", "3", "aft"}))
        ->capture_default_str();
    cmd->add_option("--replicates", c.replicates, "Replicate datasets")->capture_default_str();
    cmd->add_option("-n,--n", c.n, "Observations per dataset")->capture_default_str();
    cmd->add_option("-p,--p", c.p, "Covariates (scenarios 1 and 2)")->capture_default_str();
    cmd->add_option("--n-active", c.n_active, "Active covariates (scenarios 1 and 2)")->capture_default_str();
    cmd->add_option("--hubs", c.hubs, "Hubs (scenario 3 and aft)")->capture_default_str();
    cmd->add_option("--hub-size", c.hub_size, "Children per hub")->capture_default_str();
    cmd->add_option("--hub-coefficients", c.hub_coefficients, "Coefficients of the leading hubs")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--hub-correlation", c.hub_correlation, "Hub-child correlation")->capture_default_str();
    cmd->add_option("--censor-fraction", c.censor_fraction, "Expected censoring fraction (aft)")->capture_default_str();
    cmd->add_option("--structure-seed", c.structure_seed, "Seed for the scenario 2 graph and active set")
        ->capture_default_str();
    cmd->add_option("--methods", c.methods, "BayesKnock, Joint, KnockoffExact")->delimiter(',')->capture_default_str();
    cmd->add_option("--baseline-statistic", c.baseline_statistic, "Classical knockoff statistic: ridge or ols")
        ->check(CLI::IsMember({"ridge", "ols"}))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian model-X knockoff variable selection"};
    app.set_version_flag("--version", std::string(bk::kVersion));
    app.set_config("--config", "", "Read options from a TOML/INI file (sections per subcommand)");
    app.require_subcommand(1);

    bk::RunConfig cfg;

    auto* select = app.add_subcommand("select", "Fit a dataset and select variables at BFDR level q");
    add_data(select, cfg);
    add_shared(select, cfg);

    auto* simulate = app.add_subcommand("simulate", "Run replicates of a simulation scenario");
    add_scenario(simulate, cfg);
    add_shared(simulate, cfg);

    auto* sensitivity = app.add_subcommand("sensitivity", "Vary one hyperparameter over a grid");
    add_scenario(sensitivity, cfg);
    add_shared(sensitivity, cfg);
    sensitivity->add_option("--parameter", cfg.grid_parameter, "a, b, v0, v1, theta, xi, h_beta, a_sigma, b_sigma or q")
        ->capture_default_str();
    sensitivity->add_option("--values", cfg.grid_values, "Grid values")->delimiter(',')->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (select->parsed()) {
            cfg.verb = "select";
            const auto r = bk::run_select(cfg);
            std::cout << "selected " << r.selection.selected.size() << " of " << r.selection.upper_bound.size()
                      << " variables; report in " << cfg.output << '\n';
        } else if (simulate->parsed()) {
            cfg.verb = "simulate";
            const auto t = bk::run_simulate(cfg);
            for (const auto& s : t.summary) {
                std::cout << s.method << ": FDR " << s.mean[0] << ", TPR " << s.mean[1] << " over " << s.succeeded
                          << " replicates (" << s.failed << " failed)\n";
            }
        } else {
            cfg.verb = "sensitivity";
            const auto rows = bk::run_sensitivity(cfg);
            for (const auto& r : rows) {
                std::cout << r.point.name << '=' << r.point.value << ": FDR " << r.summary.mean[0] << ", TPR "
                          << r.summary.mean[1] << ", Frobenius " << r.summary.mean[4] << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
