#pragma once

// Metropolis-within-Gibbs driver. Per iteration:
//   1. add-delete proposal(s) followed by a within-model refresh of active coefficients
//   2. sigma2 from its inverse-gamma conditional
//   3. Omega column sweep then G (skipped when Omega is held fixed)
//      knockoff params (s, A, Gamma map) recomputed from the new Omega
//   4. U from its full conditional
//   5. censored responses (AFT mode)

#include "bayesknock/common.hpp"
#include "bayesknock/data.hpp"
#include "bayesknock/ggm.hpp"
#include "bayesknock/knockoff.hpp"
#include "bayesknock/parallel.hpp"
#include "bayesknock/regression.hpp"

#include <optional>

namespace bayesknock {

struct ChainConfig {
    int burn_in = 8000;
    int iterations = 8000;  ///< kept draws after burn-in (after thinning)
    int thin = 1;
    std::uint64_t seed = 1;
    ResponseMode mode = ResponseMode::Linear;
    int add_delete_proposals = 1;
    /// original <-> knockoff exchange proposal for each active variable every iteration
    bool exchange_moves = true;
    bool random_scan = false;
    double shrink = kDefaultShrink;
    bool use_knockoffs = true;
    /// Known precision matrix: Omega and G are held fixed (G = support of Omega).
    std::optional<Matrix> fixed_omega;
    bool store_graph_draws = false;
    bool check_invariants = false;

    void validate() const {
        require(burn_in >= 0, "burn-in must be nonnegative");
        require(iterations >= 0, "iterations must be nonnegative");
        require(thin >= 1, "thin must be at least 1");
        require(add_delete_proposals >= 1, "at least one add-delete proposal per iteration is required");
        require(shrink > 0.0 && shrink < 1.0, "shrink must lie in (0, 1)");
    }
};

struct ChainDiagnostics {
    long add_proposed = 0;
    long add_accepted = 0;
    long delete_proposed = 0;
    long delete_accepted = 0;
    long walk_proposed = 0;
    long walk_accepted = 0;
    long exchange_proposed = 0;
    long exchange_accepted = 0;
    long invariant_checks = 0;
    long censored_violations = 0;

    double rate(long acc, long prop) const { return prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0; }
};

/// Post-burn-in draws of one chain (or several pooled by concatenation).
struct PosteriorDraws {
    Matrix beta;        ///< T x p
    Matrix beta_tilde;  ///< T x p
    Vector sigma2;      ///< T
    Matrix edge_ppi;    ///< p x p
    Matrix omega_mean;  ///< p x p
    std::vector<GraphAdjacency> graphs;  ///< only with store_graph_draws
    std::vector<Index> chain_lengths;    ///< draws contributed by each chain
    std::vector<std::uint64_t> seeds;
    ChainDiagnostics diagnostics;

    Index draws() const { return beta.rows(); }
    Index p() const { return beta.cols(); }
};

/// Starting state: gamma = 0, beta = beta~ = 0, sigma2 = sample variance of y (1 if degenerate),
/// U from its prior, censored responses pushed above their truncation points.
inline RegressionState initial_state(const Dataset& data, const KnockoffParams* kp, Rng& rng) {
    const Index n = data.n();
    const double var = (data.y.array() - data.y.mean()).square().sum() / static_cast<double>(n - 1);
    RegressionState st = RegressionState::empty(n, data.p(), data.y, var > 0.0 && std::isfinite(var) ? var : 1.0);
    if (kp != nullptr) {
        st.u = sample_mvn_rows(kp->a_lower, n, rng);
    }
    if (data.event) {
        const double sd = std::sqrt(st.sigma2);
        for (Index i = 0; i < n; ++i) {
            if ((*data.event)[static_cast<std::size_t>(i)] == 0) {
                st.y_latent(i) = truncated_normal_below(0.0, sd, data.y(i), rng);
            }
        }
    }
    return st;
}

inline GraphAdjacency support_graph(const Matrix& omega, double tol = 1e-12) {
    GraphAdjacency g(omega.rows());
    for (Index k = 1; k < omega.rows(); ++k) {
        for (Index i = 0; i < k; ++i) {
            g.set_edge(i, k, std::abs(omega(i, k)) > tol);
        }
    }
    return g;
}

inline PosteriorDraws run_chain(const Dataset& data, const RegressionHyper& hyper, const GgmHyper& ggm,
                                const ChainConfig& config, const SamplerSwitches& base_switches = {}) {
    data.validate();
    hyper.validate();
    ggm.validate();
    config.validate();
    if (config.mode == ResponseMode::Aft) {
        require(data.censored(), "AFT mode needs censoring indicators");
    } else {
        require(!data.censored(), "linear mode does not accept censoring indicators");
    }
    if (config.iterations == 0) {
        throw Error("no posterior draws");
    }

    const Index n = data.n();
    const Index p = data.p();
    SamplerSwitches sw = base_switches;
    sw.use_knockoffs = config.use_knockoffs;

    Rng rng(config.seed);
    const Matrix scatter = data.x.transpose() * data.x;

    Matrix omega = Matrix::Identity(p, p);
    GraphAdjacency graph(p);
    const bool fixed = config.fixed_omega.has_value();
    if (fixed) {
        require(config.fixed_omega->rows() == p && config.fixed_omega->cols() == p,
                "fixed precision matrix has the wrong dimension");
        omega = PrecisionMatrix(*config.fixed_omega).matrix();
        graph = support_graph(omega);
    }
    Matrix sigma = spd_inverse(omega, "precision matrix not positive definite");

    std::optional<KnockoffParams> kp;
    if (sw.use_knockoffs) {
        kp = make_knockoff_params(PrecisionMatrix(omega), config.shrink);
    }
    RegressionState st = initial_state(data, kp ? &*kp : nullptr, rng);
    DesignCache cache = make_design_cache(data, kp ? &*kp : nullptr, st);

    PosteriorDraws out;
    out.beta.resize(config.iterations, p);
    out.beta_tilde.resize(config.iterations, p);
    out.sigma2.resize(config.iterations);
    out.seeds.push_back(config.seed);
    out.chain_lengths.push_back(config.iterations);
    GraphAccumulator graph_acc(p);
    Matrix omega_sum = Matrix::Zero(p, p);
    ChainDiagnostics& diag = out.diagnostics;

    const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.iterations) * config.thin;
    Index kept = 0;
    for (long it = 0; it < total; ++it) {
        for (int k = 0; k < config.add_delete_proposals; ++k) {
            const AddDeleteOutcome move = step_add_delete(st, cache, data, graph, hyper, rng, sw);
            (move.birth ? diag.add_proposed : diag.delete_proposed) += 1;
            if (move.accepted) {
                (move.birth ? diag.add_accepted : diag.delete_accepted) += 1;
            }
        }
        const Index active = st.active_count();
        if (config.exchange_moves && sw.use_knockoffs) {
            diag.exchange_proposed += active;
            diag.exchange_accepted += step_exchange(st, cache, data, *kp, rng, sw);
        }
        diag.walk_proposed += active;
        diag.walk_accepted += step_within_model(st, cache, data, hyper, rng, sw);

        update_sigma2(st, cache, hyper, rng);

        if (!fixed) {
            sweep_omega(scatter, static_cast<double>(n), omega, sigma, graph, ggm, rng, config.random_scan);
            graph = update_graph(omega, ggm, rng);
            if (sw.use_knockoffs) {
                kp = make_knockoff_params(PrecisionMatrix(symmetrize(omega)), config.shrink);
                refresh_knockoff_design(cache, data, *kp, st);
                refresh_residual(cache, data, st);
            }
        }

        if (sw.use_knockoffs) {
            update_U(st, cache, data, *kp, rng);
        }
        if (config.mode == ResponseMode::Aft) {
            update_censored_y(st, cache, data, rng);
            for (Index i = 0; i < n; ++i) {
                if ((*data.event)[static_cast<std::size_t>(i)] == 0 && !(st.y_latent(i) > data.y(i))) {
                    ++diag.censored_violations;
                }
            }
        }

        if (!cache.residual.allFinite() || !std::isfinite(st.sigma2)) {
            throw Error("non-finite likelihood at iteration " + std::to_string(it + 1));
        }
        if (config.check_invariants) {
            check_state(st, data);
            ++diag.invariant_checks;
        }

        if (it >= config.burn_in && (it - config.burn_in) % config.thin == config.thin - 1) {
            out.beta.row(kept) = st.beta.transpose();
            out.beta_tilde.row(kept) = st.beta_tilde.transpose();
            out.sigma2(kept) = st.sigma2;
            graph_acc.add(graph);
            omega_sum += omega;
            if (config.store_graph_draws) {
                out.graphs.push_back(graph);
            }
            ++kept;
        }
    }
    out.edge_ppi = graph_acc.ppi();
    out.omega_mean = omega_sum / static_cast<double>(kept);
    return out;
}

/// Concatenates draws; PPI and Omega means are weighted by chain length.
inline PosteriorDraws pool_draws(const std::vector<PosteriorDraws>& chains) {
    require(!chains.empty(), "no chains to pool");
    const Index p = chains.front().p();
    Index total = 0;
    for (const auto& c : chains) {
        require(c.p() == p, "chains have different dimensions");
        total += c.draws();
    }
    PosteriorDraws out;
    out.beta.resize(total, p);
    out.beta_tilde.resize(total, p);
    out.sigma2.resize(total);
    out.edge_ppi = Matrix::Zero(p, p);
    out.omega_mean = Matrix::Zero(p, p);
    Index row = 0;
    for (const auto& c : chains) {
        const Index t = c.draws();
        out.beta.middleRows(row, t) = c.beta;
        out.beta_tilde.middleRows(row, t) = c.beta_tilde;
        out.sigma2.segment(row, t) = c.sigma2;
        const double w = static_cast<double>(t) / static_cast<double>(total);
        out.edge_ppi += w * c.edge_ppi;
        out.omega_mean += w * c.omega_mean;
        out.graphs.insert(out.graphs.end(), c.graphs.begin(), c.graphs.end());
        out.chain_lengths.push_back(t);
        out.seeds.insert(out.seeds.end(), c.seeds.begin(), c.seeds.end());
        auto& d = out.diagnostics;
        const auto& e = c.diagnostics;
        d.add_proposed += e.add_proposed;
        d.add_accepted += e.add_accepted;
        d.delete_proposed += e.delete_proposed;
        d.delete_accepted += e.delete_accepted;
        d.walk_proposed += e.walk_proposed;
        d.walk_accepted += e.walk_accepted;
        d.invariant_checks += e.invariant_checks;
        d.censored_violations += e.censored_violations;
        row += t;
    }
    return out;
}

/// Independent chains with seeds derive_seed(config.seed, c); results are in chain order
/// whatever the thread count.
inline std::vector<PosteriorDraws> run_chains(const Dataset& data, const RegressionHyper& hyper, const GgmHyper& ggm,
                                              const ChainConfig& config, int chains, unsigned threads = 0,
                                              const SamplerSwitches& sw = {}) {
    require(chains >= 1, "at least one chain is required");
    std::vector<PosteriorDraws> out(static_cast<std::size_t>(chains));
    parallel_for(out.size(), threads, [&](std::size_t c) {
        ChainConfig cfg = config;
        cfg.seed = chains == 1 ? config.seed : derive_seed(config.seed, c);
        out[c] = run_chain(data, hyper, ggm, cfg, sw);
    });
    return out;
}

}  // namespace bayesknock
