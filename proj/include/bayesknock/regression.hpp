#pragma once

// Regression half of the sampler. Conditional on the latent knockoff noise U the model is
//
//   y = X beta + X~ beta~ + eps,   X~ = X (I - Omega diag(s)) + U,   eps ~ N(0, sigma2 I),
//
// with the joint spike-and-slab prior on (beta_j, beta~_j) indexed by gamma_j = delta_j + delta~_j
// and an Ising prior on gamma. All updates keep a residual vector in sync so one add-delete
// proposal costs O(n).

#include "bayesknock/common.hpp"
#include "bayesknock/data.hpp"
#include "bayesknock/distributions.hpp"
#include "bayesknock/ggm.hpp"
#include "bayesknock/knockoff.hpp"
#include "bayesknock/linalg.hpp"

namespace bayesknock {

struct RegressionHyper {
    double h_beta = 1.0;
    double a_sigma = 2.0;
    double b_sigma = 2.0;
    double a = 0.5;  ///< Ising sparsity
    double b = 0.5;  ///< Ising graph coupling
    double birth_variance = 0.5;  ///< variance of the N(0, .) proposal for a newly added coefficient
    double walk_sd = 0.25;  ///< within-model random-walk proposal sd
    double q = 0.1;  ///< target BFDR level
    /// Adds the slab's sigma2 dependence (|gamma|/2 to the shape, sum coef^2 / (2 h_beta) to the
    /// rate) to the sigma2 conditional. Off by default.
    bool sigma2_slab_term = false;

    void validate() const {
        require(h_beta > 0.0, "h_beta must be positive");
        require(a_sigma > 0.0 && b_sigma > 0.0, "a_sigma and b_sigma must be positive");
        require(birth_variance > 0.0, "birth proposal variance must be positive");
        require(walk_sd > 0.0, "within-model proposal sd must be positive");
        require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
        require(std::isfinite(a) && std::isfinite(b), "Ising parameters must be finite");
    }
};

/// Model-variant and test-harness switches.
struct SamplerSwitches {
    /// false runs the joint model without knockoff latent variables (beta~ fixed at 0).
    bool use_knockoffs = true;
    /// true drops the likelihood from every MH ratio, so the chain targets the prior.
    bool prior_only = false;
};

struct RegressionState {
    Vector beta;
    Vector beta_tilde;
    std::vector<std::uint8_t> delta;
    std::vector<std::uint8_t> delta_tilde;
    std::vector<std::uint8_t> gamma;
    double sigma2 = 1.0;
    LatentU u;
    Vector y_latent;

    static RegressionState empty(Index n, Index p, const Vector& y, double sigma2) {
        RegressionState st;
        st.beta = Vector::Zero(p);
        st.beta_tilde = Vector::Zero(p);
        st.delta.assign(static_cast<std::size_t>(p), 0);
        st.delta_tilde.assign(static_cast<std::size_t>(p), 0);
        st.gamma.assign(static_cast<std::size_t>(p), 0);
        st.sigma2 = sigma2;
        st.u = Matrix::Zero(n, p);
        st.y_latent = y;
        return st;
    }

    Index p() const { return beta.size(); }

    Index active_count() const {
        Index c = 0;
        for (auto g : gamma) {
            c += g;
        }
        return c;
    }
};

/// Throws on any violated state invariant.
inline void check_state(const RegressionState& st, const Dataset& data) {
    const Index p = st.p();
    require(st.sigma2 > 0.0 && std::isfinite(st.sigma2), "invariant: sigma2 must be positive");
    for (Index j = 0; j < p; ++j) {
        const auto k = static_cast<std::size_t>(j);
        require(st.delta[k] + st.delta_tilde[k] == st.gamma[k], "invariant: gamma = delta + delta_tilde");
        require(st.gamma[k] <= 1, "invariant: delta and delta_tilde both active");
        require(st.delta[k] == 1 || st.beta(j) == 0.0, "invariant: beta nonzero with delta = 0");
        require(st.delta_tilde[k] == 1 || st.beta_tilde(j) == 0.0, "invariant: beta_tilde nonzero with delta_tilde = 0");
    }
    if (data.event) {
        for (Index i = 0; i < data.n(); ++i) {
            if ((*data.event)[static_cast<std::size_t>(i)] == 1) {
                require(st.y_latent(i) == data.y(i), "invariant: uncensored latent response must equal log time");
            } else {
                require(st.y_latent(i) > data.y(i), "invariant: censored latent response must exceed log time");
            }
        }
    }
}

/// Quantities derived from (data, knockoff params, state) that the updates keep in sync.
struct DesignCache {
    Matrix gamma_mean;  ///< X (I - Omega diag(s))
    Matrix x_tilde;     ///< gamma_mean + U
    Vector x_sq;        ///< squared column norms of X
    Vector x_tilde_sq;  ///< squared column norms of x_tilde
    Vector residual;    ///< y_latent - X beta - x_tilde beta_tilde
};

inline void refresh_residual(DesignCache& cache, const Dataset& data, const RegressionState& st) {
    cache.residual = st.y_latent - data.x * st.beta;
    if (cache.x_tilde.size() > 0) {
        cache.residual -= cache.x_tilde * st.beta_tilde;
    }
}

inline void refresh_knockoff_design(DesignCache& cache, const Dataset& data, const KnockoffParams& kp,
                                    const RegressionState& st) {
    cache.gamma_mean = data.x * kp.gamma_map;
    cache.x_tilde = cache.gamma_mean + st.u;
    cache.x_tilde_sq = cache.x_tilde.colwise().squaredNorm().transpose();
}

/// Full rebuild. kp may be null when knockoffs are disabled.
inline DesignCache make_design_cache(const Dataset& data, const KnockoffParams* kp, const RegressionState& st) {
    DesignCache cache;
    cache.x_sq = data.x.colwise().squaredNorm().transpose();
    if (kp != nullptr) {
        refresh_knockoff_design(cache, data, *kp, st);
    }
    refresh_residual(cache, data, st);
    return cache;
}

inline double gaussian_loglik_from_rss(double rss, Index n, double sigma2) {
    return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * rss / sigma2;
}

/// log p(y | X, U, beta, beta~, Omega, sigma2), computed from scratch.
inline double loglik_conditional(const Vector& y, const Matrix& x, const LatentU& u, const Vector& beta,
                                 const Vector& beta_tilde, const KnockoffParams& kp, double sigma2) {
    require(x.rows() == y.size() && u.rows() == y.size(), "row counts disagree");
    require(x.cols() == beta.size() && u.cols() == beta.size() && beta_tilde.size() == beta.size(),
            "coefficient dimension disagrees with covariates");
    require(sigma2 > 0.0, "sigma2 must be positive");
    const Vector mean = x * (beta + kp.gamma_map * beta_tilde) + u * beta_tilde;
    return gaussian_loglik_from_rss((y - mean).squaredNorm(), y.size(), sigma2);
}

/// a 1^T gamma + b gamma^T G gamma, the unnormalized Ising log mass. gamma^T G gamma counts
/// each selected edge twice since G is the full symmetric adjacency.
inline double ising_log_prior(const std::vector<std::uint8_t>& gamma, const GraphAdjacency& g, double a, double b) {
    const Index p = static_cast<Index>(gamma.size());
    require(g.dim() == p, "graph dimension does not match gamma");
    double linear = 0.0;
    double quadratic = 0.0;
    for (Index i = 0; i < p; ++i) {
        if (gamma[static_cast<std::size_t>(i)] == 0) {
            continue;
        }
        linear += 1.0;
        for (Index k = 0; k < p; ++k) {
            if (gamma[static_cast<std::size_t>(k)] != 0 && g.edge(i, k)) {
                quadratic += 1.0;
            }
        }
    }
    return a * linear + b * quadratic;
}

/// Change in the Ising log mass when gamma_j goes from 0 to 1 (other entries fixed).
inline double ising_gain(const std::vector<std::uint8_t>& gamma, const GraphAdjacency& g, Index j, double a,
                         double b) {
    double neighbours = 0.0;
    for (Index k = 0; k < g.dim(); ++k) {
        if (k != j && gamma[static_cast<std::size_t>(k)] != 0 && g.edge(j, k)) {
            neighbours += 1.0;
        }
    }
    return a + 2.0 * b * neighbours;
}

/// log p(beta_j, beta~_j | delta_j, delta~_j, sigma2) + log p(delta_j, delta~_j | gamma_j):
/// the slab density of the single active coefficient times the 1/2 multinomial mass.
inline double log_coefficient_prior(double beta_j, double beta_tilde_j, bool delta_j, bool delta_tilde_j,
                                    double sigma2, double h_beta) {
    require(!(delta_j && delta_tilde_j), "delta and delta_tilde cannot both be 1");
    if (delta_j) {
        return beta_tilde_j == 0.0 ? std::log(0.5) + log_normal_pdf(beta_j, 0.0, h_beta * sigma2)
                                   : -std::numeric_limits<double>::infinity();
    }
    if (delta_tilde_j) {
        return beta_j == 0.0 ? std::log(0.5) + log_normal_pdf(beta_tilde_j, 0.0, h_beta * sigma2)
                             : -std::numeric_limits<double>::infinity();
    }
    return (beta_j == 0.0 && beta_tilde_j == 0.0) ? 0.0 : -std::numeric_limits<double>::infinity();
}

namespace detail {

inline Eigen::Ref<const Vector> design_column(const DesignCache& cache, const Dataset& data, Index j, bool knockoff) {
    if (knockoff) {
        return cache.x_tilde.col(j);
    }
    return data.x.col(j);
}

inline double column_sq(const DesignCache& cache, Index j, bool knockoff) {
    return knockoff ? cache.x_tilde_sq(j) : cache.x_sq(j);
}

/// Change in RSS when the coefficient on a design column moves by delta.
inline double rss_change(const DesignCache& cache, const Dataset& data, Index j, bool knockoff, double delta) {
    const double cr = design_column(cache, data, j, knockoff).dot(cache.residual);
    return -2.0 * delta * cr + delta * delta * column_sq(cache, j, knockoff);
}

inline void apply_coefficient_change(DesignCache& cache, const Dataset& data, Index j, bool knockoff,
                                     double delta) {
    cache.residual -= delta * design_column(cache, data, j, knockoff);
}

}  // namespace detail

/// Log MH ratio for adding coefficient `value` on variable j (original or knockoff) from a state
/// with gamma_j = 0. Includes the Hastings correction for the N(0, birth_variance) proposal;
/// the 1/2 original-vs-knockoff choice cancels against the 1/2 multinomial prior mass.
inline double log_ratio_add(const RegressionState& st, const DesignCache& cache, const Dataset& data, Index j,
                            bool knockoff, double value, const GraphAdjacency& g, const RegressionHyper& hyper,
                            const SamplerSwitches& sw = {}) {
    const double lik = sw.prior_only ? 0.0 : -detail::rss_change(cache, data, j, knockoff, value) / (2.0 * st.sigma2);
    return lik + log_normal_pdf(value, 0.0, hyper.h_beta * st.sigma2) -
           log_normal_pdf(value, 0.0, hyper.birth_variance) + ising_gain(st.gamma, g, j, hyper.a, hyper.b);
}

/// Log MH ratio for deleting the active coefficient of variable j. Exactly the negative of the
/// matching add ratio evaluated at the post-deletion state.
inline double log_ratio_delete(const RegressionState& st, const DesignCache& cache, const Dataset& data, Index j,
                               const GraphAdjacency& g, const RegressionHyper& hyper, const SamplerSwitches& sw = {}) {
    const auto k = static_cast<std::size_t>(j);
    const bool knockoff = st.delta_tilde[k] == 1;
    const double value = knockoff ? st.beta_tilde(j) : st.beta(j);
    const double lik = sw.prior_only ? 0.0 : -detail::rss_change(cache, data, j, knockoff, -value) / (2.0 * st.sigma2);
    return lik - log_normal_pdf(value, 0.0, hyper.h_beta * st.sigma2) +
           log_normal_pdf(value, 0.0, hyper.birth_variance) - ising_gain(st.gamma, g, j, hyper.a, hyper.b);
}

inline void apply_add(RegressionState& st, DesignCache& cache, const Dataset& data, Index j, bool knockoff,
                      double value) {
    const auto k = static_cast<std::size_t>(j);
    if (knockoff) {
        st.delta_tilde[k] = 1;
        st.beta_tilde(j) = value;
    } else {
        st.delta[k] = 1;
        st.beta(j) = value;
    }
    st.gamma[k] = 1;
    detail::apply_coefficient_change(cache, data, j, knockoff, value);
}

inline void apply_delete(RegressionState& st, DesignCache& cache, const Dataset& data, Index j) {
    const auto k = static_cast<std::size_t>(j);
    const bool knockoff = st.delta_tilde[k] == 1;
    const double value = knockoff ? st.beta_tilde(j) : st.beta(j);
    detail::apply_coefficient_change(cache, data, j, knockoff, -value);
    st.beta(j) = 0.0;
    st.beta_tilde(j) = 0.0;
    st.delta[k] = 0;
    st.delta_tilde[k] = 0;
    st.gamma[k] = 0;
}

struct AddDeleteOutcome {
    Index variable = 0;
    bool birth = false;  ///< true for an add proposal, false for a delete
    bool accepted = false;
};

/// One add-delete proposal on a uniformly chosen variable.
inline AddDeleteOutcome step_add_delete(RegressionState& st, DesignCache& cache, const Dataset& data,
                                        const GraphAdjacency& g, const RegressionHyper& hyper, Rng& rng,
                                        const SamplerSwitches& sw = {}) {
    AddDeleteOutcome out;
    out.variable = rng.uniform_int(0, static_cast<int>(st.p()) - 1);
    const Index j = out.variable;
    if (st.gamma[static_cast<std::size_t>(j)] == 1) {
        const double log_rho = log_ratio_delete(st, cache, data, j, g, hyper, sw);
        if (std::log(rng.uniform()) < log_rho) {
            apply_delete(st, cache, data, j);
            out.accepted = true;
        }
        return out;
    }
    out.birth = true;
    const bool knockoff = sw.use_knockoffs && rng.bernoulli(0.5);
    const double value = rng.normal(0.0, std::sqrt(hyper.birth_variance));
    const double log_rho = log_ratio_add(st, cache, data, j, knockoff, value, g, hyper, sw);
    if (std::log(rng.uniform()) < log_rho) {
        apply_add(st, cache, data, j, knockoff, value);
        out.accepted = true;
    }
    return out;
}

/// log p(y | X, beta, beta~, Omega, sigma2) with U integrated out: rows are independent
/// N(x_i beta + Gamma_i beta~, sigma2 + beta~^T A beta~).
inline double loglik_marginal_u(const Vector& y, const Matrix& x, const Vector& beta, const Vector& beta_tilde,
                                const KnockoffParams& kp, double sigma2) {
    const Vector r = y - x * (beta + kp.gamma_map * beta_tilde);
    return gaussian_loglik_from_rss(r.squaredNorm(), y.size(), sigma2 + beta_tilde.dot(kp.a * beta_tilde));
}

/// Running quantities for exchange proposals under the U-marginal likelihood.
struct ExchangeState {
    Vector r0;   ///< y - X beta - Gamma beta~
    Vector ab;   ///< A beta~
    double q = 0.0;  ///< beta~^T A beta~
};

inline ExchangeState make_exchange_state(const RegressionState& st, const DesignCache& cache, const Dataset& data,
                                         const KnockoffParams& kp) {
    ExchangeState ex;
    ex.r0 = st.y_latent - data.x * st.beta - cache.gamma_mean * st.beta_tilde;
    ex.ab = kp.a * st.beta_tilde;
    ex.q = st.beta_tilde.dot(ex.ab);
    return ex;
}

/// Log MH ratio, U integrated out, for moving the active coefficient of j to the other slot
/// with the same value. The move is an involution and the coefficient prior, multinomial mass
/// and Ising term are symmetric in the swap, so only the marginal likelihood remains.
inline double log_ratio_exchange(const RegressionState& st, const DesignCache& cache, const Dataset& data,
                                 const KnockoffParams& kp, const ExchangeState& ex, Index j) {
    const auto k = static_cast<std::size_t>(j);
    const bool knockoff = st.delta_tilde[k] == 1;
    const double v = knockoff ? st.beta_tilde(j) : st.beta(j);
    const double n = static_cast<double>(data.n());
    const double sign = knockoff ? -1.0 : 1.0;  // beta~_j gains (+) or loses (-) v
    const double q_new = ex.q + sign * 2.0 * v * ex.ab(j) + v * v * kp.a(j, j);
    const double cr = cache.gamma_mean.col(j).dot(ex.r0) - data.x.col(j).dot(ex.r0);
    const double dsq = (cache.gamma_mean.col(j) - data.x.col(j)).squaredNorm();
    // r0' = r0 - sign v (Gamma_j - X_j)
    const double rss_old = ex.r0.squaredNorm();
    const double rss_new = rss_old - 2.0 * sign * v * cr + v * v * dsq;
    const double v_old = st.sigma2 + ex.q;
    const double v_new = st.sigma2 + q_new;
    return -0.5 * n * (std::log(v_new) - std::log(v_old)) - 0.5 * rss_new / v_new + 0.5 * rss_old / v_old;
}

/// Swaps slots for j and keeps `ex` in sync. The design cache residual is left stale; the
/// caller refreshes it.
inline void apply_exchange(RegressionState& st, const DesignCache& cache, const Dataset& data, const KnockoffParams& kp,
                           ExchangeState& ex, Index j) {
    const auto k = static_cast<std::size_t>(j);
    const bool knockoff = st.delta_tilde[k] == 1;
    const double v = knockoff ? st.beta_tilde(j) : st.beta(j);
    const double sign = knockoff ? -1.0 : 1.0;
    ex.q += sign * 2.0 * v * ex.ab(j) + v * v * kp.a(j, j);
    ex.ab += sign * v * kp.a.col(j);
    ex.r0 -= sign * v * (cache.gamma_mean.col(j) - data.x.col(j));
    st.beta(j) = knockoff ? v : 0.0;
    st.beta_tilde(j) = knockoff ? 0.0 : v;
    st.delta[k] = knockoff ? 1 : 0;
    st.delta_tilde[k] = knockoff ? 0 : 1;
}

inline void update_U(RegressionState& st, DesignCache& cache, const Dataset& data, const KnockoffParams& kp,
                     Rng& rng);

/// One exchange proposal for every active variable with U integrated out, followed by a fresh
/// draw of U from its full conditional, so together they form a blocked update of
/// ((beta, beta~, delta, delta~), U). Returns the accepted count.
inline int step_exchange(RegressionState& st, DesignCache& cache, const Dataset& data, const KnockoffParams& kp,
                         Rng& rng, const SamplerSwitches& sw = {}) {
    if (!sw.use_knockoffs) {
        return 0;
    }
    ExchangeState ex = make_exchange_state(st, cache, data, kp);
    int accepted = 0;
    for (Index j = 0; j < st.p(); ++j) {
        if (st.gamma[static_cast<std::size_t>(j)] == 0) {
            continue;
        }
        const double log_rho = sw.prior_only ? 0.0 : log_ratio_exchange(st, cache, data, kp, ex, j);
        if (std::log(rng.uniform()) < log_rho) {
            apply_exchange(st, cache, data, kp, ex, j);
            ++accepted;
        }
    }
    refresh_residual(cache, data, st);
    update_U(st, cache, data, kp, rng);
    return accepted;
}

/// Random-walk refresh of every active coefficient; indicators are untouched. The normal
/// proposal is symmetric, so the ratio is likelihood times slab prior. Returns accepted count.
inline int step_within_model(RegressionState& st, DesignCache& cache, const Dataset& data,
                             const RegressionHyper& hyper, Rng& rng, const SamplerSwitches& sw = {}) {
    int accepted = 0;
    const double slab = hyper.h_beta * st.sigma2;
    for (Index j = 0; j < st.p(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        if (st.gamma[k] == 0) {
            continue;
        }
        const bool knockoff = st.delta_tilde[k] == 1;
        double& coef = knockoff ? st.beta_tilde(j) : st.beta(j);
        const double step = hyper.walk_sd * rng.normal();
        const double proposed = coef + step;
        const double lik = sw.prior_only ? 0.0 : -detail::rss_change(cache, data, j, knockoff, step) / (2.0 * st.sigma2);
        const double log_rho = lik + log_normal_pdf(proposed, 0.0, slab) - log_normal_pdf(coef, 0.0, slab);
        if (std::log(rng.uniform()) < log_rho) {
            detail::apply_coefficient_change(cache, data, j, knockoff, step);
            coef = proposed;
            if (coef == 0.0) {
                // measure-zero, but a zero active coefficient would break the indicator invariant
                coef = std::numeric_limits<double>::denorm_min();
            }
            ++accepted;
        }
    }
    return accepted;
}

/// sigma2 ~ IG(a_sigma + n/2, b_sigma + RSS/2) with RSS from the current mean structure.
inline double update_sigma2(RegressionState& st, const DesignCache& cache, const RegressionHyper& hyper, Rng& rng) {
    double shape = hyper.a_sigma + 0.5 * static_cast<double>(cache.residual.size());
    double rate = hyper.b_sigma + 0.5 * cache.residual.squaredNorm();
    if (hyper.sigma2_slab_term) {
        shape += 0.5 * static_cast<double>(st.active_count());
        rate += 0.5 * (st.beta.squaredNorm() + st.beta_tilde.squaredNorm()) / hyper.h_beta;
    }
    st.sigma2 = 1.0 / rng.gamma(shape, rate);
    return st.sigma2;
}

/// Sigma_U = (A^{-1} + beta~ beta~^T / sigma2)^{-1} via Sherman-Morrison:
/// A - (A beta~)(A beta~)^T / (sigma2 + beta~^T A beta~).
inline Matrix u_conditional_covariance(const Matrix& a, const Vector& beta_tilde, double sigma2) {
    const Vector ab = a * beta_tilde;
    return symmetrize(a - ab * ab.transpose() / (sigma2 + beta_tilde.dot(ab)));
}

/// mu_i = Sigma_U beta~ (y_i - x_i beta - Gamma_i beta~) / sigma2, stacked by row.
inline Matrix u_conditional_mean(const Matrix& a, const Vector& beta_tilde, double sigma2,
                                 const Vector& partial_residual) {
    const Vector gain = u_conditional_covariance(a, beta_tilde, sigma2) * beta_tilde / sigma2;
    return partial_residual * gain.transpose();
}

/// Draws every row of U from its full conditional and resyncs the cache.
inline void update_U(RegressionState& st, DesignCache& cache, const Dataset& data, const KnockoffParams& kp,
                     Rng& rng) {
    const Index n = data.n();
    if (st.beta_tilde.isZero(0.0)) {
        st.u = sample_mvn_rows(kp.a_lower, n, rng);
    } else {
        const Vector partial = cache.residual + st.u * st.beta_tilde;
        const Matrix cov = u_conditional_covariance(kp.a, st.beta_tilde, st.sigma2);
        const Matrix lower = cholesky_lower(cov, "internal error: U conditional covariance not positive definite");
        st.u = u_conditional_mean(kp.a, st.beta_tilde, st.sigma2, partial) + sample_mvn_rows(lower, n, rng);
    }
    cache.x_tilde = cache.gamma_mean + st.u;
    cache.x_tilde_sq = cache.x_tilde.colwise().squaredNorm().transpose();
    refresh_residual(cache, data, st);
}

/// Data augmentation for censored rows: y_i ~ N(fitted_i, sigma2) truncated to (log T*_i, inf).
inline void update_censored_y(RegressionState& st, DesignCache& cache, const Dataset& data, Rng& rng) {
    if (!data.event) {
        return;
    }
    const double sd = std::sqrt(st.sigma2);
    for (Index i = 0; i < data.n(); ++i) {
        if ((*data.event)[static_cast<std::size_t>(i)] == 1) {
            continue;
        }
        const double fitted = st.y_latent(i) - cache.residual(i);
        const double draw = truncated_normal_below(fitted, sd, data.y(i), rng);
        st.y_latent(i) = draw;
        cache.residual(i) = draw - fitted;
    }
}

}  // namespace bayesknock
