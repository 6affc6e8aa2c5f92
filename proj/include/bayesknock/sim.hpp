#pragma once

// Simulation harness: scenario generators, selection and graph metrics, the classical
// single-draw model-X knockoff filter, and replicate / sensitivity runners.

#include "bayesknock/chain.hpp"
#include "bayesknock/common.hpp"
#include "bayesknock/data.hpp"
#include "bayesknock/fdr.hpp"
#include "bayesknock/ggm.hpp"
#include "bayesknock/knockoff.hpp"
#include "bayesknock/linalg.hpp"
#include "bayesknock/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <optional>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace bayesknock {

// -------------------------------------------------------------------------------------------------
//     Scenarios
// -------------------------------------------------------------------------------------------------

enum class ScenarioId { S1, S2, S3, Aft };

inline std::string to_string(ScenarioId id) {
    switch (id) {
        case ScenarioId::S1: return "1";
        case ScenarioId::S2: return "2";
        case ScenarioId::S3: return "3";
        case ScenarioId::Aft: return "aft";
    }
    return "?";
}

inline ScenarioId parse_scenario(const std::string& s) {
    if (s == "1") return ScenarioId::S1;
    if (s == "2") return ScenarioId::S2;
    if (s == "3") return ScenarioId::S3;
    if (s == "aft") return ScenarioId::Aft;
    throw Error("unknown scenario '" + s + "' (expected 1, 2, 3 or aft)");
}

struct ScenarioSpec {
    ScenarioId id = ScenarioId::S1;
    int n = 200;
    int p = 30;          ///< scenarios 1 and 2
    int n_active = 6;    ///< scenarios 1 and 2
    int hubs = 40;       ///< scenario 3 / aft
    int hub_size = 5;    ///< children per hub
    std::vector<double> hub_coefficients{5.0, -5.0, 3.0, -3.0};
    double hub_child_correlation = 0.7;
    double censor_fraction = 0.25;
    double edge_weight = -0.25;  ///< scenario 2 precision entry per edge before normalization
    std::uint64_t structure_seed = 20240601;  ///< scenario 2 graph and active set
    std::uint64_t seed = 1;

    static ScenarioSpec scenario1() { return {}; }
    static ScenarioSpec scenario2() {
        ScenarioSpec s;
        s.id = ScenarioId::S2;
        return s;
    }
    static ScenarioSpec scenario3() {
        ScenarioSpec s;
        s.id = ScenarioId::S3;
        return s;
    }
    static ScenarioSpec aft() {
        ScenarioSpec s;
        s.id = ScenarioId::Aft;
        return s;
    }

    int dimension() const {
        return (id == ScenarioId::S1 || id == ScenarioId::S2) ? p : hubs * (hub_size + 1);
    }
};

/// A generated replicate together with everything needed to score a method on it.
struct SimData {
    Dataset data;
    Vector beta;
    IndexSet active;
    Matrix sigma;
    Matrix omega;
    GraphAdjacency graph;
    double error_variance = 1.0;
    Vector log_time;    ///< aft: true log event times
    Vector log_censor;  ///< aft: log censoring times
};

inline IndexSet support(const Vector& beta) {
    IndexSet s;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) {
            s.push_back(static_cast<int>(j));
        }
    }
    return s;
}

namespace detail {

inline IndexSet random_subset(int p, int k, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    IndexSet out(idx.begin(), idx.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

inline Vector draw_coefficients(int p, const IndexSet& active, const std::vector<double>& magnitudes, Rng& rng) {
    Vector beta = Vector::Zero(p);
    for (int j : active) {
        const double m = magnitudes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(magnitudes.size()) - 1))];
        beta(j) = rng.bernoulli(0.5) ? m : -m;
    }
    return beta;
}

inline Vector gaussian_response(const Matrix& x, const Vector& beta, double error_variance, Rng& rng) {
    Vector y = x * beta;
    const double sd = std::sqrt(error_variance);
    for (Index i = 0; i < y.size(); ++i) {
        y(i) += sd * rng.normal();
    }
    return y;
}

inline std::vector<std::string> default_names(Index p) {
    std::vector<std::string> names;
    for (Index j = 0; j < p; ++j) {
        names.push_back("x" + std::to_string(j + 1));
    }
    return names;
}

}  // namespace detail

/// X ~ N(0, I_p); k active coefficients drawn from {+-0.5, +-1, +-1.5}; y = X beta + N(0, 1).
inline SimData gen_scenario1(std::uint64_t seed, int n = 200, int p = 30, int n_active = 6) {
    require(n >= 2 && p >= 1 && n_active >= 0 && n_active <= p, "invalid scenario 1 dimensions");
    Rng rng(seed);
    SimData sim;
    sim.sigma = Matrix::Identity(p, p);
    sim.omega = Matrix::Identity(p, p);
    sim.graph = GraphAdjacency(p);
    sim.active = detail::random_subset(p, n_active, rng);
    sim.beta = detail::draw_coefficients(p, sim.active, {0.5, 1.0, 1.5}, rng);
    sim.error_variance = 1.0;
    sim.data.x = rng.normal_matrix(n, p);
    sim.data.y = detail::gaussian_response(sim.data.x, sim.beta, sim.error_variance, rng);
    sim.data.names = detail::default_names(p);
    return sim;
}

/// Preferential-attachment tree: node k attaches to one earlier node with probability
/// proportional to its degree.
inline GraphAdjacency preferential_attachment_graph(int p, Rng& rng) {
    GraphAdjacency g(p);
    if (p < 2) {
        return g;
    }
    std::vector<int> degree(static_cast<std::size_t>(p), 0);
    g.set_edge(0, 1, true);
    degree[0] = degree[1] = 1;
    for (int k = 2; k < p; ++k) {
        const int total = std::accumulate(degree.begin(), degree.begin() + k, 0);
        int pick = rng.uniform_int(1, total);
        int target = 0;
        while (pick > degree[static_cast<std::size_t>(target)]) {
            pick -= degree[static_cast<std::size_t>(target)];
            ++target;
        }
        g.set_edge(k, target, true);
        ++degree[static_cast<std::size_t>(k)];
        ++degree[static_cast<std::size_t>(target)];
    }
    return g;
}

/// I + w * adjacency, diagonal boosted until lambda_min >= 0.1, then scaled to unit diagonal.
inline Matrix precision_from_graph(const GraphAdjacency& g, double edge_weight) {
    const Index p = g.dim();
    Matrix omega = Matrix::Identity(p, p) + edge_weight * g.matrix().cast<double>();
    const double lmin = min_eigenvalue(omega);
    if (lmin < 0.1) {
        omega.diagonal().array() += 0.1 - lmin;
    }
    return symmetrize(omega / omega(0, 0));
}

/// Scale-free graphical model on p nodes; graph, active set and coefficients (from {+-0.5, +-1})
/// come from structure_seed, covariates and noise from seed.
inline SimData gen_scenario2(std::uint64_t seed, int n = 200, int p = 30, int n_active = 6,
                             std::uint64_t structure_seed = ScenarioSpec{}.structure_seed, double edge_weight = -0.25) {
    require(n >= 2 && p >= 2 && n_active >= 0 && n_active <= p, "invalid scenario 2 dimensions");
    Rng structure(structure_seed);
    SimData sim;
    sim.graph = preferential_attachment_graph(p, structure);
    sim.omega = precision_from_graph(sim.graph, edge_weight);
    sim.sigma = spd_inverse(sim.omega, "internal error: generated precision not positive definite");
    sim.active = detail::random_subset(p, n_active, structure);
    sim.beta = detail::draw_coefficients(p, sim.active, {0.5, 1.0}, structure);
    sim.error_variance = 1.0;

    Rng rng(seed);
    sim.data.x = sample_mvn_rows(cholesky_lower(sim.sigma, "internal error: covariance not PD"), n, rng);
    sim.data.y = detail::gaussian_response(sim.data.x, sim.beta, sim.error_variance, rng);
    sim.data.names = detail::default_names(p);
    return sim;
}

namespace detail {

/// Hub-and-children covariates: hubs ~ N(0, 1), child = rho * hub + sqrt(1 - rho^2) * noise.
/// Variable order is hub, its children, next hub, ...
inline void hub_design(SimData& sim, int n, int hubs, int hub_size, double rho, const std::vector<double>& hub_coefs,
                       Rng& rng) {
    require(hubs >= 1 && hub_size >= 1, "need at least one hub with one child");
    require(rho > -1.0 && rho < 1.0, "hub-child correlation must lie in (-1, 1)");
    require(static_cast<int>(hub_coefs.size()) <= hubs, "more active hubs than hubs");
    const int block = hub_size + 1;
    const int p = hubs * block;

    Matrix block_sigma = Matrix::Constant(block, block, rho * rho);
    block_sigma.row(0).setConstant(rho);
    block_sigma.col(0).setConstant(rho);
    block_sigma.diagonal().setOnes();
    Matrix block_omega = spd_inverse(block_sigma, "internal error: hub block not PD");
    block_omega = block_omega.unaryExpr([](double v) { return std::abs(v) < 1e-10 ? 0.0 : v; });

    sim.sigma = Matrix::Zero(p, p);
    sim.omega = Matrix::Zero(p, p);
    sim.graph = GraphAdjacency(p);
    sim.beta = Vector::Zero(p);
    for (int h = 0; h < hubs; ++h) {
        const int base = h * block;
        sim.sigma.block(base, base, block, block) = block_sigma;
        sim.omega.block(base, base, block, block) = block_omega;
        for (int c = 1; c < block; ++c) {
            sim.graph.set_edge(base, base + c, true);
        }
        if (h < static_cast<int>(hub_coefs.size())) {
            const double coef = hub_coefs[static_cast<std::size_t>(h)];
            sim.beta(base) = coef;
            for (int c = 1; c < block; ++c) {
                sim.beta(base + c) = coef / std::sqrt(10.0);
            }
        }
    }
    sim.active = support(sim.beta);
    sim.error_variance = sim.beta.squaredNorm() / 4.0;

    const double child_sd = std::sqrt(1.0 - rho * rho);
    sim.data.x.resize(n, p);
    for (int i = 0; i < n; ++i) {
        for (int h = 0; h < hubs; ++h) {
            const int base = h * block;
            const double hub = rng.normal();
            sim.data.x(i, base) = hub;
            for (int c = 1; c < block; ++c) {
                sim.data.x(i, base + c) = rho * hub + child_sd * rng.normal();
            }
        }
    }
    sim.data.names = default_names(p);
}

}  // namespace detail

/// Hub graph: `hubs` hubs with `hub_size` children each; the first hubs carry the given
/// coefficients and their children the same divided by sqrt(10); error variance sum(beta^2)/4.
inline SimData gen_scenario3(std::uint64_t seed, int n = 200, int hubs = 40, int hub_size = 5,
                             const std::vector<double>& hub_coefs = {5.0, -5.0, 3.0, -3.0}, double rho = 0.7) {
    Rng rng(seed);
    SimData sim;
    detail::hub_design(sim, n, hubs, hub_size, rho, hub_coefs, rng);
    sim.data.y = detail::gaussian_response(sim.data.x, sim.beta, sim.error_variance, rng);
    return sim;
}

/// Exponential censoring rate giving an expected censoring fraction `target` given the event times.
inline double calibrate_censoring_rate(const Vector& log_time, double target) {
    require(target > 0.0 && target < 1.0, "censoring fraction must lie in (0, 1)");
    auto fraction = [&](double log_rate) {
        double f = 0.0;
        for (Index i = 0; i < log_time.size(); ++i) {
            f += -std::expm1(-std::exp(log_rate + log_time(i)));
        }
        return f / static_cast<double>(log_time.size());
    };
    double lo = -200.0;
    double hi = 200.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fraction(mid) < target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

/// Scenario-3 covariates, log T = X beta + eps, exponential censoring calibrated to the target
/// fraction. data.y holds log(min(T, c)), data.event the indicator T <= c.
inline SimData gen_aft(std::uint64_t seed, int n = 200, int hubs = 40, int hub_size = 5,
                       const std::vector<double>& hub_coefs = {5.0, -5.0, 3.0, -3.0}, double censor_fraction = 0.25,
                       double rho = 0.7) {
    Rng rng(seed);
    SimData sim;
    detail::hub_design(sim, n, hubs, hub_size, rho, hub_coefs, rng);
    sim.log_time = detail::gaussian_response(sim.data.x, sim.beta, sim.error_variance, rng);
    const double rate = calibrate_censoring_rate(sim.log_time, censor_fraction);
    sim.log_censor.resize(n);
    sim.data.y.resize(n);
    std::vector<std::uint8_t> event(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        sim.log_censor(i) = std::log(rng.exponential(rate));
        const bool observed = sim.log_time(i) <= sim.log_censor(i);
        event[static_cast<std::size_t>(i)] = observed ? 1 : 0;
        sim.data.y(i) = observed ? sim.log_time(i) : sim.log_censor(i);
    }
    sim.data.event = std::move(event);
    sim.data.response_name = "log_time";
    return sim;
}

inline SimData generate(const ScenarioSpec& spec, std::uint64_t seed) {
    switch (spec.id) {
        case ScenarioId::S1: return gen_scenario1(seed, spec.n, spec.p, spec.n_active);
        case ScenarioId::S2:
            return gen_scenario2(seed, spec.n, spec.p, spec.n_active, spec.structure_seed, spec.edge_weight);
        case ScenarioId::S3:
            return gen_scenario3(seed, spec.n, spec.hubs, spec.hub_size, spec.hub_coefficients, spec.hub_child_correlation);
        case ScenarioId::Aft:
            return gen_aft(seed, spec.n, spec.hubs, spec.hub_size, spec.hub_coefficients, spec.censor_fraction,
                           spec.hub_child_correlation);
    }
    throw Error("unknown scenario");
}

/// Centering applied before fitting: covariates always, the response only in linear mode
/// (in AFT mode a shift would move censored and observed rows inconsistently).
inline Dataset prepare_for_fit(Dataset data) {
    center_columns(data.x);
    if (!data.censored()) {
        center(data.y);
    }
    return data;
}

// -------------------------------------------------------------------------------------------------
//     Metrics
// -------------------------------------------------------------------------------------------------

struct SelectionMetrics {
    double fdr = 0.0;
    double tpr = 0.0;
    double mcc = 0.0;
    double f1 = 0.0;
    Index tp = 0;
    Index fp = 0;
    Index tn = 0;
    Index fn = 0;
};

/// Confusion-matrix metrics. 0/0 conventions: FDR 0, TPR 0, MCC 0, F1 1 (only when nothing is
/// selected and nothing is active).
inline SelectionMetrics compute_metrics(const IndexSet& selected, const IndexSet& truth, Index p) {
    std::vector<std::uint8_t> sel(static_cast<std::size_t>(p), 0);
    std::vector<std::uint8_t> act(static_cast<std::size_t>(p), 0);
    for (int j : selected) {
        require(j >= 0 && j < p, "selected index out of range");
        sel[static_cast<std::size_t>(j)] = 1;
    }
    for (int j : truth) {
        require(j >= 0 && j < p, "true index out of range");
        act[static_cast<std::size_t>(j)] = 1;
    }
    SelectionMetrics m;
    for (Index j = 0; j < p; ++j) {
        const bool s = sel[static_cast<std::size_t>(j)] != 0;
        const bool a = act[static_cast<std::size_t>(j)] != 0;
        m.tp += s && a;
        m.fp += s && !a;
        m.fn += !s && a;
        m.tn += !s && !a;
    }
    const auto d = [](Index v) { return static_cast<double>(v); };
    m.fdr = (m.tp + m.fp) > 0 ? d(m.fp) / d(m.fp + m.tp) : 0.0;
    m.tpr = (m.tp + m.fn) > 0 ? d(m.tp) / d(m.tp + m.fn) : 0.0;
    const double denom = std::sqrt(d(m.tp + m.fp) * d(m.tp + m.fn) * d(m.tn + m.fp) * d(m.tn + m.fn));
    m.mcc = denom > 0.0 ? (d(m.tp) * d(m.tn) - d(m.fp) * d(m.fn)) / denom : 0.0;
    const Index f1_denom = 2 * m.tp + m.fp + m.fn;
    m.f1 = f1_denom > 0 ? 2.0 * d(m.tp) / d(f1_denom) : 1.0;
    return m;
}

struct GraphMetrics {
    double frobenius = 0.0;
    double f1 = 0.0;
};

/// Frobenius norm of (omega_mean - omega_true) and edge F1 of the median graph against the
/// true graph (1 when both are empty).
inline GraphMetrics graph_metrics(const Matrix& omega_mean, const Matrix& omega_true, const Matrix& ppi,
                                  const GraphAdjacency& g_true) {
    require(omega_mean.rows() == omega_true.rows() && omega_mean.cols() == omega_true.cols(),
            "precision matrices have different shapes");
    require(ppi.rows() == g_true.dim(), "ppi and graph dimensions differ");
    GraphMetrics out;
    out.frobenius = (omega_mean - omega_true).norm();
    const GraphAdjacency est = median_graph(ppi, 0.5);
    Index tp = 0;
    Index fp = 0;
    Index fn = 0;
    for (Index k = 1; k < g_true.dim(); ++k) {
        for (Index i = 0; i < k; ++i) {
            const bool e = est.edge(i, k);
            const bool t = g_true.edge(i, k);
            tp += e && t;
            fp += e && !t;
            fn += !e && t;
        }
    }
    const Index denom = 2 * tp + fp + fn;
    out.f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 1.0;
    return out;
}

// -------------------------------------------------------------------------------------------------
//     Classical model-X knockoff filter
// -------------------------------------------------------------------------------------------------

/// knockoff+ threshold: min t in {|W_j| > 0} with (1 + #{W <= -t}) / max(#{W >= t}, 1) <= q;
/// +inf when no such t exists.
inline double knockoff_plus_threshold(const Vector& w, double q) {
    std::vector<double> candidates;
    for (Index j = 0; j < w.size(); ++j) {
        if (w(j) != 0.0) {
            candidates.push_back(std::abs(w(j)));
        }
    }
    std::sort(candidates.begin(), candidates.end());
    for (double t : candidates) {
        const double neg = static_cast<double>((w.array() <= -t).count());
        const double pos = static_cast<double>((w.array() >= t).count());
        if ((1.0 + neg) / std::max(pos, 1.0) <= q) {
            return t;
        }
    }
    return std::numeric_limits<double>::infinity();
}

enum class BaselineStatistic { RidgeGcv, Ols };

struct BaselineResult {
    IndexSet selected;
    Vector w;
    double threshold = std::numeric_limits<double>::infinity();
    double lambda = 0.0;
};

namespace detail {

/// Ridge coefficients on z with the penalty minimizing GCV over n * 10^k, k = -6, -5.8, ..., 2.
inline Vector ridge_gcv(const Matrix& z, const Vector& y, double& lambda_out) {
    Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector d = svd.singularValues();
    const Vector uty = svd.matrixU().transpose() * y;
    const double n = static_cast<double>(z.rows());
    const double y_sq = y.squaredNorm();
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = n;
    for (int k = 0; k <= 40; ++k) {
        const double lambda = n * std::pow(10.0, -6.0 + 0.2 * k);
        double df = 0.0;
        double fit_sq = 0.0;
        double cross = 0.0;
        for (Index i = 0; i < d.size(); ++i) {
            const double shrink = d(i) * d(i) / (d(i) * d(i) + lambda);
            df += shrink;
            fit_sq += shrink * shrink * uty(i) * uty(i);
            cross += shrink * uty(i) * uty(i);
        }
        const double rss = std::max(0.0, y_sq - 2.0 * cross + fit_sq);
        const double denom = 1.0 - df / n;
        const double gcv = denom > 0.0 ? (rss / n) / (denom * denom) : std::numeric_limits<double>::infinity();
        if (gcv < best) {
            best = gcv;
            best_lambda = lambda;
        }
    }
    lambda_out = best_lambda;
    Vector factor(d.size());
    for (Index i = 0; i < d.size(); ++i) {
        factor(i) = d(i) / (d(i) * d(i) + best_lambda) * uty(i);
    }
    return svd.matrixV() * factor;
}

}  // namespace detail

/// Single knockoff draw with the exact covariance, W_j = |coef_j| - |coef_{j+p}| from a fit on
/// [X, X~], and the knockoff+ threshold at level q.
inline BaselineResult classical_knockoff_baseline(const Dataset& data, const Matrix& sigma_true, double q,
                                                  std::uint64_t seed,
                                                  BaselineStatistic statistic = BaselineStatistic::RidgeGcv,
                                                  double shrink = kDefaultShrink) {
    require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    require(sigma_true.rows() == data.p(), "covariance dimension does not match data");
    const Index p = data.p();
    Rng rng(seed);
    const PrecisionMatrix omega = PrecisionMatrix::from_covariance(sigma_true);
    const Vector s = compute_s_equicorrelated(sigma_true, shrink);
    const Matrix x_tilde = sample_joint_knockoffs(data.x, omega, s, rng);

    Matrix z(data.n(), 2 * p);
    z << data.x, x_tilde;
    BaselineResult out;
    Vector coef;
    if (statistic == BaselineStatistic::Ols) {
        Eigen::ColPivHouseholderQR<Matrix> qr(z);
        if (z.rows() <= z.cols() || qr.rank() < z.cols()) {
            throw Error("augmented design is singular; use the ridge statistic");
        }
        coef = qr.solve(data.y);
    } else {
        coef = detail::ridge_gcv(z, data.y, out.lambda);
    }
    out.w = coef.head(p).cwiseAbs() - coef.tail(p).cwiseAbs();
    out.threshold = knockoff_plus_threshold(out.w, q);
    for (Index j = 0; j < p; ++j) {
        if (out.w(j) >= out.threshold) {
            out.selected.push_back(static_cast<int>(j));
        }
    }
    return out;
}

// -------------------------------------------------------------------------------------------------
//     Replicates and sensitivity
// -------------------------------------------------------------------------------------------------

enum class Method { BayesKnock, Joint, KnockoffExact };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::BayesKnock: return "BayesKnock";
        case Method::Joint: return "Joint";
        case Method::KnockoffExact: return "KnockoffExact";
    }
    return "?";
}

struct MethodConfig {
    Method method = Method::BayesKnock;
    RegressionHyper hyper;
    GgmHyper ggm;
    ChainConfig chain;
    int chains = 1;
    BaselineStatistic statistic = BaselineStatistic::RidgeGcv;
};

/// Metrics of one method on one replicate; graph metrics are NaN for the classical baseline.
struct MetricsRow {
    double fdr = 0.0;
    double tpr = 0.0;
    double mcc = 0.0;
    double f1 = 0.0;
    double frobenius = std::numeric_limits<double>::quiet_NaN();
    double graph_f1 = std::numeric_limits<double>::quiet_NaN();
    Index selected = 0;
};

inline constexpr int kMetricCount = 6;
inline const char* const kMetricNames[kMetricCount] = {"fdr", "tpr", "mcc", "f1", "frobenius", "graph_f1"};

inline double metric(const MetricsRow& r, int k) {
    switch (k) {
        case 0: return r.fdr;
        case 1: return r.tpr;
        case 2: return r.mcc;
        case 3: return r.f1;
        case 4: return r.frobenius;
        default: return r.graph_f1;
    }
}

struct MethodOutcome {
    MetricsRow row;
    IndexSet selected;
    long censored_violations = 0;
};

/// Fits one method on one generated replicate and scores it against the truth.
inline MethodOutcome evaluate_method(const SimData& sim, const MethodConfig& cfg, std::uint64_t seed) {
    const Dataset data = prepare_for_fit(sim.data);
    const Index p = data.p();
    MethodOutcome out;
    if (cfg.method == Method::KnockoffExact) {
        out.selected = classical_knockoff_baseline(data, sim.sigma, cfg.hyper.q, seed, cfg.statistic, cfg.chain.shrink).selected;
    } else {
        ChainConfig chain = cfg.chain;
        chain.seed = seed;
        chain.use_knockoffs = cfg.method == Method::BayesKnock;
        chain.mode = data.censored() ? ResponseMode::Aft : ResponseMode::Linear;
        const PosteriorDraws draws = pool_draws(run_chains(data, cfg.hyper, cfg.ggm, chain, cfg.chains, 1));
        out.censored_violations = draws.diagnostics.censored_violations;
        if (cfg.method == Method::BayesKnock) {
            const WDraws w = compute_W(draws.beta, draws.beta_tilde);
            out.selected = select_bfdr(estimate_upper_bound(w), cfg.hyper.q).selected;
        } else {
            out.selected = select_ppi(draws.beta, 0.5);
        }
        const GraphMetrics gm = graph_metrics(draws.omega_mean, sim.omega, draws.edge_ppi, sim.graph);
        out.row.frobenius = gm.frobenius;
        out.row.graph_f1 = gm.f1;
    }
    const SelectionMetrics sm = compute_metrics(out.selected, sim.active, p);
    out.row.fdr = sm.fdr;
    out.row.tpr = sm.tpr;
    out.row.mcc = sm.mcc;
    out.row.f1 = sm.f1;
    out.row.selected = static_cast<Index>(out.selected.size());
    return out;
}

struct ReplicateRecord {
    int replicate = 0;
    std::uint64_t seed = 0;
    std::string method;
    bool failed = false;
    std::string error;
    MethodOutcome outcome;
};

struct SummaryRow {
    std::string method;
    std::array<double, kMetricCount> mean{};
    std::array<double, kMetricCount> sd{};
    int succeeded = 0;
    int failed = 0;
};

struct ReplicateTable {
    std::vector<ReplicateRecord> records;  ///< replicate-major, methods in config order
    std::vector<SummaryRow> summary;       ///< one per method, config order

    const SummaryRow& summary_for(const std::string& method) const {
        for (const auto& s : summary) {
            if (s.method == method) {
                return s;
            }
        }
        throw Error("no summary for method " + method);
    }
};

inline std::uint64_t replicate_seed(const ScenarioSpec& spec, int r) {
    return derive_seed(spec.seed, static_cast<std::uint64_t>(r));
}

/// sd uses the n - 1 divisor and is 0 for a single successful replicate. NaN metric values (not
/// applicable to a method) propagate to NaN summaries.
inline ReplicateTable summarize(std::vector<ReplicateRecord> records, const std::vector<MethodConfig>& methods) {
    ReplicateTable table;
    table.records = std::move(records);
    for (const auto& m : methods) {
        SummaryRow row;
        row.method = to_string(m.method);
        std::vector<const MetricsRow*> ok;
        for (const auto& rec : table.records) {
            if (rec.method != row.method) {
                continue;
            }
            if (rec.failed) {
                ++row.failed;
            } else {
                ok.push_back(&rec.outcome.row);
            }
        }
        row.succeeded = static_cast<int>(ok.size());
        for (int k = 0; k < kMetricCount; ++k) {
            double sum = 0.0;
            for (const auto* r : ok) {
                sum += metric(*r, k);
            }
            const double mean = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(ok.size());
            double ss = 0.0;
            for (const auto* r : ok) {
                ss += (metric(*r, k) - mean) * (metric(*r, k) - mean);
            }
            row.mean[static_cast<std::size_t>(k)] = mean;
            row.sd[static_cast<std::size_t>(k)] = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
        }
        table.summary.push_back(row);
    }
    return table;
}

/// R independent replicates of every method. Replicate r uses data seed
/// derive_seed(spec.seed, r) and method m chain seed derive_seed(data seed, 1000 + m).
/// A failing replicate is recorded, not fatal.
inline ReplicateTable run_replicates(const ScenarioSpec& spec, const std::vector<MethodConfig>& methods, int replicates,
                                     unsigned threads = 0) {
    require(replicates >= 1, "at least one replicate is required");
    require(!methods.empty(), "at least one method is required");
    const std::size_t m = methods.size();
    std::vector<ReplicateRecord> records(static_cast<std::size_t>(replicates) * m);
    parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
        const std::uint64_t seed = replicate_seed(spec, static_cast<int>(r));
        std::optional<SimData> sim;
        std::string gen_error;
        try {
            sim = generate(spec, seed);
        } catch (const std::exception& e) {
            gen_error = e.what();
        }
        for (std::size_t k = 0; k < m; ++k) {
            ReplicateRecord& rec = records[r * m + k];
            rec.replicate = static_cast<int>(r);
            rec.seed = seed;
            rec.method = to_string(methods[k].method);
            if (!sim) {
                rec.failed = true;
                rec.error = gen_error;
                continue;
            }
            try {
                rec.outcome = evaluate_method(*sim, methods[k], derive_seed(seed, 1000 + k));
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
            }
        }
    });
    return summarize(std::move(records), methods);
}

struct GridPoint {
    std::string name;
    double value = 0.0;
};

/// Applies one hyperparameter override. Changing v0 keeps the ratio v1 / v0 fixed.
inline void apply_grid_point(MethodConfig& cfg, const GridPoint& gp) {
    const std::string& k = gp.name;
    if (k == "a") cfg.hyper.a = gp.value;
    else if (k == "b") cfg.hyper.b = gp.value;
    else if (k == "h_beta") cfg.hyper.h_beta = gp.value;
    else if (k == "a_sigma") cfg.hyper.a_sigma = gp.value;
    else if (k == "b_sigma") cfg.hyper.b_sigma = gp.value;
    else if (k == "q") cfg.hyper.q = gp.value;
    else if (k == "v0") {
        const double ratio = cfg.ggm.v1 / cfg.ggm.v0;
        cfg.ggm.v0 = gp.value;
        cfg.ggm.v1 = ratio * gp.value;
    } else if (k == "v1") cfg.ggm.v1 = gp.value;
    else if (k == "theta") cfg.ggm.theta = gp.value;
    else if (k == "xi") cfg.ggm.xi = gp.value;
    else throw Error("unknown sensitivity hyperparameter '" + k + "'");
}

struct SensitivityRow {
    GridPoint point;
    SummaryRow summary;
};

/// One replicate run per grid point, each varying a single hyperparameter from the base config.
inline std::vector<SensitivityRow> sensitivity_grid(const ScenarioSpec& base, const MethodConfig& method,
                                                    const std::vector<GridPoint>& grid, int replicates = 1,
                                                    unsigned threads = 0) {
    require(!grid.empty(), "sensitivity grid is empty");
    std::vector<SensitivityRow> rows;
    for (const auto& gp : grid) {
        MethodConfig cfg = method;
        apply_grid_point(cfg, gp);
        cfg.hyper.validate();
        cfg.ggm.validate();
        const ReplicateTable table = run_replicates(base, {cfg}, replicates, threads);
        rows.push_back({gp, table.summary.front()});
    }
    return rows;
}

}  // namespace bayesknock
