#pragma once

// Block Gibbs sampler for a Gaussian graphical model under the continuous spike-and-slab
// prior: off-diagonal omega_jk ~ N(0, v_{g_jk}), diagonal omega_jj ~ Exp(theta / 2), and
// independent Bernoulli(xi) edges. The normalizing constants cancel in every conditional
// used here and are never evaluated.

#include "bayesknock/common.hpp"
#include "bayesknock/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <span>

namespace bayesknock {

struct GgmHyper {
    double v0 = 0.01 * 0.01;  ///< spike variance
    double v1 = 100.0 * 0.01 * 0.01;  ///< slab variance
    double theta = 2.0;
    double xi = 0.01;

    void validate() const {
        require(v0 > 0.0 && v1 > 0.0, "v0 and v1 must be positive");
        require(v0 < v1, "v0 must be smaller than v1");
        require(theta > 0.0, "theta must be positive");
        require(xi > 0.0 && xi < 1.0, "xi must lie in (0, 1)");
    }
};

/// Symmetric 0/1 adjacency matrix with zero diagonal.
class GraphAdjacency {
  public:
    GraphAdjacency() = default;
    explicit GraphAdjacency(Index p) : g_(Eigen::MatrixXi::Zero(p, p)) {}

    explicit GraphAdjacency(const Eigen::MatrixXi& g) : g_(g) {
        require(g.rows() == g.cols(), "adjacency must be square");
        for (Index i = 0; i < g.rows(); ++i) {
            require(g(i, i) == 0, "adjacency diagonal must be zero");
            for (Index k = 0; k < g.cols(); ++k) {
                require(g(i, k) == 0 || g(i, k) == 1, "adjacency entries must be 0 or 1");
                require(g(i, k) == g(k, i), "adjacency must be symmetric");
            }
        }
    }

    static GraphAdjacency full(Index p) {
        Eigen::MatrixXi g = Eigen::MatrixXi::Ones(p, p);
        g.diagonal().setZero();
        return GraphAdjacency(g);
    }

    Index dim() const { return g_.rows(); }
    bool edge(Index i, Index k) const { return g_(i, k) != 0; }

    void set_edge(Index i, Index k, bool on) {
        require(i != k, "self loops are not allowed");
        g_(i, k) = on ? 1 : 0;
        g_(k, i) = on ? 1 : 0;
    }

    Index edge_count() const { return g_.sum() / 2; }
    const Eigen::MatrixXi& matrix() const { return g_; }

    friend bool operator==(const GraphAdjacency& l, const GraphAdjacency& r) { return l.g_ == r.g_; }

  private:
    Eigen::MatrixXi g_;
};

/// Posterior probability that edge (j, k) is present given omega_jk.
inline double edge_inclusion_probability(double omega_jk, const GgmHyper& hyper) {
    const double log_slab = std::log(hyper.xi) + log_normal_pdf(omega_jk, 0.0, hyper.v1);
    const double log_spike = std::log1p(-hyper.xi) + log_normal_pdf(omega_jk, 0.0, hyper.v0);
    return 1.0 / (1.0 + std::exp(log_spike - log_slab));
}

/// Draws column/row j of omega from its full conditional and keeps sigma = omega^{-1} in sync.
///
/// With the index split (-j, j): omega_{-j,j} ~ N(-C scatter_{-j,j}, C), where
/// C^{-1} = (scatter_jj + theta) Omega_{-j,-j}^{-1} + diag(1 / v_{g}), and
/// omega_jj = kappa + omega_{-j,j}^T Omega_{-j,-j}^{-1} omega_{-j,j} with
/// kappa ~ Gamma(n/2 + 1, rate (scatter_jj + theta) / 2). Positive definiteness holds because
/// the Schur complement kappa is positive.
inline void update_omega_column(Index j, const Matrix& scatter, double n, Matrix& omega, Matrix& sigma,
                                const GraphAdjacency& g, const GgmHyper& hyper, Rng& rng) {
    const Index p = omega.rows();
    const double rate = 0.5 * (scatter(j, j) + hyper.theta);
    const double kappa = rng.gamma(0.5 * n + 1.0, rate);
    if (p == 1) {
        omega(0, 0) = kappa;
        sigma(0, 0) = 1.0 / kappa;
        return;
    }

    std::vector<Index> others;
    others.reserve(static_cast<std::size_t>(p - 1));
    for (Index k = 0; k < p; ++k) {
        if (k != j) {
            others.push_back(k);
        }
    }

    const Matrix sigma11 = sigma(others, others);
    const Vector sigma12 = sigma(others, j);
    const Matrix omega11_inv = symmetrize(sigma11 - sigma12 * sigma12.transpose() / sigma(j, j));

    Matrix precision = 2.0 * rate * omega11_inv;
    for (Index k = 0; k < p - 1; ++k) {
        precision(k, k) += 1.0 / (g.edge(others[static_cast<std::size_t>(k)], j) ? hyper.v1 : hyper.v0);
    }
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw Error("internal error: column precision not positive definite");
    }
    const Vector s12 = scatter(others, j);
    Vector column = -llt.solve(s12);
    Vector z(p - 1);
    for (Index k = 0; k < p - 1; ++k) {
        z(k) = rng.normal();
    }
    column += llt.matrixU().solve(z);

    const Vector t = omega11_inv * column;
    for (Index k = 0; k < p - 1; ++k) {
        const Index idx = others[static_cast<std::size_t>(k)];
        omega(idx, j) = column(k);
        omega(j, idx) = column(k);
    }
    omega(j, j) = kappa + column.dot(t);

    sigma(others, others) = symmetrize(omega11_inv + t * t.transpose() / kappa);
    const Vector new_sigma12 = -t / kappa;
    for (Index k = 0; k < p - 1; ++k) {
        const Index idx = others[static_cast<std::size_t>(k)];
        sigma(idx, j) = new_sigma12(k);
        sigma(j, idx) = new_sigma12(k);
    }
    sigma(j, j) = 1.0 / kappa;
}

/// One sweep over all columns. Ascending order unless random_scan, which uses a fresh
/// permutation per sweep. sigma is refreshed from omega first so rank-one drift cannot build up
/// across sweeps. Throws if omega loses positive definiteness (indicates a bug).
inline void sweep_omega(const Matrix& scatter, double n, Matrix& omega, Matrix& sigma, const GraphAdjacency& g,
                        const GgmHyper& hyper, Rng& rng, bool random_scan = false) {
    const Index p = omega.rows();
    sigma = spd_inverse(omega, "internal error: precision matrix lost positive definiteness");
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    if (random_scan) {
        std::shuffle(order.begin(), order.end(), rng.engine());
    }
    for (const Index j : order) {
        update_omega_column(j, scatter, n, omega, sigma, g, hyper, rng);
    }
    if (!is_positive_definite(omega)) {
        throw Error("internal error: precision matrix lost positive definiteness");
    }
}

inline GraphAdjacency update_graph(const Matrix& omega, const GgmHyper& hyper, Rng& rng) {
    const Index p = omega.rows();
    GraphAdjacency g(p);
    for (Index k = 1; k < p; ++k) {
        for (Index i = 0; i < k; ++i) {
            g.set_edge(i, k, rng.bernoulli(edge_inclusion_probability(omega(i, k), hyper)));
        }
    }
    return g;
}

/// Running sum of adjacency draws; ppi() is their elementwise mean.
class GraphAccumulator {
  public:
    explicit GraphAccumulator(Index p) : sum_(Matrix::Zero(p, p)) {}

    void add(const GraphAdjacency& g) {
        sum_ += g.matrix().cast<double>();
        ++count_;
    }

    Index count() const { return count_; }

    Matrix ppi() const {
        require(count_ > 0, "no graph draws to summarize");
        return sum_ / static_cast<double>(count_);
    }

  private:
    Matrix sum_;
    Index count_ = 0;
};

inline Matrix edge_ppi(std::span<const GraphAdjacency> draws) {
    require(!draws.empty(), "no graph draws to summarize");
    GraphAccumulator acc(draws.front().dim());
    for (const auto& g : draws) {
        require(g.dim() == draws.front().dim(), "graph draws have inconsistent dimensions");
        acc.add(g);
    }
    return acc.ppi();
}

/// Edge present iff ppi > threshold.
inline GraphAdjacency median_graph(const Matrix& ppi, double threshold = 0.5) {
    require(ppi.rows() == ppi.cols(), "ppi matrix must be square");
    const Index p = ppi.rows();
    GraphAdjacency g(p);
    for (Index k = 1; k < p; ++k) {
        for (Index i = 0; i < k; ++i) {
            g.set_edge(i, k, 0.5 * (ppi(i, k) + ppi(k, i)) > threshold);
        }
    }
    return g;
}

}  // namespace bayesknock
