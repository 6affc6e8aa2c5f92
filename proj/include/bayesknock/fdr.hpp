#pragma once

// Feature statistics and BFDR-controlled selection from posterior draws.

#include "bayesknock/common.hpp"

#include <algorithm>
#include <numeric>

namespace bayesknock {

/// W draws: w(t, j) = |beta_j^(t)| - |beta~_j^(t)|.
struct WDraws {
    Matrix w;

    Index draws() const { return w.rows(); }
    Index p() const { return w.cols(); }
};

inline WDraws compute_W(const Matrix& beta_draws, const Matrix& beta_tilde_draws) {
    require(beta_draws.rows() == beta_tilde_draws.rows() && beta_draws.cols() == beta_tilde_draws.cols(),
            "beta and beta_tilde draws have different shapes");
    WDraws out{beta_draws.cwiseAbs() - beta_tilde_draws.cwiseAbs()};
    require(out.w.allFinite(), "W draws must be finite");
    return out;
}

struct SignCounts {
    Eigen::VectorXi positive;
    Eigen::VectorXi negative;
    Index draws = 0;
};

inline SignCounts count_signs(const WDraws& w) {
    require(w.draws() >= 1, "need at least one posterior draw");
    SignCounts c{Eigen::VectorXi::Zero(w.p()), Eigen::VectorXi::Zero(w.p()), w.draws()};
    for (Index j = 0; j < w.p(); ++j) {
        for (Index t = 0; t < w.draws(); ++t) {
            const double v = w.w(t, j);
            c.positive(j) += v > 0.0 ? 1 : 0;
            c.negative(j) += v < 0.0 ? 1 : 0;
        }
    }
    return c;
}

/// 1 - (#{W > 0} - #{W < 0}) / T per variable, unclipped (range [0, 2]).
inline Vector estimate_raw_upper_bound(const WDraws& w) {
    const SignCounts c = count_signs(w);
    const double t = static_cast<double>(c.draws);
    return (1.0 - (c.positive - c.negative).cast<double>().array() / t).matrix();
}

/// Monte Carlo upper bound on P[variable inactive | D], clipped to [0, 1].
inline Vector estimate_upper_bound(const WDraws& w) { return estimate_raw_upper_bound(w).cwiseMin(1.0).cwiseMax(0.0); }

/// Alternate statistic 2 * P^[W_j <= 0 | D]; equals the raw bound when no draw has W_j = 0.
inline Vector estimate_nonpositive_bound(const WDraws& w) {
    const SignCounts c = count_signs(w);
    const double t = static_cast<double>(c.draws);
    return (2.0 * (t - c.positive.cast<double>().array()) / t).matrix();
}

struct SelectionReport {
    Vector upper_bound;     ///< per variable, original order
    std::vector<int> order; ///< variables sorted by ascending bound, ties by index
    Vector bfdr_curve;      ///< bfdr_curve(k) = mean of the first k+1 sorted bounds
    IndexSet selected;      ///< sorted ascending
    double q = 0.1;
};

/// Greedy selection: the longest prefix of the ascending bounds whose running mean is <= q.
inline SelectionReport select_bfdr(const Vector& bounds, double q) {
    require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    require((bounds.array() >= 0.0).all() && (bounds.array() <= 1.0).all(), "bounds must lie in [0, 1]");
    const Index p = bounds.size();
    SelectionReport r;
    r.upper_bound = bounds;
    r.q = q;
    r.order.resize(static_cast<std::size_t>(p));
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](int l, int rr) { return bounds(l) < bounds(rr); });
    r.bfdr_curve.resize(p);
    double sum = 0.0;
    Index longest = 0;
    for (Index k = 0; k < p; ++k) {
        sum += bounds(r.order[static_cast<std::size_t>(k)]);
        r.bfdr_curve(k) = sum / static_cast<double>(k + 1);
        if (r.bfdr_curve(k) <= q) {
            longest = k + 1;
        }
    }
    r.selected.assign(r.order.begin(), r.order.begin() + longest);
    std::sort(r.selected.begin(), r.selected.end());
    return r;
}

/// Mean bound over the set (0 for the empty set).
inline double estimated_bfdr(const Vector& bounds, const IndexSet& set) {
    if (set.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (int j : set) {
        require(j >= 0 && j < bounds.size(), "index out of range");
        sum += bounds(j);
    }
    return sum / static_cast<double>(set.size());
}

/// Median-model selection: marginal inclusion frequency of the original variable > threshold.
inline IndexSet select_ppi(const Matrix& beta_draws, double threshold = 0.5) {
    IndexSet out;
    const double t = static_cast<double>(beta_draws.rows());
    for (Index j = 0; j < beta_draws.cols(); ++j) {
        const double freq = static_cast<double>((beta_draws.col(j).array() != 0.0).count()) / t;
        if (freq > threshold) {
            out.push_back(static_cast<int>(j));
        }
    }
    return out;
}

}  // namespace bayesknock
