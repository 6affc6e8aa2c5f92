#include "bayesknock/distributions.hpp"
#include "bayesknock/regression.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace bk = bayesknock;
using bk::Matrix;
using bk::Vector;

namespace {

std::pair<double, double> batch_mean(const std::vector<double>& v, int batches = 50) {
    const std::size_t len = v.size() / static_cast<std::size_t>(batches);
    std::vector<double> means;
    for (int b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            s += v[static_cast<std::size_t>(b) * len + i];
        }
        means.push_back(s / static_cast<double>(len));
    }
    double mean = 0.0;
    for (double x : means) {
        mean += x;
    }
    mean /= batches;
    double ss = 0.0;
    for (double x : means) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / (batches - 1) / batches)};
}

bk::Dataset make_data(bk::Index n, bk::Index p, std::uint64_t seed, double signal) {
    bk::Rng rng(seed);
    bk::Dataset d;
    d.x = rng.normal_matrix(n, p);
    d.y = signal * d.x.col(0);
    for (bk::Index i = 0; i < n; ++i) {
        d.y(i) += rng.normal();
    }
    return d;
}

/// log int N(b | 0, slab) prod_i N(y_i | c_i b, sigma2) db by 1-d quadrature.
double log_marginal_quadrature(const Vector& y, const Vector& c, double sigma2, double slab) {
    const int m = 40001;
    const double lo = -12.0;
    const double hi = 12.0;
    const double h = (hi - lo) / (m - 1);
    std::vector<double> lf(m);
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
        const double b = lo + k * h;
        lf[static_cast<std::size_t>(k)] = bk::log_normal_pdf(b, 0.0, slab) +
                                          bk::gaussian_loglik_from_rss((y - c * b).squaredNorm(), y.size(), sigma2);
        mx = std::max(mx, lf[static_cast<std::size_t>(k)]);
    }
    double s = 0.0;
    for (int k = 0; k < m; ++k) {
        s += ((k == 0 || k == m - 1) ? 0.5 : 1.0) * std::exp(lf[static_cast<std::size_t>(k)] - mx);
    }
    return mx + std::log(s * h);
}

}  // namespace

TEST(Loglik, ZeroCoefficientsIsNoiseDensity) {
    bk::Rng rng(1);
    const Matrix x = rng.normal_matrix(5, 2);
    const Vector y = rng.normal_matrix(5, 1).col(0);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(2));
    const Matrix u = rng.normal_matrix(5, 2);
    double expected = 0.0;
    for (bk::Index i = 0; i < 5; ++i) {
        expected += bk::log_normal_pdf(y(i), 0.0, 1.7);
    }
    EXPECT_NEAR(bk::loglik_conditional(y, x, u, Vector::Zero(2), Vector::Zero(2), kp, 1.7), expected, 1e-12);
}

TEST(Loglik, ScalarHandComputed) {
    Matrix om(1, 1);
    om << 2.0;
    Vector s(1);
    s << 0.3;
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix(om), s);  // gamma map 1 - 0.6 = 0.4
    Vector y(1);
    y << 2.0;
    Matrix x(1, 1);
    x << 1.5;
    Matrix u(1, 1);
    u << 0.3;
    Vector b(1);
    b << 0.4;
    Vector bt(1);
    bt << -0.2;
    const double mean = 1.5 * (0.4 + 0.4 * -0.2) + 0.3 * -0.2;
    const double expected = -0.5 * std::log(2 * std::numbers::pi * 0.7) - (2.0 - mean) * (2.0 - mean) / 1.4;
    EXPECT_NEAR(bk::loglik_conditional(y, x, u, b, bt, kp, 0.7), expected, 1e-12);
}

TEST(Loglik, TranslationInvariance) {
    bk::Rng rng(2);
    const Matrix x = rng.normal_matrix(6, 2);
    Vector b(2);
    b << 0.5, -1.0;
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(2), 0.5);
    const Matrix u = Matrix::Zero(6, 2);
    const Vector y = x * b + Vector::Constant(6, 0.1);
    const double l1 = bk::loglik_conditional(y, x, u, b, Vector::Zero(2), kp, 1.0);
    // shifting y and the fitted mean by the same constant: add a column of ones with coefficient c
    Matrix x2(6, 3);
    x2 << x, Vector::Ones(6);
    Vector b2(3);
    b2 << b, 2.5;
    const auto kp3 = bk::make_knockoff_params(bk::PrecisionMatrix::identity(3), 0.5);
    const double l2 = bk::loglik_conditional(y + Vector::Constant(6, 2.5), x2, Matrix::Zero(6, 3), b2, Vector::Zero(3), kp3, 1.0);
    EXPECT_NEAR(l1, l2, 1e-12);
}

TEST(Ising, FullGraphCountsOrderedPairs) {
    EXPECT_DOUBLE_EQ(bk::ising_log_prior({1, 1, 1}, bk::GraphAdjacency::full(3), 0.5, 0.5), 4.5);
    EXPECT_DOUBLE_EQ(bk::ising_log_prior({0, 0, 0}, bk::GraphAdjacency::full(3), 0.5, 0.5), 0.0);
}

TEST(Ising, EmptyGraphMarginalIsLogistic) {
    const int p = 3;
    double z = 0.0;
    double on = 0.0;
    for (int mask = 0; mask < (1 << p); ++mask) {
        std::vector<std::uint8_t> g(p);
        for (int j = 0; j < p; ++j) {
            g[static_cast<std::size_t>(j)] = (mask >> j) & 1;
        }
        const double w = std::exp(bk::ising_log_prior(g, bk::GraphAdjacency(p), 0.5, 0.5));
        z += w;
        on += g[0] ? w : 0.0;
    }
    EXPECT_NEAR(on / z, 0.622, 5e-4);
    EXPECT_NEAR(on / z, std::exp(0.5) / (1 + std::exp(0.5)), 1e-12);
}

TEST(Ising, GainMatchesDifference) {
    bk::GraphAdjacency g(4);
    g.set_edge(0, 1, true);
    g.set_edge(1, 2, true);
    g.set_edge(1, 3, true);
    std::vector<std::uint8_t> gamma{1, 0, 1, 0};
    std::vector<std::uint8_t> with = gamma;
    with[1] = 1;
    EXPECT_NEAR(bk::ising_gain(gamma, g, 1, 0.3, 0.7),
                bk::ising_log_prior(with, g, 0.3, 0.7) - bk::ising_log_prior(gamma, g, 0.3, 0.7), 1e-12);
}

TEST(CoefficientPrior, SwapSymmetryExact) {
    for (double v : {-2.0, -0.3, 0.01, 1.7}) {
        for (double s2 : {0.5, 1.0, 3.0}) {
            EXPECT_EQ(bk::log_coefficient_prior(v, 0.0, true, false, s2, 1.3),
                      bk::log_coefficient_prior(0.0, v, false, true, s2, 1.3));
        }
    }
    EXPECT_EQ(bk::log_coefficient_prior(0.0, 0.0, false, false, 1.0, 1.0), 0.0);
    EXPECT_THROW(bk::log_coefficient_prior(1.0, 1.0, true, true, 1.0, 1.0), bk::Error);
}

TEST(AddDelete, DeleteRatioIsReciprocalOfAdd) {
    bk::Dataset d = make_data(30, 4, 3, 0.8);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(4), 0.7);
    bk::Rng rng(4);
    bk::RegressionState st = bk::RegressionState::empty(30, 4, d.y, 1.3);
    st.u = bk::sample_U_prior(kp.a, 30, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::apply_add(st, cache, d, 2, false, 0.4);
    bk::GraphAdjacency g(4);
    g.set_edge(0, 2, true);
    g.set_edge(0, 1, true);
    const bk::RegressionHyper h;
    for (bool knockoff : {false, true}) {
        const double add = bk::log_ratio_add(st, cache, d, 0, knockoff, -0.9, g, h);
        bk::RegressionState st2 = st;
        bk::DesignCache c2 = cache;
        bk::apply_add(st2, c2, d, 0, knockoff, -0.9);
        const double del = bk::log_ratio_delete(st2, c2, d, 0, g, h);
        EXPECT_NEAR(add + del, 0.0, 1e-10);
        bk::apply_delete(st2, c2, d, 0);
        EXPECT_LT((c2.residual - cache.residual).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(AddDelete, InvariantsPreservedAndNeverBothIndicators) {
    bk::Dataset d = make_data(25, 5, 5, 1.0);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(5), 0.7);
    bk::Rng rng(6);
    bk::RegressionState st = bk::RegressionState::empty(25, 5, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 25, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    const bk::GraphAdjacency g(5);
    const bk::RegressionHyper h;
    for (int t = 0; t < 5000; ++t) {
        bk::step_add_delete(st, cache, d, g, h, rng);
        bk::step_within_model(st, cache, d, h, rng);
        ASSERT_NO_THROW(bk::check_state(st, d));
    }
    bk::DesignCache fresh = bk::make_design_cache(d, &kp, st);
    EXPECT_LT((fresh.residual - cache.residual).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Exchange, RatioIsMarginalLikelihoodDifferenceAndMoveIsInvolution) {
    bk::Dataset d = make_data(30, 3, 7, 0.8);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(3), 0.7);
    bk::Rng rng(8);
    bk::RegressionState st = bk::RegressionState::empty(30, 3, d.y, 1.1);
    st.u = bk::sample_U_prior(kp.a, 30, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::apply_add(st, cache, d, 0, false, 0.6);
    bk::apply_add(st, cache, d, 2, true, -0.3);
    bk::apply_add(st, cache, d, 1, true, 0.9);
    for (bk::Index j : {0, 1, 2}) {
        bk::ExchangeState ex = bk::make_exchange_state(st, cache, d, kp);
        const double before = bk::loglik_marginal_u(d.y, d.x, st.beta, st.beta_tilde, kp, st.sigma2);
        const double ratio = bk::log_ratio_exchange(st, cache, d, kp, ex, j);
        bk::RegressionState st2 = st;
        bk::apply_exchange(st2, cache, d, kp, ex, j);
        EXPECT_NO_THROW(bk::check_state(st2, d));
        const double after = bk::loglik_marginal_u(d.y, d.x, st2.beta, st2.beta_tilde, kp, st2.sigma2);
        EXPECT_NEAR(ratio, after - before, 1e-9);
        const bk::ExchangeState fresh = bk::make_exchange_state(st2, cache, d, kp);
        EXPECT_LT((fresh.r0 - ex.r0).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(fresh.q, ex.q, 1e-12);
        EXPECT_NEAR(bk::log_ratio_exchange(st2, cache, d, kp, ex, j), -ratio, 1e-9);
        bk::apply_exchange(st2, cache, d, kp, ex, j);
        EXPECT_EQ(st2.beta, st.beta);
        EXPECT_EQ(st2.beta_tilde, st.beta_tilde);
        EXPECT_EQ(st2.delta, st.delta);
    }
}

TEST(Exchange, StepLeavesCacheConsistent) {
    bk::Dataset d = make_data(20, 3, 11, 0.8);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(3), 0.7);
    bk::Rng rng(12);
    bk::RegressionState st = bk::RegressionState::empty(20, 3, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 20, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::apply_add(st, cache, d, 0, false, 0.4);
    bk::apply_add(st, cache, d, 2, true, -0.5);
    for (int t = 0; t < 50; ++t) {
        bk::step_exchange(st, cache, d, kp, rng);
        ASSERT_NO_THROW(bk::check_state(st, d));
    }
    const bk::DesignCache fresh = bk::make_design_cache(d, &kp, st);
    EXPECT_LT((fresh.residual - cache.residual).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((fresh.x_tilde - cache.x_tilde).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Exchange, PriorOnlyAlternatesAndJointVariantIsNoOp) {
    bk::Dataset d = make_data(10, 2, 9, 0.5);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(2), 0.7);
    bk::Rng rng(10);
    bk::RegressionState st = bk::RegressionState::empty(10, 2, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 10, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::apply_add(st, cache, d, 1, false, 0.2);
    bk::SamplerSwitches sw;
    sw.prior_only = true;
    EXPECT_EQ(bk::step_exchange(st, cache, d, kp, rng, sw), 1);
    EXPECT_EQ(st.delta_tilde[1], 1);
    sw.use_knockoffs = false;
    EXPECT_EQ(bk::step_exchange(st, cache, d, kp, rng, sw), 0);
}

TEST(WithinModel, NoActiveCoefficientsLeavesStateUnchanged) {
    bk::Dataset d = make_data(10, 3, 7, 1.0);
    bk::RegressionState st = bk::RegressionState::empty(10, 3, d.y, 1.0);
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::Rng rng(1);
    EXPECT_EQ(bk::step_within_model(st, cache, d, {}, rng), 0);
    EXPECT_TRUE(st.beta.isZero(0.0));
    EXPECT_EQ(cache.residual, d.y);
}

TEST(WithinModel, SymmetricProposalHasUnitHastingsFactor) {
    // N(b' | b, s^2) == N(b | b', s^2)
    for (double b : {-1.0, 0.2, 3.0}) {
        for (double bp : {-0.5, 0.25, 2.0}) {
            EXPECT_DOUBLE_EQ(bk::log_normal_pdf(bp, b, 0.0625), bk::log_normal_pdf(b, bp, 0.0625));
        }
    }
}

TEST(WithinModel, ConjugateNormalPosteriorMean) {
    bk::Dataset d = make_data(40, 1, 9, 0.7);
    const double sigma2 = 0.8;
    bk::RegressionHyper h;
    bk::RegressionState st = bk::RegressionState::empty(40, 1, d.y, sigma2);
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::apply_add(st, cache, d, 0, false, 0.1);
    const double xx = d.x.col(0).squaredNorm();
    const double v = 1.0 / (xx / sigma2 + 1.0 / (h.h_beta * sigma2));
    const double m = v * d.x.col(0).dot(d.y) / sigma2;
    bk::Rng rng(10);
    std::vector<double> draws;
    for (int t = 0; t < 201000; ++t) {
        bk::step_within_model(st, cache, d, h, rng, {false, false});
        if (t >= 1000) {
            draws.push_back(st.beta(0));
        }
    }
    const auto [mean, se] = batch_mean(draws);
    EXPECT_NEAR(mean, m, 3.0 * se) << "analytic " << m;
}

TEST(AddDelete, OneVariableEnumerationMatchesChain) {
    // p = 1, fixed Omega, sigma2 and U: three models {gamma = 0, delta = 1, delta~ = 1}
    bk::Dataset d = make_data(20, 1, 12, 0.35);
    Matrix om(1, 1);
    om << 1.0;
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix(om), 0.8);
    const double sigma2 = 1.1;
    bk::RegressionHyper h;
    h.a = -0.5;
    bk::Rng rng(13);
    bk::RegressionState st = bk::RegressionState::empty(20, 1, d.y, sigma2);
    st.u = bk::sample_U_prior(kp.a, 20, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    const bk::GraphAdjacency g(1);

    const Vector xt = cache.x_tilde.col(0);
    const double l0 = bk::gaussian_loglik_from_rss(d.y.squaredNorm(), 20, sigma2);
    const double l_orig = h.a + std::log(0.5) + log_marginal_quadrature(d.y, d.x.col(0), sigma2, h.h_beta * sigma2);
    const double l_knock = h.a + std::log(0.5) + log_marginal_quadrature(d.y, xt, sigma2, h.h_beta * sigma2);
    const double mx = std::max({l0, l_orig, l_knock});
    const double z = std::exp(l0 - mx) + std::exp(l_orig - mx) + std::exp(l_knock - mx);
    const double p_orig = std::exp(l_orig - mx) / z;
    const double p_knock = std::exp(l_knock - mx) / z;
    ASSERT_GT(p_orig, 0.05);
    ASSERT_GT(p_knock, 0.02);

    std::vector<double> in_orig;
    std::vector<double> in_knock;
    for (int t = 0; t < 402000; ++t) {
        bk::step_add_delete(st, cache, d, g, h, rng);
        bk::step_within_model(st, cache, d, h, rng);
        if (t >= 2000) {
            in_orig.push_back(st.delta[0]);
            in_knock.push_back(st.delta_tilde[0]);
        }
    }
    const auto [mo, so] = batch_mean(in_orig);
    const auto [mk, sk] = batch_mean(in_knock);
    EXPECT_NEAR(mo, p_orig, 3.0 * so) << "enumerated " << p_orig;
    EXPECT_NEAR(mk, p_knock, 3.0 * sk) << "enumerated " << p_knock;

    // the sign-count bound dominates P[original inactive | D]
    const double bound = 1.0 - (mo - mk);
    EXPECT_GE(bound + 3.0 * (so + sk), 1.0 - p_orig);
}

TEST(AddDelete, PriorRecoveryMatchesIsingEnumeration) {
    const int p = 6;
    bk::Dataset d = make_data(3, p, 14, 0.0);
    bk::GraphAdjacency g(p);
    g.set_edge(0, 1, true);
    g.set_edge(1, 2, true);
    g.set_edge(2, 3, true);
    g.set_edge(0, 3, true);
    g.set_edge(4, 5, true);
    bk::RegressionHyper h;
    h.a = -0.8;
    h.b = 0.4;
    std::vector<double> marg(p, 0.0);
    double z = 0.0;
    for (int mask = 0; mask < (1 << p); ++mask) {
        std::vector<std::uint8_t> gm(p);
        for (int j = 0; j < p; ++j) {
            gm[static_cast<std::size_t>(j)] = (mask >> j) & 1;
        }
        const double w = std::exp(bk::ising_log_prior(gm, g, h.a, h.b));
        z += w;
        for (int j = 0; j < p; ++j) {
            marg[static_cast<std::size_t>(j)] += gm[static_cast<std::size_t>(j)] ? w : 0.0;
        }
    }
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(p), 0.5);
    bk::Rng rng(15);
    bk::RegressionState st = bk::RegressionState::empty(3, p, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 3, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    const bk::SamplerSwitches sw{true, true};
    std::vector<std::vector<double>> traces(p);
    for (int t = 0; t < 602000; ++t) {
        bk::step_add_delete(st, cache, d, g, h, rng, sw);
        bk::step_within_model(st, cache, d, h, rng, sw);
        if (t >= 2000) {
            for (int j = 0; j < p; ++j) {
                traces[static_cast<std::size_t>(j)].push_back(st.gamma[static_cast<std::size_t>(j)]);
            }
        }
    }
    for (int j = 0; j < p; ++j) {
        const auto [m, se] = batch_mean(traces[static_cast<std::size_t>(j)]);
        EXPECT_NEAR(m, marg[static_cast<std::size_t>(j)] / z, 3.0 * se + 1e-3) << "variable " << j;
    }
}

TEST(AddDelete, PriorRecoveryEmptyGraph0622) {
    const int p = 3;
    bk::Dataset d = make_data(3, p, 16, 0.0);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(p), 0.5);
    bk::Rng rng(17);
    bk::RegressionState st = bk::RegressionState::empty(3, p, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 3, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::RegressionHyper h;
    const bk::SamplerSwitches sw{true, true};
    std::vector<double> trace;
    for (int t = 0; t < 301000; ++t) {
        bk::step_add_delete(st, cache, d, bk::GraphAdjacency(p), h, rng, sw);
        if (t >= 1000) {
            trace.push_back(st.gamma[0]);
        }
    }
    const auto [m, se] = batch_mean(trace);
    EXPECT_NEAR(m, 0.622, 3.0 * se + 5e-4);
}

TEST(Sigma2, InverseGammaMoments) {
    bk::Dataset d = make_data(30, 2, 18, 1.0);
    bk::RegressionState st = bk::RegressionState::empty(30, 2, d.y, 1.0);
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::RegressionHyper h;
    bk::Rng rng(19);
    const double shape = h.a_sigma + 15.0;
    const double rate = h.b_sigma + 0.5 * d.y.squaredNorm();
    const int draws = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (int t = 0; t < draws; ++t) {
        const double v = bk::update_sigma2(st, cache, h, rng);
        s += v;
        s2 += v * v;
    }
    const double mean = rate / (shape - 1.0);
    const double var = rate * rate / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
    EXPECT_NEAR(s / draws, mean, 0.01 * mean);
    EXPECT_NEAR(s2 / draws - (s / draws) * (s / draws), var, 0.03 * var);
}

TEST(Sigma2, ZeroResidualUsesPriorRate) {
    bk::Dataset d;
    d.x = Matrix::Ones(4, 1);
    d.y = Vector::Zero(4);
    bk::RegressionState st = bk::RegressionState::empty(4, 1, d.y, 1.0);
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::RegressionHyper h;
    bk::Rng rng(20);
    double s = 0.0;
    for (int t = 0; t < 100000; ++t) {
        s += bk::update_sigma2(st, cache, h, rng);
    }
    EXPECT_NEAR(s / 100000, h.b_sigma / (h.a_sigma + 2.0 - 1.0), 0.01);
}

TEST(UConditional, MatchesCompletionOfSquaresOracle) {
    Matrix a(2, 2);
    a << 0.8, 0.3, 0.3, 0.6;
    Vector bt(2);
    bt << 0.7, -1.2;
    const double sigma2 = 0.9;
    const double r = 1.3;  // partial residual of the single row
    auto logf = [&](const Vector& u) {
        return -0.5 * u.dot(a.inverse() * u) - (r - u.dot(bt)) * (r - u.dot(bt)) / (2.0 * sigma2);
    };
    // Hessian and gradient at 0 by central differences (exact up to rounding for a quadratic)
    const double step = 1e-2;
    Matrix hess(2, 2);
    Vector grad(2);
    for (int i = 0; i < 2; ++i) {
        Vector ei = Vector::Zero(2);
        ei(i) = step;
        grad(i) = (logf(ei) - logf(-ei)) / (2 * step);
        for (int j = 0; j < 2; ++j) {
            Vector ej = Vector::Zero(2);
            ej(j) = step;
            hess(i, j) = (logf(ei + ej) - logf(ei - ej) - logf(-ei + ej) + logf(-ei - ej)) / (4 * step * step);
        }
    }
    const Matrix cov_oracle = (-hess).inverse();
    const Vector mean_oracle = cov_oracle * grad;
    Vector partial(1);
    partial << r;
    const Matrix cov = bk::u_conditional_covariance(a, bt, sigma2);
    const Matrix mean = bk::u_conditional_mean(a, bt, sigma2, partial);
    EXPECT_LT((cov - cov_oracle).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((mean.row(0).transpose() - mean_oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(UConditional, ShrinksInLoewnerOrder) {
    bk::Rng rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix b = rng.normal_matrix(4, 4);
        const Matrix a = bk::symmetrize(b * b.transpose() + 0.1 * Matrix::Identity(4, 4));
        const Vector bt = rng.normal_matrix(4, 1).col(0);
        const Matrix cov = bk::u_conditional_covariance(a, bt, 0.5 + rng.uniform());
        EXPECT_LE(bk::max_eigenvalue(cov - a), 1e-10 * a.norm());
        EXPECT_TRUE(bk::is_positive_definite(cov));
    }
}

TEST(UConditional, ZeroBetaTildeReducesToPrior) {
    Matrix a(2, 2);
    a << 0.8, 0.3, 0.3, 0.6;
    EXPECT_TRUE(bk::u_conditional_covariance(a, Vector::Zero(2), 1.0).isApprox(a));
    Vector r(3);
    r << 1.0, -2.0, 0.5;
    EXPECT_TRUE(bk::u_conditional_mean(a, Vector::Zero(2), 1.0, r).isZero(0.0));
}

TEST(UConditional, UpdateKeepsCacheConsistent) {
    bk::Dataset d = make_data(15, 3, 22, 1.0);
    const auto kp = bk::make_knockoff_params(bk::PrecisionMatrix::identity(3), 0.7);
    bk::Rng rng(23);
    bk::RegressionState st = bk::RegressionState::empty(15, 3, d.y, 1.0);
    st.u = bk::sample_U_prior(kp.a, 15, rng);
    bk::DesignCache cache = bk::make_design_cache(d, &kp, st);
    bk::apply_add(st, cache, d, 1, true, 0.8);
    bk::update_U(st, cache, d, kp, rng);
    const bk::DesignCache fresh = bk::make_design_cache(d, &kp, st);
    EXPECT_LT((fresh.residual - cache.residual).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((fresh.x_tilde - cache.x_tilde).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TruncatedNormal, HalfNormalMean) {
    bk::Rng rng(24);
    double s = 0.0;
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        const double v = bk::truncated_normal_below(0.0, 1.0, 0.0, rng);
        ASSERT_GT(v, 0.0);
        s += v;
    }
    EXPECT_NEAR(s / draws, 0.7979, 0.005);
}

TEST(TruncatedNormal, TailMeanFromExponentialSampler) {
    bk::Rng rng(25);
    const double lower = 2.0;
    double s = 0.0;
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        const double v = bk::truncated_standard_normal_below(lower, rng);
        ASSERT_GT(v, lower);
        s += v;
    }
    const double phi = std::exp(-0.5 * lower * lower) / std::sqrt(2 * std::numbers::pi);
    EXPECT_NEAR(s / draws, phi / (1.0 - bk::normal_cdf(lower)), 0.01);
}

TEST(TruncatedNormal, InfiniteLowerIsPlainNormal) {
    bk::Rng a(26);
    bk::Rng b(26);
    const double inf = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 10; ++t) {
        EXPECT_EQ(bk::truncated_normal_below(1.0, 2.0, -inf, a), 1.0 + 2.0 * b.normal());
    }
}

TEST(CensoredY, DrawsExceedBoundsAndUncensoredUntouched) {
    bk::Dataset d = make_data(50, 2, 27, 1.0);
    std::vector<std::uint8_t> ev(50, 1);
    for (int i = 0; i < 50; i += 3) {
        ev[static_cast<std::size_t>(i)] = 0;
    }
    d.event = ev;
    bk::RegressionState st = bk::RegressionState::empty(50, 2, d.y, 1.0);
    for (int i = 0; i < 50; i += 3) {
        st.y_latent(i) = d.y(i) + 1.0;
    }
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::apply_add(st, cache, d, 0, false, 3.0);
    bk::Rng rng(28);
    for (int t = 0; t < 200; ++t) {
        bk::update_censored_y(st, cache, d, rng);
        ASSERT_NO_THROW(bk::check_state(st, d));
    }
    const bk::DesignCache fresh = bk::make_design_cache(d, nullptr, st);
    EXPECT_LT((fresh.residual - cache.residual).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CensoredY, NoCensoringIsNoOp) {
    bk::Dataset d = make_data(10, 1, 29, 1.0);
    bk::RegressionState st = bk::RegressionState::empty(10, 1, d.y, 1.0);
    bk::DesignCache cache = bk::make_design_cache(d, nullptr, st);
    bk::Rng rng(30);
    bk::update_censored_y(st, cache, d, rng);
    EXPECT_EQ(st.y_latent, d.y);
}
