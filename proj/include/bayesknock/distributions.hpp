#pragma once

#include "bayesknock/common.hpp"

#include <boost/math/distributions/normal.hpp>

#include <limits>

namespace bayesknock {

inline double normal_quantile(double prob) {
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), prob);
}

inline double normal_cdf(double x) {
    return boost::math::cdf(boost::math::normal_distribution<double>(0.0, 1.0), x);
}

/// Standard normal restricted to (lower, inf). Plain rejection when the bound is low,
/// otherwise Robert's translated-exponential proposal with the optimal rate.
inline double truncated_standard_normal_below(double lower, Rng& rng) {
    if (lower == -std::numeric_limits<double>::infinity()) {
        return rng.normal();
    }
    if (lower < 0.45) {
        for (;;) {
            const double z = rng.normal();
            if (z > lower) {
                return z;
            }
        }
    }
    const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
    for (;;) {
        const double z = lower + rng.exponential(rate);
        const double d = z - rate;
        if (rng.uniform() <= std::exp(-0.5 * d * d) && z > lower) {
            return z;
        }
    }
}

/// Draw from N(mean, sd^2) restricted to (lower, inf); the result is strictly above lower.
inline double truncated_normal_below(double mean, double sd, double lower, Rng& rng) {
    const double z = truncated_standard_normal_below((lower - mean) / sd, rng);
    double value = mean + sd * z;
    if (!(value > lower)) {
        value = std::nextafter(lower, std::numeric_limits<double>::infinity());
    }
    return value;
}

}  // namespace bayesknock
