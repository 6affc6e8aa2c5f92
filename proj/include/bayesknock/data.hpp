#pragma once

#include "bayesknock/common.hpp"

#include <optional>

namespace bayesknock {

enum class ResponseMode { Linear, Aft };

inline const char* to_string(ResponseMode mode) { return mode == ResponseMode::Linear ? "linear" : "aft"; }

/// Observed data D = {x_i, y_i}. In AFT mode y holds log(T*_i) = log(min(T_i, c_i)) and
/// event(i) = 1 when the event time was observed (kappa_i = 1), 0 when censored.
struct Dataset {
    Vector y;
    Matrix x;
    std::optional<std::vector<std::uint8_t>> event;
    std::vector<std::string> names;
    std::string response_name = "y";

    Index n() const { return x.rows(); }
    Index p() const { return x.cols(); }
    bool censored() const { return event.has_value(); }

    Index censored_count() const {
        if (!event) {
            return 0;
        }
        Index c = 0;
        for (auto e : *event) {
            c += e == 0 ? 1 : 0;
        }
        return c;
    }

    void validate() const {
        require(n() >= 2, "dataset needs at least 2 observations");
        require(p() >= 1, "dataset needs at least 1 covariate");
        require(y.size() == n(), "response length does not match covariate rows");
        require(x.allFinite() && y.allFinite(), "dataset contains non-finite values");
        if (event) {
            require(static_cast<Index>(event->size()) == n(), "censoring indicator length does not match rows");
            for (auto e : *event) {
                require(e == 0 || e == 1, "censoring indicators must be 0 or 1");
            }
        }
        require(names.empty() || static_cast<Index>(names.size()) == p(), "column name count does not match p");
    }

    std::string name(Index j) const {
        if (names.empty()) {
            return "x" + std::to_string(j + 1);
        }
        return names[static_cast<std::size_t>(j)];
    }
};

inline void center_columns(Matrix& x) {
    const Vector mean = x.colwise().mean();
    x.rowwise() -= mean.transpose();
}

inline void center(Vector& v) { v.array() -= v.mean(); }

}  // namespace bayesknock
