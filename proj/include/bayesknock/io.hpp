#pragma once

// Data ingestion, preprocessing, convergence diagnostics and report serialization.

#include "bayesknock/chain.hpp"
#include "bayesknock/common.hpp"
#include "bayesknock/data.hpp"
#include "bayesknock/distributions.hpp"
#include "bayesknock/fdr.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <sstream>
#include <string>

namespace bayesknock {

using Json = nlohmann::ordered_json;

// -------------------------------------------------------------------------------------------------
//     Delimited text
// -------------------------------------------------------------------------------------------------

/// Shortest-safe round-trip text for a double; NaN prints as "nan".
inline std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Splits one CSV line. Double-quoted fields may contain commas; "" is an escaped quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<Index>(it - header.begin());
    }
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "': " + std::strerror(errno));
    }
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw Error(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) {
        throw Error(path.string() + ": file is empty");
    }
    return t;
}

/// Strict numeric parse: the whole cell must be a finite decimal number.
inline std::optional<double> parse_number(const std::string& cell) {
    if (cell.empty()) {
        return std::nullopt;
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

struct LoadOptions {
    std::string response = "y";
    std::string event_column;        ///< AFT: 1 = event observed, 0 = censored
    ResponseMode mode = ResponseMode::Linear;
    bool log_response = true;        ///< AFT: response holds times and is log-transformed
    bool center = true;
    bool nonparanormal = false;
    std::vector<std::string> covariates;  ///< empty = every other column
};

// -------------------------------------------------------------------------------------------------
//     Nonparanormal transform
// -------------------------------------------------------------------------------------------------

/// Average ranks (1-based) with ties sharing the mean of their positions.
inline Vector average_ranks(const Vector& v) {
    const Index n = v.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
    Vector r(n);
    Index i = 0;
    while (i < n) {
        Index j = i;
        while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) == v(order[static_cast<std::size_t>(i)])) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index k = i; k <= j; ++k) {
            r(order[static_cast<std::size_t>(k)]) = avg;
        }
        i = j + 1;
    }
    return r;
}

/// Per column: average ranks / n, Winsorized to [d, 1 - d] with d = 1 / (4 n^{1/4} sqrt(pi log n)),
/// standard normal quantile, then standardized to mean 0 and unit (n - 1) variance.
inline Matrix nonparanormal_transform(const Matrix& x) {
    const Index n = x.rows();
    require(n >= 2, "nonparanormal transform needs at least 2 rows");
    const double nd = static_cast<double>(n);
    const double delta = 1.0 / (4.0 * std::pow(nd, 0.25) * std::sqrt(M_PI * std::log(nd)));
    Matrix out(n, x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
            throw Error("degenerate column " + std::to_string(j + 1));
        }
        const Vector r = average_ranks(x.col(j));
        for (Index i = 0; i < n; ++i) {
            const double u = std::clamp(r(i) / nd, delta, 1.0 - delta);
            out(i, j) = normal_quantile(u);
        }
        const double mean = out.col(j).mean();
        out.col(j).array() -= mean;
        const double sd = std::sqrt(out.col(j).squaredNorm() / (nd - 1.0));
        if (!(sd > 0.0)) {
            throw Error("degenerate column " + std::to_string(j + 1));
        }
        out.col(j) /= sd;
    }
    return out;
}

/// Reads a dataset. Covariates are every non-response, non-event column unless listed.
/// Preprocessing order: nonparanormal (covariates), then centering (covariates; response too in
/// linear mode).
inline Dataset load_csv(const std::filesystem::path& path, const LoadOptions& opt) {
    const CsvTable t = read_csv_table(path);
    const Index y_col = t.column(opt.response);
    if (y_col < 0) {
        throw Error(path.string() + ": missing response column '" + opt.response + "'");
    }
    Index e_col = -1;
    if (opt.mode == ResponseMode::Aft) {
        if (opt.event_column.empty()) {
            throw Error("AFT mode needs an event column");
        }
        e_col = t.column(opt.event_column);
        if (e_col < 0) {
            throw Error(path.string() + ": missing event column '" + opt.event_column + "'");
        }
    }
    std::vector<Index> x_cols;
    if (opt.covariates.empty()) {
        for (Index c = 0; c < static_cast<Index>(t.header.size()); ++c) {
            if (c != y_col && c != e_col) {
                x_cols.push_back(c);
            }
        }
    } else {
        for (const auto& name : opt.covariates) {
            const Index c = t.column(name);
            if (c < 0) {
                throw Error(path.string() + ": missing covariate column '" + name + "'");
            }
            x_cols.push_back(c);
        }
    }

    const Index n = static_cast<Index>(t.rows.size());
    Dataset d;
    d.response_name = opt.response;
    d.y.resize(n);
    d.x.resize(n, static_cast<Index>(x_cols.size()));
    for (Index c : x_cols) {
        d.names.push_back(t.header[static_cast<std::size_t>(c)]);
    }
    std::vector<std::uint8_t> event;
    auto cell = [&](Index i, Index c) {
        const std::string& s = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        const auto v = parse_number(s);
        if (!v) {
            // +2: one for the header, one for 1-based rows
            throw Error(path.string() + ": row " + std::to_string(i + 2) + ", column '" +
                        t.header[static_cast<std::size_t>(c)] + "': non-numeric cell '" + s + "'");
        }
        return *v;
    };
    for (Index i = 0; i < n; ++i) {
        double y = cell(i, y_col);
        if (opt.mode == ResponseMode::Aft) {
            const double e = cell(i, e_col);
            if (e != 0.0 && e != 1.0) {
                throw Error(path.string() + ": row " + std::to_string(i + 2) + ", column '" + opt.event_column +
                            "': event indicator must be 0 or 1");
            }
            event.push_back(static_cast<std::uint8_t>(e));
            if (opt.log_response) {
                if (!(y > 0.0)) {
                    throw Error(path.string() + ": row " + std::to_string(i + 2) + ", column '" + opt.response +
                                "': survival time must be positive");
                }
                y = std::log(y);
            }
        }
        d.y(i) = y;
        for (std::size_t k = 0; k < x_cols.size(); ++k) {
            d.x(i, static_cast<Index>(k)) = cell(i, x_cols[k]);
        }
    }
    if (opt.mode == ResponseMode::Aft) {
        d.event = std::move(event);
    }
    if (opt.nonparanormal) {
        d.x = nonparanormal_transform(d.x);
    }
    if (opt.center) {
        center_columns(d.x);
        if (opt.mode == ResponseMode::Linear) {
            center(d.y);
        }
    }
    d.validate();
    return d;
}

/// Writes a dataset in the layout load_csv reads (response, optional event, covariates).
inline void write_dataset_csv(const Dataset& d, const std::filesystem::path& path, const std::string& event_name = "event") {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "': " + std::strerror(errno));
    }
    out << d.response_name;
    if (d.event) {
        out << ',' << event_name;
    }
    for (Index j = 0; j < d.p(); ++j) {
        out << ',' << d.name(j);
    }
    out << '\n';
    for (Index i = 0; i < d.n(); ++i) {
        out << format_double(d.y(i));
        if (d.event) {
            out << ',' << static_cast<int>((*d.event)[static_cast<std::size_t>(i)]);
        }
        for (Index j = 0; j < d.p(); ++j) {
            out << ',' << format_double(d.x(i, j));
        }
        out << '\n';
    }
}

// -------------------------------------------------------------------------------------------------
//     Geweke diagnostic
// -------------------------------------------------------------------------------------------------

/// Spectral density at frequency zero from an AR(k) fit (Yule-Walker via Levinson-Durbin),
/// k chosen by AIC up to min(n - 1, 10 log10 n). Returns the variance of the series times n
/// equivalent, i.e. S(0) with var(mean) ~ S(0) / n.
inline double spectrum0_ar(const Vector& x) {
    const Index n = x.size();
    const Vector c = x.array() - x.mean();
    const Index max_order = std::min<Index>(n - 1, static_cast<Index>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
    Vector acov(max_order + 1);
    for (Index k = 0; k <= max_order; ++k) {
        acov(k) = c.head(n - k).dot(c.tail(n - k)) / static_cast<double>(n);
    }
    if (!(acov(0) > 0.0)) {
        throw Error("zero variance");
    }
    Vector phi = Vector::Zero(max_order);
    Vector prev = Vector::Zero(max_order);
    double err = acov(0);
    double best_aic = static_cast<double>(n) * std::log(err);
    double best_s0 = err;
    for (Index k = 1; k <= max_order; ++k) {
        double num = acov(k);
        for (Index j = 1; j < k; ++j) {
            num -= prev(j - 1) * acov(k - j);
        }
        const double refl = num / err;
        phi(k - 1) = refl;
        for (Index j = 1; j < k; ++j) {
            phi(j - 1) = prev(j - 1) - refl * prev(k - j - 1);
        }
        err *= 1.0 - refl * refl;
        if (!(err > 0.0)) {
            break;
        }
        prev.head(k) = phi.head(k);
        const double aic = static_cast<double>(n) * std::log(err) + 2.0 * static_cast<double>(k);
        if (aic < best_aic) {
            best_aic = aic;
            const double denom = 1.0 - phi.head(k).sum();
            best_s0 = err / (denom * denom);
        }
    }
    return best_s0;
}

/// z = (mean_A - mean_B) / sqrt(S_A(0)/n_A + S_B(0)/n_B) over the first frac_a and last frac_b
/// of the chain.
inline double geweke_z(const Vector& chain, double frac_a = 0.1, double frac_b = 0.5) {
    require(chain.size() >= 100, "chain too short for the Geweke diagnostic (need at least 100 draws)");
    require(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0, "Geweke fractions must be positive and sum to at most 1");
    const Index n = chain.size();
    const Index na = static_cast<Index>(std::floor(frac_a * static_cast<double>(n)));
    const Index nb = static_cast<Index>(std::floor(frac_b * static_cast<double>(n)));
    const Vector a = chain.head(na);
    const Vector b = chain.tail(nb);
    const double va = spectrum0_ar(a) / static_cast<double>(na);
    const double vb = spectrum0_ar(b) / static_cast<double>(nb);
    return (a.mean() - b.mean()) / std::sqrt(va + vb);
}

/// Geweke z per coefficient and for sigma2 on one chain; NaN where the chain is constant or short.
struct ChainGeweke {
    std::uint64_t seed = 0;
    Index draws = 0;
    Vector beta;
    double sigma2 = std::numeric_limits<double>::quiet_NaN();
    double mean_beta = std::numeric_limits<double>::quiet_NaN();  ///< mean over finite entries
};

inline ChainGeweke chain_geweke(const PosteriorDraws& d) {
    ChainGeweke g;
    g.seed = d.seeds.empty() ? 0 : d.seeds.front();
    g.draws = d.draws();
    g.beta = Vector::Constant(d.p(), std::numeric_limits<double>::quiet_NaN());
    auto safe = [](const Vector& v) {
        try {
            return geweke_z(v);
        } catch (const Error&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    double sum = 0.0;
    int count = 0;
    for (Index j = 0; j < d.p(); ++j) {
        g.beta(j) = safe(d.beta.col(j));
        if (std::isfinite(g.beta(j))) {
            sum += g.beta(j);
            ++count;
        }
    }
    g.sigma2 = safe(d.sigma2);
    if (count > 0) {
        g.mean_beta = sum / count;
    }
    return g;
}

// -------------------------------------------------------------------------------------------------
//     Reports
// -------------------------------------------------------------------------------------------------

/// Linear-interpolation sample quantile (type 7).
inline double quantile(std::vector<double> v, double prob) {
    require(!v.empty(), "quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline const std::vector<double>& report_probs() {
    static const std::vector<double> probs{0.025, 0.25, 0.5, 0.75, 0.975};
    return probs;
}

struct VariableSummary {
    std::string name;
    double beta_mean = 0.0;
    std::vector<double> beta_q;  ///< at report_probs()
    double inclusion = 0.0;
    double beta_tilde_mean = 0.0;
    double knockoff_inclusion = 0.0;
    double w_mean = 0.0;
    std::vector<double> w_q;
    double p_positive = 0.0;
    double p_negative = 0.0;
};

struct Report {
    SelectionReport selection;
    std::vector<VariableSummary> summaries;
    Matrix edge_ppi;
    Matrix omega_mean;
    Json manifest;

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& s : summaries) {
            out.push_back(s.name);
        }
        return out;
    }
};

inline std::vector<VariableSummary> summarize_draws(const PosteriorDraws& d, const std::vector<std::string>& names) {
    require(static_cast<Index>(names.size()) == d.p(), "name count does not match draws");
    const WDraws w = compute_W(d.beta, d.beta_tilde);
    const SignCounts sc = count_signs(w);
    const double t = static_cast<double>(d.draws());
    std::vector<VariableSummary> out;
    for (Index j = 0; j < d.p(); ++j) {
        VariableSummary s;
        s.name = names[static_cast<std::size_t>(j)];
        const std::vector<double> b(d.beta.col(j).data(), d.beta.col(j).data() + d.draws());
        const std::vector<double> wj(w.w.col(j).data(), w.w.col(j).data() + d.draws());
        s.beta_mean = d.beta.col(j).mean();
        s.beta_tilde_mean = d.beta_tilde.col(j).mean();
        s.inclusion = static_cast<double>((d.beta.col(j).array() != 0.0).count()) / t;
        s.knockoff_inclusion = static_cast<double>((d.beta_tilde.col(j).array() != 0.0).count()) / t;
        s.w_mean = w.w.col(j).mean();
        for (double pr : report_probs()) {
            s.beta_q.push_back(quantile(b, pr));
            s.w_q.push_back(quantile(wj, pr));
        }
        s.p_positive = static_cast<double>(sc.positive(j)) / t;
        s.p_negative = static_cast<double>(sc.negative(j)) / t;
        out.push_back(std::move(s));
    }
    return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "': " + std::strerror(errno));
    }
    return out;
}

inline void close_checked(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

inline std::string prob_label(double p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "q%03d", static_cast<int>(std::lround(p * 1000.0)));
    return buf;
}

inline double need_number(const std::string& s, const std::string& where) {
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(where + ": not a number: '" + s + "'");
    }
    return v;
}

}  // namespace detail

/// Square matrix with a header row and a leading name column.
inline void write_matrix_csv(const Matrix& m, const std::vector<std::string>& names, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "variable";
    for (const auto& n : names) {
        out << ',' << n;
    }
    out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        out << names[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.cols(); ++j) {
            out << ',' << format_double(m(i, j));
        }
        out << '\n';
    }
    detail::close_checked(out, path);
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv_table(path);
    const Index p = static_cast<Index>(t.header.size()) - 1;
    require(static_cast<Index>(t.rows.size()) == p, path.string() + ": matrix is not square");
    Matrix m(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            m(i, j) = detail::need_number(t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)], path.string());
        }
    }
    return m;
}

inline void write_json(const Json& j, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    detail::close_checked(out, path);
}

/// Files: selection.csv, bfdr_curve.csv, posterior_summary.csv, w_quantiles.csv, edge_ppi.csv,
/// omega_mean.csv, manifest.json.
inline void write_report(const Report& r, const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) {
        throw Error("cannot create '" + outdir.string() + "': " + ec.message());
    }
    const auto names = r.names();
    const SelectionReport& sel = r.selection;
    const Index p = sel.upper_bound.size();
    require(static_cast<Index>(names.size()) == p, "report summaries do not match the selection");

    std::vector<Index> rank(static_cast<std::size_t>(p));
    for (Index k = 0; k < p; ++k) {
        rank[static_cast<std::size_t>(sel.order[static_cast<std::size_t>(k)])] = k + 1;
    }
    std::vector<bool> selected(static_cast<std::size_t>(p), false);
    for (int j : sel.selected) {
        selected[static_cast<std::size_t>(j)] = true;
    }

    {
        const auto path = outdir / "selection.csv";
        auto out = detail::open_out(path);
        out << "index,variable,upper_bound,rank,selected\n";
        for (Index j = 0; j < p; ++j) {
            out << j + 1 << ',' << names[static_cast<std::size_t>(j)] << ',' << format_double(sel.upper_bound(j)) << ','
                << rank[static_cast<std::size_t>(j)] << ',' << (selected[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
        }
        detail::close_checked(out, path);
    }
    {
        const auto path = outdir / "bfdr_curve.csv";
        auto out = detail::open_out(path);
        out << "rank,index,variable,upper_bound,bfdr,selected\n";
        for (Index k = 0; k < p; ++k) {
            const int j = sel.order[static_cast<std::size_t>(k)];
            out << k + 1 << ',' << j + 1 << ',' << names[static_cast<std::size_t>(j)] << ','
                << format_double(sel.upper_bound(j)) << ',' << format_double(sel.bfdr_curve(k)) << ','
                << (selected[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
        }
        detail::close_checked(out, path);
    }
    {
        const auto path = outdir / "posterior_summary.csv";
        auto out = detail::open_out(path);
        out << "index,variable,beta_mean";
        for (double pr : report_probs()) {
            out << ",beta_" << detail::prob_label(pr);
        }
        out << ",inclusion,beta_tilde_mean,knockoff_inclusion\n";
        for (Index j = 0; j < p; ++j) {
            const auto& s = r.summaries[static_cast<std::size_t>(j)];
            out << j + 1 << ',' << s.name << ',' << format_double(s.beta_mean);
            for (double q : s.beta_q) {
                out << ',' << format_double(q);
            }
            out << ',' << format_double(s.inclusion) << ',' << format_double(s.beta_tilde_mean) << ','
                << format_double(s.knockoff_inclusion) << '\n';
        }
        detail::close_checked(out, path);
    }
    {
        const auto path = outdir / "w_quantiles.csv";
        auto out = detail::open_out(path);
        out << "index,variable,w_mean";
        for (double pr : report_probs()) {
            out << ",w_" << detail::prob_label(pr);
        }
        out << ",p_positive,p_negative\n";
        for (Index j = 0; j < p; ++j) {
            const auto& s = r.summaries[static_cast<std::size_t>(j)];
            out << j + 1 << ',' << s.name << ',' << format_double(s.w_mean);
            for (double q : s.w_q) {
                out << ',' << format_double(q);
            }
            out << ',' << format_double(s.p_positive) << ',' << format_double(s.p_negative) << '\n';
        }
        detail::close_checked(out, path);
    }
    write_matrix_csv(r.edge_ppi, names, outdir / "edge_ppi.csv");
    write_matrix_csv(r.omega_mean, names, outdir / "omega_mean.csv");
    write_json(r.manifest, outdir / "manifest.json");
}

inline Report read_report(const std::filesystem::path& outdir) {
    Report r;
    const auto sel_path = (outdir / "selection.csv").string();
    const CsvTable sel = read_csv_table(outdir / "selection.csv");
    const Index p = static_cast<Index>(sel.rows.size());
    r.selection.upper_bound.resize(p);
    for (Index j = 0; j < p; ++j) {
        const auto& row = sel.rows[static_cast<std::size_t>(j)];
        r.selection.upper_bound(j) = detail::need_number(row[2], sel_path);
        if (row[4] == "1") {
            r.selection.selected.push_back(static_cast<int>(j));
        }
    }
    const auto curve_path = (outdir / "bfdr_curve.csv").string();
    const CsvTable curve = read_csv_table(outdir / "bfdr_curve.csv");
    require(static_cast<Index>(curve.rows.size()) == p, curve_path + ": row count differs from selection.csv");
    r.selection.bfdr_curve.resize(p);
    for (Index k = 0; k < p; ++k) {
        const auto& row = curve.rows[static_cast<std::size_t>(k)];
        r.selection.order.push_back(static_cast<int>(detail::need_number(row[1], curve_path)) - 1);
        r.selection.bfdr_curve(k) = detail::need_number(row[4], curve_path);
    }

    const auto sum_path = (outdir / "posterior_summary.csv").string();
    const CsvTable sum = read_csv_table(outdir / "posterior_summary.csv");
    const CsvTable wq = read_csv_table(outdir / "w_quantiles.csv");
    require(static_cast<Index>(sum.rows.size()) == p && static_cast<Index>(wq.rows.size()) == p,
            "summary row counts differ from selection.csv");
    const std::size_t nq = report_probs().size();
    for (Index j = 0; j < p; ++j) {
        const auto& a = sum.rows[static_cast<std::size_t>(j)];
        const auto& b = wq.rows[static_cast<std::size_t>(j)];
        VariableSummary s;
        s.name = a[1];
        s.beta_mean = detail::need_number(a[2], sum_path);
        for (std::size_t k = 0; k < nq; ++k) {
            s.beta_q.push_back(detail::need_number(a[3 + k], sum_path));
            s.w_q.push_back(detail::need_number(b[3 + k], sum_path));
        }
        s.inclusion = detail::need_number(a[3 + nq], sum_path);
        s.beta_tilde_mean = detail::need_number(a[4 + nq], sum_path);
        s.knockoff_inclusion = detail::need_number(a[5 + nq], sum_path);
        s.w_mean = detail::need_number(b[2], sum_path);
        s.p_positive = detail::need_number(b[3 + nq], sum_path);
        s.p_negative = detail::need_number(b[4 + nq], sum_path);
        r.summaries.push_back(std::move(s));
    }
    r.edge_ppi = read_matrix_csv(outdir / "edge_ppi.csv");
    r.omega_mean = read_matrix_csv(outdir / "omega_mean.csv");
    std::ifstream in(outdir / "manifest.json", std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + (outdir / "manifest.json").string() + "'");
    }
    r.manifest = Json::parse(in);
    if (r.manifest.contains("q")) {
        r.selection.q = r.manifest["q"].get<double>();
    }
    return r;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// NaN is not representable in JSON; emitted as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace bayesknock
