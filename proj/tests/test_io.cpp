#include "bayesknock/app.hpp"
#include "bayesknock/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace bk = bayesknock;
namespace fs = std::filesystem;
using bk::Matrix;
using bk::Vector;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("bayesknock_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        out[e.path().filename().string()] = slurp(e.path());
    }
    return out;
}

template <class F>
std::string error_of(F f) {
    try {
        f();
    } catch (const bk::Error& e) {
        return e.what();
    }
    return "";
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BAYESKNOCK_CLI) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace

TEST(Csv, SmallFileShape) {
    const auto dir = scratch("small");
    write_text(dir / "d.csv", "x,y\n1,2\n2,4\n3,9\n");
    bk::LoadOptions o;
    o.center = false;
    const auto d = bk::load_csv(dir / "d.csv", o);
    EXPECT_EQ(d.n(), 3);
    EXPECT_EQ(d.p(), 1);
    EXPECT_EQ(d.names, (std::vector<std::string>{"x"}));
    EXPECT_EQ(d.y(2), 9.0);
}

TEST(Csv, QuotesCrlfAndBom) {
    const auto dir = scratch("quotes");
    write_text(dir / "d.csv", "\xEF\xBB\xBF\"a\",y\r\n\"1\", 2\r\n\r\n3,4\r\n");
    bk::LoadOptions o;
    o.center = false;
    const auto d = bk::load_csv(dir / "d.csv", o);
    EXPECT_EQ(d.names.front(), "a");
    EXPECT_EQ(d.n(), 2);
    EXPECT_EQ(d.x(1, 0), 3.0);
}

TEST(Csv, NonNumericCellNamed) {
    const auto dir = scratch("na");
    write_text(dir / "d.csv", "a,b,y\n1,2,3\n4,NA,6\n");
    const std::string msg = error_of([&] { bk::load_csv(dir / "d.csv", {}); });
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("NA"), std::string::npos) << msg;
}

TEST(Csv, RaggedAndMissingColumns) {
    const auto dir = scratch("ragged");
    write_text(dir / "r.csv", "a,y\n1,2\n3\n");
    EXPECT_NE(error_of([&] { bk::load_csv(dir / "r.csv", {}); }).find("row 3 has 1 fields"), std::string::npos);
    write_text(dir / "m.csv", "a,b\n1,2\n");
    EXPECT_NE(error_of([&] { bk::load_csv(dir / "m.csv", {}); }).find("missing response column"), std::string::npos);
    bk::LoadOptions o;
    o.covariates = {"zz"};
    write_text(dir / "c.csv", "a,y\n1,2\n");
    EXPECT_FALSE(error_of([&] { bk::load_csv(dir / "c.csv", o); }).empty());
    EXPECT_FALSE(error_of([&] { bk::load_csv(dir / "absent.csv", {}); }).empty());
}

TEST(Csv, CenteringAndAftHandling) {
    const auto dir = scratch("aft");
    write_text(dir / "d.csv", "a,b,time,event\n1,5,2.0,1\n2,7,3.0,0\n4,6,1.5,1\n9,1,8.0,1\n");
    bk::LoadOptions o;
    o.response = "time";
    o.event_column = "event";
    o.mode = bk::ResponseMode::Aft;
    const auto d = bk::load_csv(dir / "d.csv", o);
    EXPECT_EQ(d.p(), 2);
    EXPECT_LT(d.x.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_DOUBLE_EQ(d.y(1), std::log(3.0));  // responses not centered under censoring
    EXPECT_EQ(d.censored_count(), 1);

    write_text(dir / "bad.csv", "a,time,event\n1,2,2\n");
    EXPECT_FALSE(error_of([&] { bk::load_csv(dir / "bad.csv", o); }).empty());
    write_text(dir / "neg.csv", "a,time,event\n1,-2,1\n");
    EXPECT_FALSE(error_of([&] { bk::load_csv(dir / "neg.csv", o); }).empty());
    o.event_column.clear();
    EXPECT_NE(error_of([&] { bk::load_csv(dir / "d.csv", o); }).find("event column"), std::string::npos);

    bk::LoadOptions lin;
    write_text(dir / "lin.csv", "a,y\n1,2\n2,5\n6,11\n");
    const auto l = bk::load_csv(dir / "lin.csv", lin);
    EXPECT_LT(std::abs(l.y.mean()), 1e-12);
}

TEST(Csv, WriteThenReadRoundTrip) {
    const auto dir = scratch("roundtrip");
    bk::Rng rng(2);
    bk::Dataset d;
    d.x = rng.normal_matrix(7, 3);
    d.y = rng.normal_matrix(7, 1).col(0);
    d.names = {"u", "v", "w"};
    bk::write_dataset_csv(d, dir / "d.csv");
    bk::LoadOptions o;
    o.center = false;
    const auto back = bk::load_csv(dir / "d.csv", o);
    EXPECT_EQ(back.x, d.x);
    EXPECT_EQ(back.y, d.y);
}

TEST(Nonparanormal, GaussianInputBarelyChanges) {
    bk::Rng rng(3);
    const Matrix x = rng.normal_matrix(200, 3);
    const Matrix z = bk::nonparanormal_transform(x);
    for (bk::Index j = 0; j < 3; ++j) {
        const Vector a = x.col(j).array() - x.col(j).mean();
        const Vector b = z.col(j).array() - z.col(j).mean();
        EXPECT_GT(a.dot(b) / (a.norm() * b.norm()), 0.99);
        EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
        EXPECT_NEAR(b.squaredNorm() / 199.0, 1.0, 1e-12);
    }
}

TEST(Nonparanormal, InvariantToMonotoneMaps) {
    bk::Rng rng(4);
    const Matrix x = rng.normal_matrix(50, 2);
    const Matrix ex = x.array().exp().matrix();
    EXPECT_EQ(bk::nonparanormal_transform(x), bk::nonparanormal_transform(ex));
}

TEST(Nonparanormal, AverageRanksAndDegenerate) {
    Vector v(5);
    v << 3.0, 1.0, 3.0, 2.0, 3.0;
    Vector r(5);
    r << 4.0, 1.0, 4.0, 2.0, 4.0;
    EXPECT_EQ(bk::average_ranks(v), r);
    Matrix x(4, 2);
    x << 1, 2, 2, 2, 3, 2, 4, 2;
    EXPECT_NE(error_of([&] { bk::nonparanormal_transform(x); }).find("degenerate column 2"), std::string::npos);
}

TEST(Geweke, IidChainsMostlyWithinThree) {
    int ok = 0;
    for (int s = 0; s < 20; ++s) {
        bk::Rng rng(100 + static_cast<std::uint64_t>(s));
        const Vector c = rng.normal_matrix(2000, 1).col(0);
        ok += std::abs(bk::geweke_z(c)) < 3.0;
    }
    EXPECT_GE(ok, 19);
}

TEST(Geweke, DriftDetected) {
    bk::Rng rng(7);
    Vector c = rng.normal_matrix(2000, 1).col(0);
    for (bk::Index i = 0; i < c.size(); ++i) {
        c(i) += 3.0 * static_cast<double>(i) / 2000.0;
    }
    EXPECT_GT(std::abs(bk::geweke_z(c)), 5.0);
}

TEST(Geweke, ErrorCases) {
    EXPECT_NE(error_of([] { bk::geweke_z(Vector::Constant(500, 1.0)); }).find("zero variance"), std::string::npos);
    bk::Rng rng(1);
    EXPECT_FALSE(error_of([&] { bk::geweke_z(rng.normal_matrix(50, 1).col(0)); }).empty());
}

TEST(Geweke, Ar1SpectrumMatchesTheory) {
    // spectral density at zero of AR(1) with phi, unit innovations: 1 / (1 - phi)^2
    bk::Rng rng(8);
    const double phi = 0.6;
    Vector c(200000);
    double prev = 0.0;
    for (bk::Index i = 0; i < c.size(); ++i) {
        prev = phi * prev + rng.normal();
        c(i) = prev;
    }
    EXPECT_NEAR(bk::spectrum0_ar(c), 1.0 / ((1 - phi) * (1 - phi)), 0.2);
}

TEST(Quantile, TypeSeven) {
    EXPECT_DOUBLE_EQ(bk::quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(bk::quantile({1, 2, 3, 4}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(bk::quantile({4, 1, 3, 2}, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(bk::quantile({0, 10}, 0.025), 0.25);
}

TEST(Report, RoundTripThroughDisk) {
    const auto sim = bk::gen_scenario1(4, 60, 5, 2);
    bk::RunConfig cfg;
    cfg.burn_in = 100;
    cfg.iterations = 150;
    cfg.seed = 9;
    cfg.output = scratch("report").string();
    const bk::Report r = bk::fit_report(bk::prepare_for_fit(sim.data), cfg);
    bk::write_report(r, cfg.output);
    const bk::Report back = bk::read_report(cfg.output);
    EXPECT_EQ(back.selection.upper_bound, r.selection.upper_bound);
    EXPECT_EQ(back.selection.selected, r.selection.selected);
    EXPECT_EQ(back.selection.order, r.selection.order);
    EXPECT_EQ(back.selection.bfdr_curve, r.selection.bfdr_curve);
    EXPECT_EQ(back.edge_ppi, r.edge_ppi);
    EXPECT_EQ(back.omega_mean, r.omega_mean);
    EXPECT_EQ(back.names(), r.names());
    EXPECT_EQ(back.manifest, r.manifest);
    for (std::size_t j = 0; j < r.summaries.size(); ++j) {
        EXPECT_EQ(back.summaries[j].beta_q, r.summaries[j].beta_q);
        EXPECT_EQ(back.summaries[j].p_negative, r.summaries[j].p_negative);
    }
    EXPECT_EQ(r.manifest["data"]["p"], 5);
    EXPECT_EQ(r.manifest["chains"].size(), 1U);
}

TEST(Report, EmptySelectionStillWritesEverything) {
    bk::Rng rng(10);
    bk::Dataset d;
    d.x = rng.normal_matrix(40, 3);
    d.y = rng.normal_matrix(40, 1).col(0);
    d.names = {"a", "b", "c"};
    bk::RunConfig cfg;
    cfg.burn_in = 50;
    cfg.iterations = 50;
    cfg.hyper.q = 1e-6;
    cfg.output = scratch("empty").string();
    const auto r = bk::fit_report(bk::prepare_for_fit(d), cfg);
    bk::write_report(r, cfg.output);
    for (const char* f : {"selection.csv", "bfdr_curve.csv", "posterior_summary.csv", "w_quantiles.csv", "edge_ppi.csv",
                          "omega_mean.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(fs::path(cfg.output) / f)) << f;
    }
    EXPECT_TRUE(bk::read_report(cfg.output).selection.selected.empty() || !r.selection.selected.empty());
}

TEST(RunConfig, ValidationAndJson) {
    bk::RunConfig c;
    EXPECT_FALSE(error_of([&] {
                     c.verb = "select";
                     c.validate();
                 }).empty());
    c.verb = "simulate";
    c.validate();
    c.hyper.q = 2.0;
    EXPECT_FALSE(error_of([&] { c.validate(); }).empty());
    c.hyper.q = 0.1;
    c.methods = {"nonsense"};
    EXPECT_FALSE(error_of([&] { c.method_configs(); }).empty());
    const auto j = bk::RunConfig{}.to_json();
    EXPECT_TRUE(j.contains("hyperparameters"));
    EXPECT_EQ(j["hyperparameters"]["v0"], 1e-4);
}

TEST(Cli, SelectTwiceIsByteIdentical) {
    const auto dir = scratch("cli_select");
    const auto sim = bk::gen_scenario2(3, 80, 8, 2);
    bk::write_dataset_csv(sim.data, dir / "data.csv");
    const std::string args = "select -i " + (dir / "data.csv").string() + " -o " + (dir / "out").string() +
                             " --burn-in 200 --iterations 200 --chains 2 --seed 5";
    ASSERT_EQ(run_cli(args), 0);
    const auto first = snapshot(dir / "out");
    ASSERT_EQ(run_cli(args), 0);
    EXPECT_EQ(first, snapshot(dir / "out"));
    EXPECT_EQ(first.size(), 7U);
}

TEST(Cli, SimulateTwiceIsByteIdentical) {
    const auto dir = scratch("cli_sim");
    const std::string args = "simulate --scenario 1 -n 60 -p 6 --n-active 2 --replicates 2 --burn-in 100 "
                             "--iterations 100 --methods BayesKnock,Joint -o " +
                             (dir / "out").string();
    ASSERT_EQ(run_cli(args), 0);
    const auto first = snapshot(dir / "out");
    ASSERT_EQ(run_cli(args + " --threads 2"), 0);
    auto second = snapshot(dir / "out");
    // the thread count is recorded in the manifest; data files must agree exactly
    EXPECT_EQ(first.at("replicates.csv"), second.at("replicates.csv"));
    EXPECT_EQ(first.at("summary.csv"), second.at("summary.csv"));
}

TEST(Cli, ConfigFileAndErrors) {
    const auto dir = scratch("cli_cfg");
    write_text(dir / "run.toml",
               "[simulate]\nscenario = \"2\"\nn = 50\np = 5\nn-active = 1\nreplicates = 1\nburn-in = 50\n"
               "iterations = 50\noutput = \"" +
                   (dir / "out").string() + "\"\n");
    ASSERT_EQ(run_cli("--config " + (dir / "run.toml").string() + " simulate"), 0);
    const auto manifest = bk::Json::parse(slurp(dir / "out" / "manifest.json"));
    EXPECT_EQ(manifest["config"]["simulation"]["scenario"], "2");
    EXPECT_EQ(manifest["config"]["simulation"]["n"], 50);

    EXPECT_NE(run_cli(""), 0);
    EXPECT_NE(run_cli("select"), 0);
    EXPECT_NE(run_cli("select -i " + (dir / "absent.csv").string() + " -o " + (dir / "x").string()), 0);
    EXPECT_NE(run_cli("simulate --scenario 7"), 0);
    EXPECT_NE(run_cli("simulate --q 1.5 -o " + (dir / "y").string()), 0);
    EXPECT_NE(run_cli("frobnicate"), 0);
    EXPECT_EQ(run_cli("--version"), 0);
}
