#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace nethop {
namespace {

namespace fs = std::filesystem;
using report::json;

const std::string kData = NETHOP_TEST_DATA;

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "nethop");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path()
            / ("nethop_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string sub(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

std::vector<std::string> path_args()
{
    return {"--graph", kData + "/path_edges.csv", "--nodes", kData + "/path_nodes.csv", "--sigma-bar", "0.1",
            "--delta", "0.5"};
}

TEST_F(CliTest, EstimateGoldenPathFixture)
{
    auto args = path_args();
    args.insert(args.begin(), "estimate");
    args.insert(args.end(), {"--out", sub("est"), "--propensity", "constant:0.5"});
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto est = json::parse(slurp(dir / "est" / "estimate.json"));
    EXPECT_EQ(est["schema_version"], 1);
    EXPECT_EQ(est["estimates"][0]["method"], "OR");
    EXPECT_NEAR(est["estimates"][0]["tau_hat"].get<double>(), 2.0, 1e-12);
    EXPECT_EQ(est["config"]["interference"]["lambda"], 2.0);
    EXPECT_EQ(est["config"]["interference"]["sigma_mode"], "supplied");
    EXPECT_EQ(est["config"]["interference"]["max_depth"], 4);
    EXPECT_EQ(est["config"]["level"], 0.95);
    const auto fit = json::parse(slurp(dir / "est" / "fit.json"));
    EXPECT_EQ(fit["digest"], est["fit_digest"]);
    EXPECT_EQ(fit["nodes"][1]["m_hat"], 1);
    EXPECT_EQ(fit["kept"].size(), 3u);
}

TEST_F(CliTest, EstimateDrEqualsOrForZeroPropensity)
{
    auto args = path_args();
    args.insert(args.begin(), "estimate");
    args.insert(args.end(), {"--out", sub("est"), "--propensity", "constant:0"});
    ASSERT_EQ(run(args).code, 0);
    const auto est = json::parse(slurp(dir / "est" / "estimate.json"));
    EXPECT_EQ(est["estimates"][1]["method"], "DR");
    EXPECT_EQ(est["estimates"][0]["tau_hat"], est["estimates"][1]["tau_hat"]);
}

TEST_F(CliTest, EstimateDecoupledIsReproducibleAndWorkerInvariant)
{
    auto args = path_args();
    args.insert(args.begin(), "estimate");
    args.insert(args.end(), {"--decouple", "--seed", "5"});
    auto a = args, b = args;
    a.insert(a.end(), {"--out", sub("a")});
    b.insert(b.end(), {"--out", sub("b"), "--workers", "3"});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(slurp(dir / "a" / "estimate.json"), slurp(dir / "b" / "estimate.json"));
    EXPECT_EQ(slurp(dir / "a" / "fit.json"), slurp(dir / "b" / "fit.json"));
    const auto fit = json::parse(slurp(dir / "a" / "fit.json"));
    EXPECT_EQ(fit["config"]["pattern_source"], "synthetic");
}

TEST_F(CliTest, SuppliedPropensityFile)
{
    {
        std::ofstream f(dir / "e.csv");
        f << "id,e\n0,0.5\n1,0.5\n2,0.5\n3,0.5\n4,0.5\n";
    }
    auto args = path_args();
    args.insert(args.begin(), "estimate");
    args.insert(args.end(), {"--out", sub("est"), "--propensity", "supplied:" + sub("e.csv")});
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto est = json::parse(slurp(dir / "est" / "estimate.json"));
    EXPECT_EQ(est["config"]["propensity"]["kind"], "supplied");
}

TEST_F(CliTest, MalformedCsvReportsLine)
{
    const auto r = run({"estimate", "--graph", kData + "/path_edges.csv", "--nodes", kData + "/bad_nodes.csv",
                        "--out", sub("x")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("bad_nodes.csv:5"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "x" / "estimate.json"));
}

TEST_F(CliTest, InvalidParametersRejectedBeforeWork)
{
    auto args = path_args();
    args.insert(args.begin(), "estimate");
    args.insert(args.end(), {"--out", sub("x"), "--lambda", "1"});
    const auto r = run(args);
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("lambda"), std::string::npos);
    EXPECT_NE(run({"estimate", "--graph", "nope.csv", "--nodes", "nope.csv", "--out", sub("x")}).code, 0);
    EXPECT_NE(run({"frobnicate"}).code, 0);
    auto conflict = path_args();
    conflict.insert(conflict.begin(), "estimate");
    conflict.insert(conflict.end(), {"--out", sub("x"), "--sigma-mode", "pooled"});
    EXPECT_NE(run(conflict).code, 0);
}

TEST_F(CliTest, PooledSigmaIsDefault)
{
    const auto r = run({"estimate", "--graph", kData + "/path_edges.csv", "--nodes", kData + "/path_nodes.csv",
                        "--out", sub("est")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto est = json::parse(slurp(dir / "est" / "estimate.json"));
    EXPECT_EQ(est["config"]["interference"]["sigma_mode"], "pooled-control-sd");
    EXPECT_NEAR(est["config"]["interference"]["sigma_bar"].get<double>(), std::sqrt(16.0 / 3.0), 1e-12);
}

TEST_F(CliTest, SimulateIsByteIdentical)
{
    const std::string spec = kData + "/torus_spec.json";
    ASSERT_EQ(run({"simulate", "--spec", spec, "--out", sub("a")}).code, 0);
    ASSERT_EQ(run({"simulate", "--spec", spec, "--out", sub("b")}).code, 0);
    for (const char* f : {"edges.csv", "nodes.csv", "truth.csv", "simulation.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    ASSERT_EQ(run({"simulate", "--spec", spec, "--out", sub("c"), "--seed", "12"}).code, 0);
    EXPECT_NE(slurp(dir / "a" / "nodes.csv"), slurp(dir / "c" / "nodes.csv"));

    // simulated files feed straight back into estimate
    const auto r = run({"estimate", "--graph", sub("a") + "/edges.csv", "--edge-header", "--nodes",
                        sub("a") + "/nodes.csv", "--sigma-bar", "0.5", "--out", sub("est")});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, McWritesSummaryAndRows)
{
    const std::string spec = kData + "/torus_spec.json";
    ASSERT_EQ(run({"mc", "--spec", spec, "--reps", "6", "--sigma-bar", "0.5", "--out", sub("a")}).code, 0);
    ASSERT_EQ(
        run({"mc", "--spec", spec, "--reps", "6", "--sigma-bar", "0.5", "--workers", "2", "--out", sub("b")}).code,
        0);
    EXPECT_EQ(slurp(dir / "a" / "mc_summary.json"), slurp(dir / "b" / "mc_summary.json"));
    EXPECT_EQ(slurp(dir / "a" / "mc_reps.csv"), slurp(dir / "b" / "mc_reps.csv"));
    const auto summary = json::parse(slurp(dir / "a" / "mc_summary.json"));
    EXPECT_EQ(summary["reps"], 6);
    std::istringstream rows(slurp(dir / "a" / "mc_reps.csv"));
    std::string line;
    std::size_t count = 0;
    while (std::getline(rows, line))
        ++count;
    EXPECT_EQ(count, 7u);

    ASSERT_EQ(run({"mc", "--spec", spec, "--reps", "1", "--sigma-bar", "0.5", "--out", sub("one")}).code, 0);
    const auto one = json::parse(slurp(dir / "one" / "mc_summary.json"));
    std::istringstream one_rows(slurp(dir / "one" / "mc_reps.csv"));
    std::getline(one_rows, line);
    std::getline(one_rows, line);
    std::vector<std::string> fields;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');)
        fields.push_back(cell);
    const double tau_or = std::stod(fields.at(3));
    EXPECT_EQ(one["tau_or"]["mean"].get<double>(), tau_or);
}

TEST_F(CliTest, TreeDumpIdenticalOutcomesIsRootOnly)
{
    {
        std::ofstream f(dir / "flat.csv");
        f << "id,z,y\n0,0,1\n1,1,7\n2,0,1\n3,0,1\n4,0,1\n";
    }
    const auto r = run({"tree-dump", "--graph", kData + "/path_edges.csv", "--nodes", sub("flat.csv"), "--sigma-bar",
                        "0.1", "--kept-only"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "0\t\t4\t5\n");
}

TEST_F(CliTest, TreeDumpFiles)
{
    auto args = path_args();
    args.insert(args.begin(), "tree-dump");
    args.insert(args.end(), {"--max-depth", "1", "--out", sub("t")});
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(slurp(dir / "t" / "tree.tsv"), "0\t\t4\t5\n1\t0\t2\t3\n1\t1\t2\t2\n");
    const auto tree = json::parse(slurp(dir / "t" / "tree.json"));
    EXPECT_EQ(tree["root"]["children"].size(), 2u);
    EXPECT_EQ(tree["root"]["children"][1]["kept"], true);
    args.pop_back();
    args.pop_back();
    args.insert(args.end(), {"--format", "json"});
    const auto r = run(args);
    EXPECT_EQ(json::parse(r.out)["root"]["n_members"], 5);
}

} // namespace
} // namespace nethop
