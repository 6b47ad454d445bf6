#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sab/cli.hpp"
#include "sab/serialize.hpp"
#include "sab/text.hpp"
#include "test_util.hpp"

namespace sab::cli {
namespace {

using sab::testing::TempDir;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "sab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Experiment file with a positive effect and truth = surrogate + noise.
std::string experiment_csv(std::size_t n_t, std::size_t n_c, bool with_truth, std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::ostringstream s;
    s << "unit_id,arm,surrogate" << (with_truth ? ",truth" : "") << ",covariate\n";
    auto row = [&](const std::string& id, int arm, double effect) {
        const double x = nd(rng);
        const double v = 10.0 + 0.8 * x + 0.6 * nd(rng) + effect;
        s << id << ',' << arm << ',' << v;
        if (with_truth) s << ',' << v + 0.1 * nd(rng);
        s << ',' << x << '\n';
    };
    for (std::size_t i = 0; i < n_t; ++i) row("t" + std::to_string(i), 1, 0.05);
    for (std::size_t i = 0; i < n_c; ++i) row("c" + std::to_string(i), 0, 0.0);
    return s.str();
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run_cli({}).code, kUsage);
    EXPECT_EQ(run_cli({"bogus"}).code, kUsage);
    EXPECT_EQ(run_cli({"analyze"}).code, kUsage);
    EXPECT_EQ(run_cli({"analyze", "-i", "x.csv", "--alpha", "1.5"}).code, kUsage);
    EXPECT_EQ(run_cli({"analyze", "-i", "x.csv", "--ci-level", "1"}).code, kUsage);
    EXPECT_EQ(run_cli({"analyze", "-i", "x.csv", "--method", "sign"}).code, kUsage);
    EXPECT_EQ(run_cli({"--help"}).code, kOk);
}

TEST(Cli, AnalyzeReportsAndMissingFile)
{
    TempDir dir;
    const auto p = dir.write("e.csv", experiment_csv(1000, 1000, false));
    const auto o = run_cli({"analyze", "-i", p.string(), "--metric-name", "Hires"});
    EXPECT_EQ(o.code, kOk) << o.err;
    EXPECT_NE(o.out.find("Metric Name"), std::string::npos);
    EXPECT_NE(o.out.find("Hires"), std::string::npos);
    EXPECT_EQ(run_cli({"analyze", "-i", (dir.path() / "none.csv").string()}).code, kDataError);
    EXPECT_EQ(run_cli({"analyze", "-i", dir.write("bad.csv", "unit_id,arm,surrogate\na,7,1\n").string()}).code,
              kDataError);
}

TEST(Cli, AnalyzeFlagsSampleRatioMismatch)
{
    TempDir dir;
    const auto p = dir.write("srm.csv", experiment_csv(6000, 4000, false));
    const auto o = run_cli({"analyze", "-i", p.string()});
    EXPECT_EQ(o.code, kSrmFlagged);
    EXPECT_NE(o.err.find("sample ratio mismatch"), std::string::npos);
    EXPECT_NE(o.out.find("Metric Name"), std::string::npos);  // report still produced
}

TEST(Cli, ZeroSigmaMatchesZ)
{
    TempDir dir;
    const auto p = dir.write("e.csv", experiment_csv(500, 500, false)).string();
    const auto adj = run_cli({"analyze", "-i", p, "--sigma2", "0", "--format", "json"});
    const auto z = run_cli({"analyze", "-i", p, "--method", "z", "--format", "json"});
    ASSERT_EQ(adj.code, kOk);
    ASSERT_EQ(z.code, kOk);
    const auto ja = Json::parse(adj.out)["test"];
    const auto jz = Json::parse(z.out)["test"];
    for (const char* k : {"ate", "var_ate", "p_value", "ci_low", "ci_high", "relative_lift"}) {
        EXPECT_EQ(ja[k].get<double>(), jz[k].get<double>()) << k;
    }
    // The human-readable report table is identical too.
    // The report rows carry the same numbers; only the metric label notes the adjustment.
    auto cells = [](const std::string& text) {
        std::istringstream in(text.substr(text.rfind('\n', text.size() - 2) + 1));
        std::vector<std::string> words{std::istream_iterator<std::string>(in), {}};
        return std::vector<std::string>(words.end() - 4, words.end());
    };
    const auto ta = run_cli({"analyze", "-i", p, "--sigma2", "0"}).out;
    const auto tz = run_cli({"analyze", "-i", p, "--method", "z"}).out;
    EXPECT_NE(ta.find("(adjusted)"), std::string::npos);
    EXPECT_EQ(cells(ta), cells(tz));
}

TEST(Cli, CupedAndNegativeSigma)
{
    TempDir dir;
    const auto p = dir.write("e.csv", experiment_csv(500, 500, false)).string();
    const auto o = run_cli({"analyze", "-i", p, "--cuped", "--format", "json"});
    ASSERT_EQ(o.code, kOk) << o.err;
    EXPECT_GT(Json::parse(o.out)["cuped"]["variance_reduction_fraction"].get<double>(), 0.5);
    EXPECT_EQ(run_cli({"analyze", "-i", p, "--sigma2", "-1"}).code, kUsage);
    const auto no_cov = dir.write("n.csv", "unit_id,arm,surrogate\na,1,1\nb,1,2\nc,0,1\nd,0,3\n").string();
    EXPECT_EQ(run_cli({"analyze", "-i", no_cov, "--cuped"}).code, kDataError);
    const auto flat = dir.write("f.csv", "unit_id,arm,surrogate\na,1,1\nb,1,1\nc,0,2\nd,0,2\n").string();
    EXPECT_EQ(run_cli({"analyze", "-i", flat}).code, kDegenerate);
}

TEST(Cli, ValidateNeedsTruth)
{
    TempDir dir;
    const auto no_truth = dir.write("n.csv", experiment_csv(200, 200, false)).string();
    const auto o = run_cli({"validate", "-i", no_truth});
    EXPECT_EQ(o.code, kDataError);
    EXPECT_NE(o.err.find("truth"), std::string::npos);

    const auto ok = dir.write("t.csv", experiment_csv(2000, 2000, true)).string();
    const auto v = run_cli({"validate", "-i", ok, "--calibration-table", (dir.path() / "cal.csv").string(),
                            "--lambda-table", (dir.path() / "lam.csv").string()});
    EXPECT_EQ(v.code, kOk) << v.err << v.out;
    EXPECT_NE(v.out.find("PASS"), std::string::npos);
    EXPECT_FALSE(slurp(dir.path() / "cal.csv").empty());
    EXPECT_FALSE(slurp(dir.path() / "lam.csv").empty());
}

TEST(Cli, BacktestWritesErrorModelUsedByAnalyze)
{
    TempDir dir;
    dir.write("jan.csv", "surrogate,truth\n1,1.5\n2,2\n3,2.5\n");
    dir.write("feb.csv", "surrogate,truth\n1,1\n2,3\n");
    const auto manifest = dir.write("manifest.csv", "as_of,path\n2020-01-01,jan.csv\n2020-02-01,feb.csv\n");
    const auto model = (dir.path() / "model.json").string();
    const auto b = run_cli({"backtest", "--manifest", manifest.string(), "--analysis-date", "2020-12-31",
                            "--write-error-model", model});
    ASSERT_EQ(b.code, kOk) << b.err;
    const auto m = read_error_model(model);
    EXPECT_DOUBLE_EQ(m.sigma2, (0.25 + 0 + 0.25 + 0 + 1) / 5.0);
    EXPECT_EQ(m.n_validation, 5u);
    EXPECT_EQ(m.provenance, ErrorModelProvenance::Backtest);

    const auto exp = dir.write("e.csv", experiment_csv(500, 500, false)).string();
    const auto via_model = run_cli({"analyze", "-i", exp, "--error-model", model, "--format", "json"});
    const auto via_sigma = run_cli({"analyze", "-i", exp, "--sigma2", format_roundtrip(m.sigma2), "--format", "json"});
    ASSERT_EQ(via_model.code, kOk) << via_model.err;
    EXPECT_EQ(via_model.out, via_sigma.out);

    EXPECT_EQ(run_cli({"backtest", "--manifest", manifest.string(), "--analysis-date", "2020-03-01"}).code,
              kDataError);
    EXPECT_EQ(run_cli({"backtest", "--manifest", manifest.string(), "--analysis-date", "March"}).code, kDataError);
    EXPECT_EQ(run_cli({"analyze", "-i", exp, "--error-model", model, "--sigma2", "1"}).code, kUsage);
}

TEST(Cli, CurveTable)
{
    const auto o = run_cli({"curve", "--r2", "0.85", "--p-grid", "0.05"});
    ASSERT_EQ(o.code, kOk) << o.err;
    EXPECT_EQ(o.out, "p_s,r2_pred,p_y,delta_p\n0.05,0.85,0.0707627,0.0207627\n");
    EXPECT_EQ(run_cli({"curve", "--r2", "0"}).code, kUsage);
    const auto j = run_cli({"curve", "--grid", "9", "--format", "json"});
    ASSERT_EQ(j.code, kOk);
    EXPECT_EQ(Json::parse(j.out).size(), 45u);
}

TEST(Cli, SimulateJsonIsDeterministic)
{
    const std::vector<std::string> base{"simulate", "--replicates", "300", "--n-per-arm", "50", "--training-n",
                                        "2000", "--format", "json", "--seed", "7"};
    auto with_workers = [&](const char* w) {
        auto args = base;
        args.insert(args.end(), {"--workers", w});
        return run_cli(args);
    };
    const auto a = with_workers("1");
    const auto b = with_workers("1");
    const auto c = with_workers("3");
    ASSERT_EQ(a.code, kOk) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out, c.out);
    const auto j = Json::parse(a.out);
    EXPECT_EQ(j["config"]["seed"].get<std::uint64_t>(), 7u);
    EXPECT_EQ(j["result"]["n_replicates"].get<std::size_t>(), 300u);
    EXPECT_TRUE(j.contains("variance_decomposition"));
    EXPECT_EQ(run_cli({"simulate", "--n-per-arm", "1"}).code, kUsage);
}

TEST(Cli, OutputFileAndReplicateTable)
{
    TempDir dir;
    const auto out = (dir.path() / "sim.txt").string();
    const auto table = (dir.path() / "reps.csv").string();
    const auto o = run_cli({"simulate", "--replicates", "20", "--n-per-arm", "20", "--training-n", "500", "-o", out,
                            "--replicate-table", table});
    ASSERT_EQ(o.code, kOk) << o.err;
    EXPECT_TRUE(o.out.empty());
    EXPECT_NE(slurp(out).find("fpr unadjusted"), std::string::npos);
    const auto rows = slurp(table);
    EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 21);
}

#ifdef SAB_CLI_PATH
int exit_code_of(const std::string& command)
{
    const int status = std::system((command + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinary, ExitCodes)
{
    TempDir dir;
    const std::string bin = SAB_CLI_PATH;
    const auto ok = dir.write("ok.csv", experiment_csv(300, 300, false)).string();
    const auto srm = dir.write("srm.csv", experiment_csv(6000, 4000, false)).string();
    EXPECT_EQ(exit_code_of(bin + " analyze -i " + ok), kOk);
    EXPECT_EQ(exit_code_of(bin + " analyze -i " + srm), kSrmFlagged);
    EXPECT_EQ(exit_code_of(bin + " validate -i " + ok), kDataError);
    EXPECT_EQ(exit_code_of(bin + " frobnicate"), kUsage);
    EXPECT_EQ(exit_code_of(bin + " curve --r2 0.5 --p-grid 0.1"), kOk);
}
#endif

} // namespace
} // namespace sab::cli
