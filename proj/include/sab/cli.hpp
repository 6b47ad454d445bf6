#pragma once

// Command-line front end: analyze, validate, backtest, simulate, curve.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sab/dataset.hpp"
#include "sab/inference.hpp"
#include "sab/simulator.hpp"
#include "sab/surrogacy.hpp"

namespace sab::cli {

/// Process exit codes. Stable; scripts depend on them.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kSrmFlagged = 3,
    kDegenerate = 4,
    kValidationFlagged = 5,
};

enum class OutputFormat { Table, Json };

struct CommonOptions {
    std::string input;
    double alpha = 0.05;
    double ci_level = 0.95;
    OutputFormat format = OutputFormat::Table;
    std::string output;
    Schema schema;
};

struct AnalyzeOptions {
    CommonOptions common;
    std::optional<double> sigma2;
    std::string error_model;
    bool cuped = false;
    TestMethod method = TestMethod::Welch;
    double expected_split = 0.5;
    double srm_threshold = kDefaultSrmThreshold;
    std::string metric_name;
};

struct ValidateOptions {
    CommonOptions common;
    std::size_t buckets = kDefaultBuckets;
    BucketScheme scheme = BucketScheme::Quantile;
    std::size_t min_bucket_n = kDefaultMinBucketN;
    double lambda_tol = kDefaultLambdaTolerance;
    std::string calibration_table;
    std::string lambda_table;
};

struct BacktestOptions {
    CommonOptions common;
    int maturity_days = 182;
    std::string analysis_date;
    std::string write_error_model;
};

struct SimulateOptions {
    CommonOptions common;
    SimulationConfig config;
    std::string replicate_table;
};

struct CurveOptions {
    CommonOptions common;
    std::vector<double> r2_values{0.5, 0.7, 0.85, 0.95, 1.0};
    std::size_t grid_points = 99;
    std::vector<double> p_grid;
};

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_backtest(const BacktestOptions& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_curve(const CurveOptions& opt, std::ostream& out, std::ostream& err);

/// Parse argv and run one subcommand. Never throws; errors map to ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace sab::cli
