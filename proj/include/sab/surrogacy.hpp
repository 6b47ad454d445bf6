#pragma once

// Surrogate quality checks: prediction-error estimation, back-tests over
// matured snapshots, calibration curves, the bucketed lambda ratio check of
// conditional independence between arm and truth given the surrogate, and
// agreement of surrogate and truth t-statistics across experiments.

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sab/dataset.hpp"
#include "sab/error_model.hpp"
#include "sab/inference.hpp"

namespace sab {

/// sigma2 = mean squared (surrogate - truth). r2_pred = 1 - sigma2 / Var(truth),
/// clamped to [0,1], present only when Var(truth) > 0.
SurrogateErrorModel estimate_sigma2(std::span<const SurrogateTruthPair> pairs);

struct Snapshot {
    std::string name;
    std::chrono::year_month_day as_of;
    std::vector<SurrogateTruthPair> pairs;
};

struct BacktestResult {
    std::vector<SurrogateErrorModel> per_snapshot;
    /// Residual-count weighted pool, the same as estimate_sigma2 over the union.
    SurrogateErrorModel pooled;
};

/// Every snapshot must satisfy as_of + maturity_lag <= analysis_date; an
/// immature or empty snapshot throws DataError naming it.
BacktestResult backtest(std::span<const Snapshot> snapshots, std::chrono::days maturity_lag,
                        std::chrono::year_month_day analysis_date);

enum class BucketScheme { EqualWidth, Quantile };

const char* to_string(BucketScheme s);

/// Bucket edges over the given values. Equal-width edges span [min, max];
/// quantile edges are empirical quantiles with duplicates collapsed. The
/// last bucket is closed on the right.
std::vector<double> bucket_edges(std::span<const double> values, std::size_t n_buckets, BucketScheme scheme);

/// Index of the bucket holding v, or npos when v is outside the edges.
std::size_t bucket_of(std::span<const double> edges, double v);

struct CalibrationBucket {
    double low = 0.0;
    double high = 0.0;
    double mean_surrogate = 0.0;
    double mean_truth = 0.0;
    std::size_t count = 0;
};

struct CalibrationCurve {
    std::vector<CalibrationBucket> buckets;
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t n_buckets_skipped = 0;
};

/// Mean truth per surrogate bucket and the count-weighted least-squares line
/// through the bucket means. Empty buckets are omitted.
CalibrationCurve calibration_curve(std::span<const SurrogateTruthPair> pairs, std::size_t n_buckets,
                                   BucketScheme scheme);

/// Same, with explicit bucket edges.
CalibrationCurve calibration_curve(std::span<const SurrogateTruthPair> pairs, std::span<const double> edges);

struct LambdaBucket {
    double low = 0.0;
    double high = 0.0;
    std::size_t n_t = 0;
    std::size_t n_c = 0;
    double mean_truth_t = 0.0;
    double mean_truth_c = 0.0;
    double mean_truth_pooled = 0.0;
    double lambda_t = 1.0;
    double lambda_c = 1.0;
};

struct ValidityReport {
    std::vector<LambdaBucket> buckets;
    double max_abs_log_lambda = 0.0;
    std::size_t n_buckets_skipped = 0;

    bool passes(double tolerance) const { return max_abs_log_lambda <= tolerance; }
};

constexpr std::size_t kDefaultBuckets = 10;
constexpr std::size_t kDefaultMinBucketN = 50;
constexpr double kDefaultLambdaTolerance = 0.2;

/// lambda_w = E(truth | bucket, arm w) / E(truth | bucket) per surrogate
/// bucket formed on the pooled sample. Buckets with fewer than min_bucket_n
/// units in either arm, or a zero pooled truth mean, are skipped and counted.
ValidityReport validity_lambda(const ExperimentDataset& dataset, std::size_t n_buckets = kDefaultBuckets,
                               BucketScheme scheme = BucketScheme::Quantile,
                               std::size_t min_bucket_n = kDefaultMinBucketN);

struct TStatPair {
    std::string experiment_id;
    double t_surrogate = 0.0;
    double t_truth = 0.0;
};

struct AgreementSummary {
    std::vector<TStatPair> pairs;
    double r_squared = 0.0;
    double sign_agreement_fraction = 0.0;
};

AgreementSummary tstat_agreement(std::vector<TStatPair> pairs);

struct ExperimentComparison {
    std::string experiment_id;
    TestResult surrogate;
    TestResult truth;
};

AgreementSummary tstat_agreement(std::span<const ExperimentComparison> experiments);

} // namespace sab
