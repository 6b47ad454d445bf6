#pragma once

// Monte Carlo study of false positives when a surrogate metric stands in for
// a nonlinear true-north metric, plus harnesses for the effect-variance
// decomposition and coverage of the prediction-error adjusted test.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sab/dataset.hpp"
#include "sab/rng.hpp"

namespace sab {

/// Y = (2/3) exp(x1) - x3 sin(x2) + x2.
double true_north(double x1, double x2, double x3);

enum class SimulationHarness {
    /// Truth from true_north; surrogate is the fitted linear model.
    Nonlinear,
    /// Surrogate is the fitted model; truth = surrogate + N(0, noise_sigma2).
    InjectedNoise,
    /// Surrogate and truth both equal true_north; no prediction error.
    SurrogateIsTruth,
};

const char* to_string(SimulationHarness h);

struct SimulationConfig {
    std::size_t n_per_arm = 1000;
    std::size_t n_replicates = 10000;
    double alpha = 0.05;
    double ci_level = 0.95;
    std::uint64_t seed = 20210705;
    /// Lower bounds of the treatment uniforms for x1, x2, x3 (each of width 1).
    std::array<double, 3> treatment_shift{0.0, 0.14349, 0.15};
    std::size_t training_n = 100000;
    std::string rng_algorithm = kRngAlgorithm;
    SimulationHarness harness = SimulationHarness::Nonlinear;
    double noise_sigma2 = 1.0;
    bool retain_replicates = false;
    /// Execution only: 0 means hardware concurrency. Never affects results.
    unsigned workers = 0;
};

/// Throws RangeError for an invalid configuration.
void validate(const SimulationConfig& config);

struct SurrogateModel {
    /// Intercept, then slopes on x1, x2, x3.
    std::array<double, 4> coefficients{};
    double r2_pred = 0.0;
    double training_sigma2 = 0.0;

    double predict(double x1, double x2, double x3) const
    {
        return coefficients[0] + coefficients[1] * x1 + coefficients[2] * x2 + coefficients[3] * x3;
    }
};

using ResponseFunction = std::function<double(double, double, double)>;

/// Ordinary least squares of the response on (1, x1, x2, x3) over training_n
/// control-distribution draws. The response defaults to true_north.
SurrogateModel fit_surrogate_model(const SimulationConfig& config, const ResponseFunction& response = {});

/// One simulated experiment: n_per_arm control rows, then n_per_arm treatment rows.
ExperimentDataset gen_replicate(const SimulationConfig& config, const SurrogateModel& model,
                                std::size_t replicate_index);

/// Prediction-error variance fed to the adjusted test under the configured harness.
double harness_sigma2(const SimulationConfig& config, const SurrogateModel& model);

struct ReplicateRecord {
    std::size_t index = 0;
    double mu_surrogate = 0.0;
    double mu_truth = 0.0;
    double p_unadjusted = 1.0;
    double p_adjusted = 1.0;
    bool significant_unadjusted = false;
    bool significant_adjusted = false;
    /// The unadjusted surrogate interval contains the zero true-north effect.
    bool covered_unadjusted = false;
    /// The true-north estimate lies within the adjusted half-width of zero.
    bool covered_adjusted = false;
};

struct SimulationResult {
    std::size_t n_replicates = 0;
    std::size_t n_significant_unadjusted = 0;
    std::size_t n_significant_adjusted = 0;
    double fpr_unadjusted = 0.0;
    double fpr_adjusted = 0.0;
    /// Binomial standard error of an FPR equal to alpha.
    double fpr_standard_error = 0.0;
    /// One-sided binomial P(X >= count) under an FPR of alpha.
    double inflation_p_unadjusted = 1.0;
    double inflation_p_adjusted = 1.0;
    double mean_ate_truth = 0.0;
    double mean_ate_surrogate = 0.0;
    double empirical_var_mu_y = 0.0;
    double empirical_var_mu_s = 0.0;
    double sigma2_used = 0.0;
    double coverage_unadjusted = 0.0;
    double coverage_adjusted = 0.0;
    SurrogateModel model;
    std::vector<ReplicateRecord> replicates;
};

/// Runs one replicate end to end.
ReplicateRecord run_replicate(const SimulationConfig& config, const SurrogateModel& model, double sigma2,
                              std::size_t replicate_index);

/// Reduce replicate records; the result does not depend on record order.
SimulationResult aggregate(const SimulationConfig& config, const SurrogateModel& model, double sigma2,
                           std::vector<ReplicateRecord> records);

/// Fit the surrogate once, run every replicate (in parallel), aggregate.
SimulationResult run_fpr_study(const SimulationConfig& config);

struct VarianceDecomposition {
    std::size_t n_per_arm = 0;
    std::size_t n_replicates = 0;
    double sigma2 = 0.0;
    double empirical_var_mu_y = 0.0;
    double empirical_var_mu_s = 0.0;
    /// empirical_var_mu_s + 2 sigma2 / n
    double predicted_var_mu_y = 0.0;
    double relative_gap = 0.0;
    double mean_mu_y = 0.0;
    double mean_mu_s = 0.0;
    double mean_gap_standard_error = 0.0;
    /// (mean_mu_y - mean_mu_s) / mean_gap_standard_error; 0 when the error is 0.
    double mean_gap_z = 0.0;
};

/// Injected-noise harness with both arms from the control distribution;
/// compares Var(mu_Y) with Var(mu_S) + 2 sigma2 / n.
VarianceDecomposition variance_decomposition_check(const SimulationConfig& config);

struct GapRow {
    double p_s = 0.0;
    double r2_pred = 0.0;
    double p_y = 0.0;
    double delta_p = 0.0;
};

/// n_points evenly spaced surrogate p-values i / (n_points + 1).
std::vector<double> uniform_pvalue_grid(std::size_t n_points);

/// pvalue_gap over the grid, rows sorted by (r2_pred, p_s).
std::vector<GapRow> pvalue_gap_curve(const std::vector<double>& r2_values, const std::vector<double>& p_s_grid);

} // namespace sab
