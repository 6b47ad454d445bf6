#pragma once

// Point estimates and two-arm tests on a single metric column, the
// prediction-error adjustment for surrogate metrics, CUPED, and relative lift.

#include <cstddef>
#include <optional>
#include <span>

#include "sab/dataset.hpp"
#include "sab/error_model.hpp"

namespace sab {

enum class TestMethod { Welch, Pooled, Z };

const char* to_string(TestMethod m);

struct TestResult {
    TestMethod method = TestMethod::Welch;
    std::size_t n_treatment = 0;
    std::size_t n_control = 0;
    double mean_treatment = 0.0;
    double mean_control = 0.0;
    double ate = 0.0;
    /// Variance of each arm mean, including any share of the prediction-error term.
    double var_mean_treatment = 0.0;
    double var_mean_control = 0.0;
    double var_ate = 0.0;
    /// Reference degrees of freedom; nullopt means the standard normal.
    std::optional<double> df;
    double t_stat = 0.0;
    double p_value = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double ci_level = 0.95;
    double relative_lift = 0.0;
    double relative_ci_low = 0.0;
    double relative_ci_high = 0.0;
    bool adjusted = false;
    double sigma2_used = 0.0;

    /// Coefficient of variation of the effect estimate, sqrt(var_ate)/ate.
    double cv() const;
};

/// Per-arm sufficient statistics (sample variance uses n - 1).
struct ArmMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;
};

ArmMoments arm_moments(std::span<const double> values);

/// Two-sample test from arm summaries. Throws DataError when an arm has
/// fewer than two units and DegenerateError when var_ate is zero but the
/// effect is not.
TestResult two_sample_test(const ArmMoments& treatment, const ArmMoments& control, TestMethod method,
                           double ci_level = 0.95);

TestResult two_sample_test(const ExperimentDataset& dataset, MetricColumn metric = MetricColumn::Surrogate,
                           TestMethod method = TestMethod::Welch, double ci_level = 0.95);

/// Surrogate test with sigma2 * (1/n_T + 1/n_C) added to the effect variance.
/// Always uses the standard normal reference. sigma2 == 0 reproduces the z test.
TestResult adjusted_test(const ArmMoments& treatment, const ArmMoments& control, double sigma2,
                         double ci_level = 0.95);

TestResult adjusted_test(const ExperimentDataset& dataset, double sigma2, double ci_level = 0.95);

TestResult adjusted_test(const ExperimentDataset& dataset, const SurrogateErrorModel& error_model,
                         double ci_level = 0.95);

struct PValueGap {
    double p_y = 0.0;
    double delta_p = 0.0;
};

/// True-metric p-value implied by a surrogate p-value when the surrogate
/// explains a fraction r2_pred of the effect variance:
/// p_y = 2 * Phi(-sqrt(r2_pred) * Phi^-1(1 - p_s/2)).
PValueGap pvalue_gap(double p_s, double r2_pred);

struct CupedOutcome {
    double theta = 0.0;
    double covariate_mean = 0.0;
    double variance_reduction_fraction = 0.0;
    ExperimentDataset transformed;
};

/// Replace each surrogate S_i with S_i - theta * (X_i - mean(X)), theta
/// estimated on the pooled sample. Requires a covariate column with
/// nonzero variance.
CupedOutcome cuped_transform(const ExperimentDataset& dataset);

/// Fill relative_lift and its delta-method interval. Throws DegenerateError
/// when the control mean is zero.
TestResult relative_lift(TestResult result);

} // namespace sab
