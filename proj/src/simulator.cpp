#include "sab/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

#include "sab/distributions.hpp"
#include "sab/errors.hpp"
#include "sab/inference.hpp"

namespace sab {

namespace {

// Stream index reserved for the training sample; replicate streams use their index.
constexpr std::uint64_t kTrainingStream = std::uint64_t{1} << 63;

} // namespace

double true_north(double x1, double x2, double x3)
{
    return (2.0 / 3.0) * std::exp(x1) - x3 * std::sin(x2) + x2;
}

const char* to_string(SimulationHarness h)
{
    switch (h) {
    case SimulationHarness::Nonlinear: return "nonlinear";
    case SimulationHarness::InjectedNoise: return "injected_noise";
    case SimulationHarness::SurrogateIsTruth: return "surrogate_is_truth";
    }
    return "unknown";
}

void validate(const SimulationConfig& config)
{
    if (config.n_per_arm < 2) throw RangeError("n_per_arm must be at least 2");
    if (config.n_replicates < 1) throw RangeError("n_replicates must be at least 1");
    if (!(config.alpha >= 0.0 && config.alpha < 1.0)) throw RangeError("alpha must lie in [0,1)");
    if (!(config.ci_level > 0.0 && config.ci_level < 1.0)) throw RangeError("ci_level must lie in (0,1)");
    if (config.training_n < 10) throw RangeError("training_n must be at least 10");
    for (double s : config.treatment_shift) {
        if (!std::isfinite(s)) throw RangeError("treatment shifts must be finite");
    }
    if (!(config.noise_sigma2 >= 0.0) || !std::isfinite(config.noise_sigma2)) {
        throw RangeError("noise_sigma2 must be finite and non-negative");
    }
    if (config.rng_algorithm != kRngAlgorithm) {
        throw RangeError("unsupported rng_algorithm '" + config.rng_algorithm + "' (supported: " + kRngAlgorithm + ")");
    }
}

SurrogateModel fit_surrogate_model(const SimulationConfig& config, const ResponseFunction& response)
{
    validate(config);
    const auto n = static_cast<Eigen::Index>(config.training_n);
    Eigen::MatrixXd design(n, 4);
    Eigen::VectorXd y(n);
    RandomStream rng(config.seed, kTrainingStream);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = rng.uniform();
        const double x2 = rng.uniform();
        const double x3 = rng.uniform();
        design(i, 0) = 1.0;
        design(i, 1) = x1;
        design(i, 2) = x2;
        design(i, 3) = x3;
        y(i) = response ? response(x1, x2, x3) : true_north(x1, x2, x3);
    }

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    const auto r_diag = qr.matrixR().diagonal().cwiseAbs();
    if (qr.rank() < 4 || r_diag.minCoeff() < 1e-10 * r_diag.maxCoeff()) {
        throw DegenerateError("surrogate model design matrix is rank deficient or ill-conditioned");
    }
    const Eigen::VectorXd beta = qr.solve(y);

    SurrogateModel model;
    for (int k = 0; k < 4; ++k) model.coefficients[static_cast<std::size_t>(k)] = beta(k);
    const Eigen::VectorXd resid = y - design * beta;
    const double sse = resid.squaredNorm();
    const double ssy = (y.array() - y.mean()).square().sum();
    model.training_sigma2 = sse / static_cast<double>(n);
    model.r2_pred = ssy > 0.0 ? std::clamp(1.0 - sse / ssy, 0.0, 1.0) : 1.0;
    return model;
}

ExperimentDataset gen_replicate(const SimulationConfig& config, const SurrogateModel& model,
                                std::size_t replicate_index)
{
    RandomStream rng(config.seed, replicate_index);
    const double noise_sd = std::sqrt(config.noise_sigma2);
    std::vector<UnitRecord> records;
    records.reserve(2 * config.n_per_arm);

    auto draw_unit = [&](Arm arm, std::size_t i) {
        const bool treated = arm == Arm::Treatment;
        const double x1 = rng.uniform(treated ? config.treatment_shift[0] : 0.0, 1.0);
        const double x2 = rng.uniform(treated ? config.treatment_shift[1] : 0.0, 1.0);
        const double x3 = rng.uniform(treated ? config.treatment_shift[2] : 0.0, 1.0);
        UnitRecord rec;
        rec.unit_id = (treated ? "t" : "c") + std::to_string(i);
        rec.arm = arm;
        switch (config.harness) {
        case SimulationHarness::Nonlinear:
            rec.surrogate = model.predict(x1, x2, x3);
            rec.truth = true_north(x1, x2, x3);
            break;
        case SimulationHarness::InjectedNoise:
            rec.surrogate = model.predict(x1, x2, x3);
            rec.truth = rec.surrogate + noise_sd * rng.normal();
            break;
        case SimulationHarness::SurrogateIsTruth:
            rec.surrogate = true_north(x1, x2, x3);
            rec.truth = rec.surrogate;
            break;
        }
        records.push_back(std::move(rec));
    };

    for (std::size_t i = 0; i < config.n_per_arm; ++i) draw_unit(Arm::Control, i);
    for (std::size_t i = 0; i < config.n_per_arm; ++i) draw_unit(Arm::Treatment, i);
    return ExperimentDataset("replicate-" + std::to_string(replicate_index), std::move(records),
                             config.alpha > 0.0 ? config.alpha : 0.05);
}

double harness_sigma2(const SimulationConfig& config, const SurrogateModel& model)
{
    switch (config.harness) {
    case SimulationHarness::Nonlinear: return model.training_sigma2;
    case SimulationHarness::InjectedNoise: return config.noise_sigma2;
    case SimulationHarness::SurrogateIsTruth: return 0.0;
    }
    return 0.0;
}

ReplicateRecord run_replicate(const SimulationConfig& config, const SurrogateModel& model, double sigma2,
                              std::size_t replicate_index)
{
    const ExperimentDataset data = gen_replicate(config, model, replicate_index);
    const TestResult unadjusted = two_sample_test(data, MetricColumn::Surrogate, TestMethod::Z, config.ci_level);
    const TestResult adjusted = adjusted_test(data, sigma2, config.ci_level);
    const double truth_t = arm_moments(data.values(Arm::Treatment, MetricColumn::Truth)).mean;
    const double truth_c = arm_moments(data.values(Arm::Control, MetricColumn::Truth)).mean;

    ReplicateRecord rec;
    rec.index = replicate_index;
    rec.mu_surrogate = unadjusted.ate;
    rec.mu_truth = truth_t - truth_c;
    rec.p_unadjusted = unadjusted.p_value;
    rec.p_adjusted = adjusted.p_value;
    rec.significant_unadjusted = unadjusted.p_value < config.alpha;
    rec.significant_adjusted = adjusted.p_value < config.alpha;
    rec.covered_unadjusted = unadjusted.ci_low <= 0.0 && 0.0 <= unadjusted.ci_high;
    rec.covered_adjusted = std::fabs(rec.mu_truth) <= 0.5 * (adjusted.ci_high - adjusted.ci_low);
    return rec;
}

namespace {

std::vector<ReplicateRecord> run_all(const SimulationConfig& config, const SurrogateModel& model, double sigma2)
{
    const std::size_t total = config.n_replicates;
    std::vector<ReplicateRecord> records(total);
    unsigned workers = config.workers != 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            try {
                records[i] = run_replicate(config, model, sigma2, i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    return records;
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};

template <typename Get>
MeanVar mean_var(const std::vector<ReplicateRecord>& records, Get get)
{
    MeanVar mv;
    const double n = static_cast<double>(records.size());
    if (records.empty()) return mv;
    double sum = 0.0;
    for (const auto& r : records) sum += get(r);
    mv.mean = sum / n;
    if (records.size() < 2) return mv;
    double ss = 0.0;
    for (const auto& r : records) {
        const double d = get(r) - mv.mean;
        ss += d * d;
    }
    mv.var = ss / (n - 1.0);
    return mv;
}

} // namespace

SimulationResult aggregate(const SimulationConfig& config, const SurrogateModel& model, double sigma2,
                           std::vector<ReplicateRecord> records)
{
    std::sort(records.begin(), records.end(),
              [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.index < b.index; });

    SimulationResult out;
    out.n_replicates = records.size();
    out.model = model;
    out.sigma2_used = sigma2;
    std::size_t covered_u = 0;
    std::size_t covered_a = 0;
    for (const auto& r : records) {
        out.n_significant_unadjusted += r.significant_unadjusted;
        out.n_significant_adjusted += r.significant_adjusted;
        covered_u += r.covered_unadjusted;
        covered_a += r.covered_adjusted;
    }
    const double n = static_cast<double>(records.size());
    out.fpr_unadjusted = static_cast<double>(out.n_significant_unadjusted) / n;
    out.fpr_adjusted = static_cast<double>(out.n_significant_adjusted) / n;
    out.fpr_standard_error = std::sqrt(config.alpha * (1.0 - config.alpha) / n);
    out.inflation_p_unadjusted = binomial_upper_tail(out.n_significant_unadjusted, records.size(), config.alpha);
    out.inflation_p_adjusted = binomial_upper_tail(out.n_significant_adjusted, records.size(), config.alpha);
    out.coverage_unadjusted = static_cast<double>(covered_u) / n;
    out.coverage_adjusted = static_cast<double>(covered_a) / n;

    const MeanVar mu_y = mean_var(records, [](const ReplicateRecord& r) { return r.mu_truth; });
    const MeanVar mu_s = mean_var(records, [](const ReplicateRecord& r) { return r.mu_surrogate; });
    out.mean_ate_truth = mu_y.mean;
    out.mean_ate_surrogate = mu_s.mean;
    out.empirical_var_mu_y = mu_y.var;
    out.empirical_var_mu_s = mu_s.var;
    if (config.retain_replicates) out.replicates = std::move(records);
    return out;
}

SimulationResult run_fpr_study(const SimulationConfig& config)
{
    validate(config);
    const SurrogateModel model = fit_surrogate_model(config);
    const double sigma2 = harness_sigma2(config, model);
    return aggregate(config, model, sigma2, run_all(config, model, sigma2));
}

VarianceDecomposition variance_decomposition_check(const SimulationConfig& config)
{
    SimulationConfig harness = config;
    harness.harness = SimulationHarness::InjectedNoise;
    harness.treatment_shift = {0.0, 0.0, 0.0};
    validate(harness);
    const SurrogateModel model = fit_surrogate_model(harness);
    const std::vector<ReplicateRecord> records = run_all(harness, model, harness.noise_sigma2);

    VarianceDecomposition out;
    out.n_per_arm = harness.n_per_arm;
    out.n_replicates = records.size();
    out.sigma2 = harness.noise_sigma2;
    const MeanVar mu_y = mean_var(records, [](const ReplicateRecord& r) { return r.mu_truth; });
    const MeanVar mu_s = mean_var(records, [](const ReplicateRecord& r) { return r.mu_surrogate; });
    const MeanVar gap = mean_var(records, [](const ReplicateRecord& r) { return r.mu_truth - r.mu_surrogate; });
    out.empirical_var_mu_y = mu_y.var;
    out.empirical_var_mu_s = mu_s.var;
    out.predicted_var_mu_y = mu_s.var + 2.0 * out.sigma2 / static_cast<double>(out.n_per_arm);
    out.relative_gap = out.predicted_var_mu_y > 0.0
                           ? std::fabs(out.empirical_var_mu_y - out.predicted_var_mu_y) / out.predicted_var_mu_y
                           : 0.0;
    out.mean_mu_y = mu_y.mean;
    out.mean_mu_s = mu_s.mean;
    out.mean_gap_standard_error = std::sqrt(gap.var / static_cast<double>(records.size()));
    out.mean_gap_z = out.mean_gap_standard_error > 0.0 ? gap.mean / out.mean_gap_standard_error : 0.0;
    return out;
}

std::vector<double> uniform_pvalue_grid(std::size_t n_points)
{
    std::vector<double> grid;
    grid.reserve(n_points);
    const double denom = static_cast<double>(n_points + 1);
    for (std::size_t i = 1; i <= n_points; ++i) grid.push_back(static_cast<double>(i) / denom);
    return grid;
}

std::vector<GapRow> pvalue_gap_curve(const std::vector<double>& r2_values, const std::vector<double>& p_s_grid)
{
    std::vector<GapRow> rows;
    rows.reserve(r2_values.size() * p_s_grid.size());
    for (double r2 : r2_values) {
        for (double p : p_s_grid) {
            const PValueGap g = pvalue_gap(p, r2);
            rows.push_back({p, r2, g.p_y, g.delta_p});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) {
        return a.r2_pred != b.r2_pred ? a.r2_pred < b.r2_pred : a.p_s < b.p_s;
    });
    return rows;
}

} // namespace sab
