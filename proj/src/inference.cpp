#include "sab/inference.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "sab/distributions.hpp"
#include "sab/errors.hpp"

namespace sab {

const char* to_string(TestMethod m)
{
    switch (m) {
    case TestMethod::Welch: return "welch";
    case TestMethod::Pooled: return "pooled";
    case TestMethod::Z: return "z";
    }
    return "unknown";
}

double TestResult::cv() const
{
    return std::sqrt(var_ate) / ate;
}

ArmMoments arm_moments(std::span<const double> values)
{
    ArmMoments m;
    m.n = values.size();
    if (m.n == 0) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(m.n);
    if (m.n < 2) return m;
    double ss = 0.0;
    double comp = 0.0;
    for (double v : values) {
        const double d = v - m.mean;
        ss += d * d;
        comp += d;
    }
    // Corrected two-pass formula.
    m.var = (ss - comp * comp / static_cast<double>(m.n)) / static_cast<double>(m.n - 1);
    if (m.var < 0.0) m.var = 0.0;
    return m;
}

namespace {

void check_ci_level(double ci_level)
{
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw RangeError("ci_level must lie in (0,1)");
}

void check_arm_sizes(const ArmMoments& t, const ArmMoments& c)
{
    if (t.n < 2 || c.n < 2) {
        throw DataError("two-sample test needs at least 2 units per arm (treatment " + std::to_string(t.n) +
                        ", control " + std::to_string(c.n) + ")");
    }
}

// Fill t_stat, p_value and the interval from ate, var_ate and df.
void finish(TestResult& r)
{
    const double crit_p = 0.5 + 0.5 * r.ci_level;
    if (r.var_ate == 0.0) {
        if (r.ate != 0.0) {
            throw DegenerateError("zero variance of the effect estimate with nonzero effect " + std::to_string(r.ate));
        }
        r.t_stat = 0.0;
        r.p_value = 1.0;
        r.ci_low = r.ci_high = 0.0;
        return;
    }
    const double se = std::sqrt(r.var_ate);
    r.t_stat = r.ate / se;
    double crit = 0.0;
    if (r.df) {
        r.p_value = student_t_two_sided_p(r.t_stat, *r.df);
        crit = student_t_quantile(crit_p, *r.df);
    } else {
        r.p_value = 2.0 * normal_sf(std::fabs(r.t_stat));
        crit = normal_quantile(crit_p);
    }
    if (r.p_value > 1.0) r.p_value = 1.0;
    r.ci_low = r.ate - crit * se;
    r.ci_high = r.ate + crit * se;
}

TestResult base_result(const ArmMoments& t, const ArmMoments& c, double ci_level)
{
    TestResult r;
    r.n_treatment = t.n;
    r.n_control = c.n;
    r.mean_treatment = t.mean;
    r.mean_control = c.mean;
    r.ate = t.mean - c.mean;
    r.ci_level = ci_level;
    return r;
}

ArmMoments moments_of(const ExperimentDataset& dataset, Arm arm, MetricColumn metric)
{
    const std::vector<double> v = dataset.values(arm, metric);
    return arm_moments(v);
}

} // namespace

TestResult two_sample_test(const ArmMoments& treatment, const ArmMoments& control, TestMethod method,
                           double ci_level)
{
    check_ci_level(ci_level);
    check_arm_sizes(treatment, control);
    TestResult r = base_result(treatment, control, ci_level);
    r.method = method;
    const double nt = static_cast<double>(treatment.n);
    const double nc = static_cast<double>(control.n);

    switch (method) {
    case TestMethod::Pooled: {
        const double sp2 = ((nt - 1.0) * treatment.var + (nc - 1.0) * control.var) / (nt + nc - 2.0);
        r.var_mean_treatment = sp2 / nt;
        r.var_mean_control = sp2 / nc;
        r.var_ate = r.var_mean_treatment + r.var_mean_control;
        r.df = nt + nc - 2.0;
        break;
    }
    case TestMethod::Welch: {
        r.var_mean_treatment = treatment.var / nt;
        r.var_mean_control = control.var / nc;
        r.var_ate = r.var_mean_treatment + r.var_mean_control;
        const double denom = r.var_mean_treatment * r.var_mean_treatment / (nt - 1.0) +
                             r.var_mean_control * r.var_mean_control / (nc - 1.0);
        r.df = denom > 0.0 ? r.var_ate * r.var_ate / denom : nt + nc - 2.0;
        break;
    }
    case TestMethod::Z:
        r.var_mean_treatment = treatment.var / nt;
        r.var_mean_control = control.var / nc;
        r.var_ate = r.var_mean_treatment + r.var_mean_control;
        r.df.reset();
        break;
    }
    finish(r);
    return r;
}

TestResult two_sample_test(const ExperimentDataset& dataset, MetricColumn metric, TestMethod method,
                           double ci_level)
{
    return two_sample_test(moments_of(dataset, Arm::Treatment, metric), moments_of(dataset, Arm::Control, metric),
                           method, ci_level);
}

TestResult adjusted_test(const ArmMoments& treatment, const ArmMoments& control, double sigma2, double ci_level)
{
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw RangeError("sigma2 must be finite and non-negative");
    check_ci_level(ci_level);
    check_arm_sizes(treatment, control);
    TestResult r = base_result(treatment, control, ci_level);
    r.method = TestMethod::Z;
    const double nt = static_cast<double>(treatment.n);
    const double nc = static_cast<double>(control.n);
    const double unadjusted_t = treatment.var / nt;
    const double unadjusted_c = control.var / nc;
    const double extra = sigma2 * (1.0 / nt + 1.0 / nc);
    r.var_ate = (unadjusted_t + unadjusted_c) + extra;
    // The extra term is shared equally by the two arm means.
    r.var_mean_treatment = unadjusted_t + 0.5 * extra;
    r.var_mean_control = unadjusted_c + 0.5 * extra;
    r.df.reset();
    r.adjusted = true;
    r.sigma2_used = sigma2;
    finish(r);
    return r;
}

TestResult adjusted_test(const ExperimentDataset& dataset, double sigma2, double ci_level)
{
    return adjusted_test(moments_of(dataset, Arm::Treatment, MetricColumn::Surrogate),
                         moments_of(dataset, Arm::Control, MetricColumn::Surrogate), sigma2, ci_level);
}

TestResult adjusted_test(const ExperimentDataset& dataset, const SurrogateErrorModel& error_model, double ci_level)
{
    return adjusted_test(dataset, error_model.sigma2, ci_level);
}

PValueGap pvalue_gap(double p_s, double r2_pred)
{
    if (!(p_s > 0.0 && p_s < 1.0)) throw RangeError("pvalue_gap: p_s must lie in (0,1)");
    if (!(r2_pred > 0.0 && r2_pred <= 1.0)) throw RangeError("pvalue_gap: r2_pred must lie in (0,1]");
    if (r2_pred == 1.0) return {p_s, 0.0};
    // |z_S| = Phi^-1(1 - p_s/2) = -Phi^-1(p_s/2); p_s/2 is exact.
    const double abs_z_s = -normal_quantile(0.5 * p_s);
    double p_y = 2.0 * normal_cdf(-std::sqrt(r2_pred) * abs_z_s);
    if (p_y < p_s) p_y = p_s;
    return {p_y, p_y - p_s};
}

CupedOutcome cuped_transform(const ExperimentDataset& dataset)
{
    if (!dataset.has_covariate()) throw DataError("CUPED needs a covariate column");
    const auto& recs = dataset.records();
    const double n = static_cast<double>(recs.size());
    if (recs.size() < 2) throw DataError("CUPED needs at least 2 units");

    double sum_s = 0.0;
    double sum_x = 0.0;
    for (const auto& r : recs) {
        sum_s += r.surrogate;
        sum_x += *r.covariate;
    }
    const double mean_s = sum_s / n;
    const double mean_x = sum_x / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& r : recs) {
        const double dx = *r.covariate - mean_x;
        const double dy = r.surrogate - mean_s;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw DegenerateError("CUPED covariate has zero variance");

    CupedOutcome out;
    out.theta = sxy / sxx;
    out.covariate_mean = mean_x;
    std::vector<double> adjusted(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        adjusted[i] = recs[i].surrogate - out.theta * (*recs[i].covariate - mean_x);
    }
    if (syy > 0.0) {
        double adj_mean = 0.0;
        for (double v : adjusted) adj_mean += v;
        adj_mean /= n;
        double ss_adj = 0.0;
        for (double v : adjusted) ss_adj += (v - adj_mean) * (v - adj_mean);
        double frac = 1.0 - ss_adj / syy;
        out.variance_reduction_fraction = frac < 0.0 ? 0.0 : (frac > 1.0 ? 1.0 : frac);
    }
    out.transformed = dataset.with_surrogate(adjusted);
    return out;
}

TestResult relative_lift(TestResult result)
{
    const double mc = result.mean_control;
    if (mc == 0.0) throw DegenerateError("relative lift is undefined for a zero control mean");
    const double mt = result.mean_treatment;
    result.relative_lift = result.ate / mc;
    // Delta method for mt/mc - 1 with independent arm means.
    const double var_rel = result.var_mean_treatment / (mc * mc) +
                           (mt * mt) * result.var_mean_control / (mc * mc * mc * mc);
    const double crit = normal_quantile(0.5 + 0.5 * result.ci_level);
    const double half = crit * std::sqrt(var_rel);
    result.relative_ci_low = result.relative_lift - half;
    result.relative_ci_high = result.relative_lift + half;
    return result;
}

} // namespace sab
