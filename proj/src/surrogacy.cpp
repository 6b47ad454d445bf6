#include "sab/surrogacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sab/errors.hpp"

namespace sab {

const char* to_string(ErrorModelProvenance p)
{
    return p == ErrorModelProvenance::Backtest ? "backtest" : "validation_set";
}

const char* to_string(BucketScheme s)
{
    return s == BucketScheme::Quantile ? "quantile" : "equal_width";
}

SurrogateErrorModel estimate_sigma2(std::span<const SurrogateTruthPair> pairs)
{
    if (pairs.empty()) throw DataError("estimate_sigma2: no (surrogate, truth) pairs");
    const double n = static_cast<double>(pairs.size());
    double sse = 0.0;
    double sum_y = 0.0;
    for (const auto& p : pairs) {
        if (!std::isfinite(p.surrogate) || !std::isfinite(p.truth)) {
            throw DataError("estimate_sigma2: non-finite value in pairs");
        }
        const double e = p.surrogate - p.truth;
        sse += e * e;
        sum_y += p.truth;
    }
    const double mean_y = sum_y / n;
    double ssy = 0.0;
    for (const auto& p : pairs) ssy += (p.truth - mean_y) * (p.truth - mean_y);

    SurrogateErrorModel m;
    m.sigma2 = sse / n;
    m.n_validation = pairs.size();
    if (ssy > 0.0) {
        const double r2 = 1.0 - sse / ssy;
        m.r2_pred = std::clamp(r2, 0.0, 1.0);
    }
    return m;
}

BacktestResult backtest(std::span<const Snapshot> snapshots, std::chrono::days maturity_lag,
                        std::chrono::year_month_day analysis_date)
{
    if (snapshots.empty()) throw DataError("backtest: no snapshots");
    const std::chrono::sys_days cutoff{analysis_date};

    BacktestResult out;
    std::vector<SurrogateTruthPair> all;
    std::chrono::sys_days latest{std::chrono::days{std::numeric_limits<int>::min() / 2}};
    for (const auto& snap : snapshots) {
        if (snap.pairs.empty()) throw DataError("backtest: snapshot '" + snap.name + "' is empty");
        const std::chrono::sys_days as_of{snap.as_of};
        if (as_of + maturity_lag > cutoff) {
            throw DataError("backtest: snapshot '" + snap.name + "' is not mature (as_of + " +
                            std::to_string(maturity_lag.count()) + " days is after the analysis date)");
        }
        SurrogateErrorModel m = estimate_sigma2(snap.pairs);
        m.provenance = ErrorModelProvenance::Backtest;
        m.as_of = snap.as_of;
        out.per_snapshot.push_back(m);
        all.insert(all.end(), snap.pairs.begin(), snap.pairs.end());
        latest = std::max(latest, as_of);
    }
    out.pooled = estimate_sigma2(all);
    out.pooled.provenance = ErrorModelProvenance::Backtest;
    out.pooled.as_of = std::chrono::year_month_day{latest};
    return out;
}

std::vector<double> bucket_edges(std::span<const double> values, std::size_t n_buckets, BucketScheme scheme)
{
    if (values.empty()) throw DataError("bucket_edges: no values");
    if (n_buckets == 0) throw RangeError("bucket_edges: need at least one bucket");
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *min_it;
    const double hi = *max_it;

    std::vector<double> edges;
    edges.reserve(n_buckets + 1);
    if (scheme == BucketScheme::EqualWidth) {
        const double width = (hi - lo) / static_cast<double>(n_buckets);
        for (std::size_t k = 0; k < n_buckets; ++k) edges.push_back(lo + width * static_cast<double>(k));
        edges.push_back(hi);
    } else {
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        const double last = static_cast<double>(sorted.size() - 1);
        for (std::size_t k = 0; k <= n_buckets; ++k) {
            // Linear interpolation between order statistics.
            const double h = last * static_cast<double>(k) / static_cast<double>(n_buckets);
            const auto i = static_cast<std::size_t>(std::floor(h));
            const double frac = h - static_cast<double>(i);
            double q = sorted[i];
            if (frac > 0.0 && i + 1 < sorted.size()) q += frac * (sorted[i + 1] - sorted[i]);
            edges.push_back(q);
        }
        edges.front() = lo;
        edges.back() = hi;
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (edges.size() == 1) edges.push_back(edges.front());
    return edges;
}

std::size_t bucket_of(std::span<const double> edges, double v)
{
    if (edges.size() < 2 || v < edges.front() || v > edges.back()) return static_cast<std::size_t>(-1);
    const auto inner_begin = edges.begin() + 1;
    const auto inner_end = edges.end() - 1;
    return static_cast<std::size_t>(std::upper_bound(inner_begin, inner_end, v) - inner_begin);
}

CalibrationCurve calibration_curve(std::span<const SurrogateTruthPair> pairs, std::span<const double> edges)
{
    if (edges.size() < 2) throw RangeError("calibration_curve: need at least two bucket edges");
    const std::size_t nb = edges.size() - 1;
    std::vector<double> sum_s(nb, 0.0);
    std::vector<double> sum_y(nb, 0.0);
    std::vector<std::size_t> count(nb, 0);
    for (const auto& p : pairs) {
        const std::size_t b = bucket_of(edges, p.surrogate);
        if (b >= nb) continue;
        sum_s[b] += p.surrogate;
        sum_y[b] += p.truth;
        ++count[b];
    }

    CalibrationCurve curve;
    for (std::size_t b = 0; b < nb; ++b) {
        if (count[b] == 0) {
            ++curve.n_buckets_skipped;
            continue;
        }
        const double n = static_cast<double>(count[b]);
        curve.buckets.push_back({edges[b], edges[b + 1], sum_s[b] / n, sum_y[b] / n, count[b]});
    }
    if (curve.buckets.size() < 2) {
        throw DataError("calibration_curve: fewer than 2 non-empty buckets (" +
                        std::to_string(curve.buckets.size()) + ")");
    }

    // Count-weighted least squares of mean_truth on mean_surrogate.
    double w_sum = 0.0;
    double wx = 0.0;
    double wy = 0.0;
    for (const auto& b : curve.buckets) {
        const double w = static_cast<double>(b.count);
        w_sum += w;
        wx += w * b.mean_surrogate;
        wy += w * b.mean_truth;
    }
    const double xbar = wx / w_sum;
    const double ybar = wy / w_sum;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& b : curve.buckets) {
        const double w = static_cast<double>(b.count);
        const double dx = b.mean_surrogate - xbar;
        sxx += w * dx * dx;
        sxy += w * dx * (b.mean_truth - ybar);
    }
    if (!(sxx > 0.0)) throw DegenerateError("calibration_curve: bucket surrogate means do not vary");
    curve.slope = sxy / sxx;
    curve.intercept = ybar - curve.slope * xbar;
    return curve;
}

CalibrationCurve calibration_curve(std::span<const SurrogateTruthPair> pairs, std::size_t n_buckets,
                                   BucketScheme scheme)
{
    if (pairs.empty()) throw DataError("calibration_curve: no pairs");
    std::vector<double> s;
    s.reserve(pairs.size());
    for (const auto& p : pairs) s.push_back(p.surrogate);
    const auto edges = bucket_edges(s, n_buckets, scheme);
    return calibration_curve(pairs, edges);
}

ValidityReport validity_lambda(const ExperimentDataset& dataset, std::size_t n_buckets, BucketScheme scheme,
                               std::size_t min_bucket_n)
{
    if (!dataset.has_truth()) throw DataError("validity check needs a truth column");
    if (dataset.count(Arm::Treatment) == 0 || dataset.count(Arm::Control) == 0) {
        throw DataError("validity check needs both arms non-empty");
    }
    const auto& recs = dataset.records();
    std::vector<double> s;
    s.reserve(recs.size());
    for (const auto& r : recs) s.push_back(r.surrogate);
    const auto edges = bucket_edges(s, n_buckets, scheme);
    const std::size_t nb = edges.size() - 1;

    std::vector<std::size_t> n_t(nb, 0);
    std::vector<std::size_t> n_c(nb, 0);
    std::vector<double> sum_t(nb, 0.0);
    std::vector<double> sum_c(nb, 0.0);
    for (const auto& r : recs) {
        const std::size_t b = bucket_of(edges, r.surrogate);
        if (r.arm == Arm::Treatment) {
            ++n_t[b];
            sum_t[b] += *r.truth;
        } else {
            ++n_c[b];
            sum_c[b] += *r.truth;
        }
    }

    ValidityReport report;
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t need = std::max<std::size_t>(min_bucket_n, 1);
        const double sum_pool = sum_t[b] + sum_c[b];
        if (n_t[b] < need || n_c[b] < need || sum_pool == 0.0) {
            ++report.n_buckets_skipped;
            continue;
        }
        const double nt = static_cast<double>(n_t[b]);
        const double nc = static_cast<double>(n_c[b]);
        const double n_pool = nt + nc;
        LambdaBucket lb;
        lb.low = edges[b];
        lb.high = edges[b + 1];
        lb.n_t = n_t[b];
        lb.n_c = n_c[b];
        lb.mean_truth_t = sum_t[b] / nt;
        lb.mean_truth_c = sum_c[b] / nc;
        lb.mean_truth_pooled = sum_pool / n_pool;
        // Ratio of means as one quotient of sums: a single rounding.
        lb.lambda_t = (sum_t[b] * n_pool) / (nt * sum_pool);
        lb.lambda_c = (sum_c[b] * n_pool) / (nc * sum_pool);
        report.max_abs_log_lambda = std::max(
            {report.max_abs_log_lambda, std::fabs(std::log(lb.lambda_t)), std::fabs(std::log(lb.lambda_c))});
        report.buckets.push_back(lb);
    }
    if (report.buckets.empty()) {
        throw DataError("validity check: all " + std::to_string(nb) + " buckets were skipped");
    }
    return report;
}

AgreementSummary tstat_agreement(std::vector<TStatPair> pairs)
{
    if (pairs.size() < 2) throw DataError("t-statistic agreement needs at least 2 experiments");
    const double n = static_cast<double>(pairs.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : pairs) {
        mx += p.t_surrogate;
        my += p.t_truth;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    std::size_t eligible = 0;
    std::size_t agree = 0;
    for (const auto& p : pairs) {
        const double dx = p.t_surrogate - mx;
        const double dy = p.t_truth - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        if (std::fabs(p.t_surrogate) > 1e-9 && std::fabs(p.t_truth) > 1e-9) {
            ++eligible;
            agree += (p.t_surrogate > 0.0) == (p.t_truth > 0.0);
        }
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("t-statistic agreement: a t-statistic series has zero variance");

    AgreementSummary out;
    out.r_squared = std::min(1.0, (sxy * sxy) / (sxx * syy));
    out.sign_agreement_fraction =
        eligible == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(eligible);
    out.pairs = std::move(pairs);
    return out;
}

AgreementSummary tstat_agreement(std::span<const ExperimentComparison> experiments)
{
    std::vector<TStatPair> pairs;
    pairs.reserve(experiments.size());
    for (const auto& e : experiments) pairs.push_back({e.experiment_id, e.surrogate.t_stat, e.truth.t_stat});
    return tstat_agreement(std::move(pairs));
}

} // namespace sab
