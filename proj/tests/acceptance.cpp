// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sab_acceptance            run every criterion
//   sab_acceptance 3 7        run only criteria 3 and 7
//
// Exit status is 0 when every selected criterion passes, 1 otherwise.
// Tolerances are fixed constants below; none are derived from the results.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sab/cli.hpp"
#include "sab/distributions.hpp"
#include "sab/inference.hpp"
#include "sab/simulator.hpp"
#include "sab/surrogacy.hpp"
#include "sab/text.hpp"

namespace {

using namespace sab;

// ---- pinned tolerances ----------------------------------------------------
constexpr double kGapLow = 0.0700;
constexpr double kGapHigh = 0.0716;
constexpr double kR2Low = 0.941;
constexpr double kR2High = 0.961;
constexpr double kInflationLevel = 0.001;
constexpr std::size_t kNullUnitsPerArm = 500000;
constexpr double kMaxStandardErrors = 4.0;
constexpr double kDecompositionSigma2 = 1.0;
constexpr std::size_t kDecompositionN = 100;
constexpr double kDecompositionMaxGap = 0.05;
constexpr std::size_t kReplicates = 10000;
constexpr double kCoverageTarget = 0.95;
constexpr double kCoverageTolerance = 0.01;
// "Materially fewer": at least two percentage points below the nominal level.
constexpr double kMaterialShortfall = 0.02;
constexpr double kWelchTolerance = 1e-10;
constexpr int kWelchInstances = 1000;
constexpr double kNormalCdfTolerance = 1e-12;
constexpr double kCupedTolerance = 1e-10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 6)
{
    return format_sig(v, digits);
}

// ---- 1 --------------------------------------------------------------------
Outcome pvalue_gap_anchor()
{
    const double p_y = pvalue_gap(0.05, 0.85).p_y;
    return {p_y >= kGapLow && p_y <= kGapHigh,
            "pvalue_gap(0.05, 0.85) = " + num(p_y) + ", required [" + num(kGapLow) + ", " + num(kGapHigh) + "]"};
}

// ---- 2 --------------------------------------------------------------------
Outcome surrogate_r2()
{
    SimulationConfig config;
    config.training_n = 100000;
    const SurrogateModel m = fit_surrogate_model(config);
    return {m.r2_pred >= kR2Low && m.r2_pred <= kR2High,
            "r2_pred = " + num(m.r2_pred) + ", required [" + num(kR2Low) + ", " + num(kR2High) + "]"};
}

// ---- 3 --------------------------------------------------------------------
Outcome type_one_inflation()
{
    SimulationConfig config;
    config.n_replicates = kReplicates;
    const SimulationResult r = run_fpr_study(config);
    const bool inflated = r.fpr_unadjusted > config.alpha && r.inflation_p_unadjusted < kInflationLevel;
    const bool corrected = r.inflation_p_adjusted >= kInflationLevel;
    std::ostringstream s;
    s << "unadjusted " << r.n_significant_unadjusted << "/" << r.n_replicates << " (one-sided binomial p "
      << num(r.inflation_p_unadjusted, 3) << ", need < " << kInflationLevel << ": " << (inflated ? "ok" : "no")
      << "); adjusted " << r.n_significant_adjusted << "/" << r.n_replicates << " (p " << num(r.inflation_p_adjusted, 3)
      << ", need >= " << kInflationLevel << ": " << (corrected ? "ok" : "no") << "); sigma2 "
      << num(r.sigma2_used, 4) << ", n_per_arm " << config.n_per_arm;
    return {inflated && corrected, s.str()};
}

// ---- 4 --------------------------------------------------------------------
Outcome dgp_null_check()
{
    SimulationConfig config;
    config.n_per_arm = kNullUnitsPerArm;
    config.training_n = 1000;  // the surrogate model plays no role in the truth column
    const SurrogateModel model = fit_surrogate_model(config);
    const ExperimentDataset data = gen_replicate(config, model, 0);
    const auto t = arm_moments(data.values(Arm::Treatment, MetricColumn::Truth));
    const auto c = arm_moments(data.values(Arm::Control, MetricColumn::Truth));
    const double diff = t.mean - c.mean;
    const double se = std::sqrt(t.var / static_cast<double>(t.n) + c.var / static_cast<double>(c.n));
    return {std::fabs(diff) < kMaxStandardErrors * se,
            "mean truth T - C = " + num(diff) + " over " + std::to_string(t.n + c.n) + " units, SE " + num(se) +
                ", |z| = " + num(std::fabs(diff) / se, 3) + " < " + num(kMaxStandardErrors)};
}

// ---- 5 --------------------------------------------------------------------
Outcome variance_decomposition()
{
    SimulationConfig config;
    config.noise_sigma2 = kDecompositionSigma2;
    config.n_per_arm = kDecompositionN;
    config.n_replicates = kReplicates;
    const VarianceDecomposition v = variance_decomposition_check(config);
    const bool gap_ok = v.relative_gap < kDecompositionMaxGap;
    const bool mean_ok = std::fabs(v.mean_gap_z) < kMaxStandardErrors;
    return {gap_ok && mean_ok, "Var(mu_Y) " + num(v.empirical_var_mu_y) + " vs Var(mu_S) + 2 sigma2/n " +
                                   num(v.predicted_var_mu_y) + ": relative gap " + num(v.relative_gap, 3) + " < " +
                                   num(kDecompositionMaxGap) + "; mean gap " + num(v.mean_mu_y - v.mean_mu_s, 3) +
                                   " = " + num(v.mean_gap_z, 3) + " SE"};
}

// ---- 6 --------------------------------------------------------------------
Outcome adjusted_coverage()
{
    SimulationConfig noise;
    noise.harness = SimulationHarness::InjectedNoise;
    noise.treatment_shift = {0.0, 0.0, 0.0};
    noise.n_replicates = kReplicates;
    const SimulationResult adj = run_fpr_study(noise);

    SimulationConfig shifted;
    shifted.n_replicates = kReplicates;
    const SimulationResult unadj = run_fpr_study(shifted);

    const bool adj_ok = std::fabs(adj.coverage_adjusted - kCoverageTarget) <= kCoverageTolerance;
    const bool unadj_ok = unadj.coverage_unadjusted <= kCoverageTarget - kMaterialShortfall;
    return {adj_ok && unadj_ok, "adjusted coverage " + num(adj.coverage_adjusted, 4) + " (injected noise, sigma2 " +
                                    num(noise.noise_sigma2) + "), required " + num(kCoverageTarget) + " +/- " +
                                    num(kCoverageTolerance) + "; unadjusted coverage on the shifted DGP " +
                                    num(unadj.coverage_unadjusted, 4) + ", required <= " +
                                    num(kCoverageTarget - kMaterialShortfall)};
}

// ---- 7 --------------------------------------------------------------------
double reference_welch_p(const std::vector<double>& t, const std::vector<double>& c)
{
    auto moments = [](const std::vector<double>& v) {
        long double s = 0;
        for (double x : v) s += x;
        const long double m = s / static_cast<long double>(v.size());
        long double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, ss / static_cast<long double>(v.size() - 1)};
    };
    const auto [mt, vt] = moments(t);
    const auto [mc, vc] = moments(c);
    const long double nt = static_cast<long double>(t.size());
    const long double nc = static_cast<long double>(c.size());
    const long double a = vt / nt;
    const long double b = vc / nc;
    const long double tstat = (mt - mc) / std::sqrt(a + b);
    const long double df = (a + b) * (a + b) / (a * a / (nt - 1) + b * b / (nc - 1));
    const boost::math::students_t_distribution<long double> dist(df);
    return static_cast<double>(2 * boost::math::cdf(boost::math::complement(dist, std::fabs(tstat))));
}

ExperimentDataset two_arm(const std::vector<double>& t, const std::vector<double>& c)
{
    std::vector<UnitRecord> recs;
    for (std::size_t i = 0; i < t.size(); ++i) recs.push_back({"t" + std::to_string(i), Arm::Treatment, t[i], {}, {}});
    for (std::size_t i = 0; i < c.size(); ++i) recs.push_back({"c" + std::to_string(i), Arm::Control, c[i], {}, {}});
    return ExperimentDataset("welch", std::move(recs));
}

Outcome oracle_equivalence()
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> size(2, 200);
    std::uniform_real_distribution<double> mu(-1.0, 1.0);
    std::uniform_real_distribution<double> sd(0.05, 10.0);
    double worst_welch = 0.0;
    for (int i = 0; i < kWelchInstances; ++i) {
        std::normal_distribution<double> dt(mu(rng), sd(rng));
        std::normal_distribution<double> dc(mu(rng), sd(rng));
        std::vector<double> t(static_cast<std::size_t>(size(rng)));
        std::vector<double> c(static_cast<std::size_t>(size(rng)));
        for (auto& x : t) x = dt(rng);
        for (auto& x : c) x = dc(rng);
        const double p = two_sample_test(two_arm(t, c)).p_value;
        worst_welch = std::max(worst_welch, std::fabs(p - reference_welch_p(t, c)));
    }

    // Phi(z), mpmath at 40 digits, rounded to 25 significant digits.
    constexpr std::array<std::pair<double, double>, 20> phi{{
        {-8.0, 6.220960574271784123515995e-16}, {-7.5, 3.190891672910896227767288e-14},
        {-6.0, 9.865876450376981407008641e-10}, {-5.0, 2.866515718791939116737523e-07},
        {-4.0, 3.167124183311992125377076e-05}, {-3.5, 2.326290790355250363499259e-04},
        {-3.0, 1.349898031630094526651815e-03}, {-2.5, 6.209665325776135166978105e-03},
        {-2.0, 2.275013194817920720028264e-02}, {-1.5, 6.680720126885806600449404e-02},
        {-1.0, 1.586552539314570514147675e-01}, {-0.5, 3.085375387259868963622954e-01},
        {-0.1, 4.601721627229710163310661e-01}, {0.25, 5.987063256829237242408538e-01},
        {0.75, 7.733726476231318006729378e-01}, {1.2, 8.849303297782917233541866e-01},
        {1.959964, 9.750000009035575980056155e-01}, {3.3, 9.995165758576162224929002e-01},
        {5.5, 9.999999810104375341122806e-01}, {8.0, 9.999999999999993779039426e-01},
    }};
    double worst_cdf = 0.0;
    for (const auto& [z, ref] : phi) worst_cdf = std::max(worst_cdf, std::fabs(normal_cdf(z) - ref));

    return {worst_welch <= kWelchTolerance && worst_cdf <= kNormalCdfTolerance,
            "Welch max |dp| " + num(worst_welch, 3) + " over " + std::to_string(kWelchInstances) +
                " instances (<= " + num(kWelchTolerance) + "); normal_cdf max error " + num(worst_cdf, 3) +
                " at 20 points (<= " + num(kNormalCdfTolerance) + ")"};
}

// ---- 8 --------------------------------------------------------------------
Outcome cuped_properties()
{
    std::mt19937_64 rng(808);
    std::normal_distribution<double> nd;

    // Fixed population: metric correlated with a pre-period covariate.
    const std::size_t n = 2000;
    std::vector<double> metric(n), covariate(n);
    for (std::size_t i = 0; i < n; ++i) {
        covariate[i] = nd(rng);
        metric[i] = 3.0 + 0.75 * covariate[i] + 0.6 * nd(rng);
    }
    auto assign = [&](const std::vector<int>& arms) {
        std::vector<UnitRecord> recs;
        for (std::size_t i = 0; i < n; ++i) {
            recs.push_back({"u" + std::to_string(i), arms[i] ? Arm::Treatment : Arm::Control, metric[i], {}, covariate[i]});
        }
        return ExperimentDataset("cuped", std::move(recs));
    };

    // Variance reduction equals the squared sample correlation.
    std::vector<int> arms(n);
    for (std::size_t i = 0; i < n; ++i) arms[i] = static_cast<int>(i % 2);
    const auto first = cuped_transform(assign(arms));
    const double mx = arm_moments(covariate).mean;
    const double my = arm_moments(metric).mean;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (covariate[i] - mx) * (covariate[i] - mx);
        syy += (metric[i] - my) * (metric[i] - my);
        sxy += (covariate[i] - mx) * (metric[i] - my);
    }
    const double rho2 = sxy * sxy / (sxx * syy);
    const double vr_err = std::fabs(first.variance_reduction_fraction - rho2);

    // Randomization test with no effect: re-randomize the same population.
    const int draws = 2000;
    std::vector<double> raw_ate, adj_ate;
    for (int d = 0; d < draws; ++d) {
        std::shuffle(arms.begin(), arms.end(), rng);
        const auto ds = assign(arms);
        raw_ate.push_back(two_sample_test(ds, MetricColumn::Surrogate, TestMethod::Z).ate);
        adj_ate.push_back(two_sample_test(cuped_transform(ds).transformed, MetricColumn::Surrogate, TestMethod::Z).ate);
    }
    const auto raw = arm_moments(raw_ate);
    const auto adj = arm_moments(adj_ate);
    const double mean_se = std::sqrt(adj.var / draws);
    const bool var_ok = adj.var <= raw.var;
    const bool mean_ok = std::fabs(adj.mean) <= kMaxStandardErrors * mean_se;
    return {vr_err <= kCupedTolerance && var_ok && mean_ok,
            "|reduction - rho^2| " + num(vr_err, 3) + " (<= " + num(kCupedTolerance) + "); randomization Var(ATE) " +
                num(adj.var, 4) + " adjusted vs " + num(raw.var, 4) + " raw; mean adjusted ATE " + num(adj.mean, 3) +
                " = " + num(adj.mean / mean_se, 3) + " SE"};
}

// ---- 9 --------------------------------------------------------------------
ExperimentDataset rows_to_dataset(const std::vector<std::tuple<Arm, double, double>>& rows)
{
    std::vector<UnitRecord> recs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& [arm, s, y] = rows[i];
        recs.push_back({"u" + std::to_string(i), arm, s, y, {}});
    }
    return ExperimentDataset("lambda", std::move(recs));
}

Outcome lambda_suite()
{
    std::mt19937_64 rng(909);

    // Exact surrogacy: truth is a function of an integer surrogate whose distribution treatment shifts.
    std::vector<std::tuple<Arm, double, double>> exact;
    std::uniform_int_distribution<int> sc(1, 10);
    std::binomial_distribution<int> st(9, 0.6);
    for (int i = 0; i < 5000; ++i) {
        const int a = sc(rng);
        const int b = 1 + st(rng);
        exact.emplace_back(Arm::Control, a, 2.0 * a + 5.0);
        exact.emplace_back(Arm::Treatment, b, 2.0 * b + 5.0);
    }
    const auto ex = validity_lambda(rows_to_dataset(exact), 10, BucketScheme::EqualWidth, 5);
    bool all_one = !ex.buckets.empty();
    for (const auto& b : ex.buckets) all_one = all_one && b.lambda_t == 1.0 && b.lambda_c == 1.0;

    // Direct effect of treatment on truth that bypasses the surrogate.
    std::normal_distribution<double> nd;
    std::vector<std::tuple<Arm, double, double>> direct;
    for (int i = 0; i < 10000; ++i) {
        const bool treat = i % 2 == 0;
        const double s = 5.0 + nd(rng);
        direct.emplace_back(treat ? Arm::Treatment : Arm::Control, s, s + 0.3 * nd(rng) + (treat ? 2.0 : 0.0));
    }
    const auto de = validity_lambda(rows_to_dataset(direct));
    const bool flagged = !de.passes(kDefaultLambdaTolerance);

    // Hand example: bucket means 0.2 (treatment) and 0.1 (control).
    const auto hand = validity_lambda(
        rows_to_dataset({{Arm::Treatment, 1.0, 0.2}, {Arm::Treatment, 1.0, 0.2}, {Arm::Control, 1.0, 0.1},
                         {Arm::Control, 1.0, 0.1}}),
        1, BucketScheme::EqualWidth, 1);
    const bool hand_ok = hand.buckets.size() == 1 && hand.buckets[0].lambda_t == 4.0 / 3.0 &&
                         hand.buckets[0].lambda_c == 2.0 / 3.0;

    return {all_one && flagged && hand_ok,
            std::string("exact surrogacy all lambda == 1 over ") + std::to_string(ex.buckets.size()) +
                " buckets: " + (all_one ? "yes" : "no") + "; direct effect max |ln lambda| " +
                num(de.max_abs_log_lambda, 3) + " > " + num(kDefaultLambdaTolerance) + ": " +
                (flagged ? "flagged" : "missed") + "; hand example lambda " +
                (hand.buckets.empty() ? std::string("-") : num(hand.buckets[0].lambda_t, 17) + ", " +
                                                               num(hand.buckets[0].lambda_c, 17)) +
                (hand_ok ? " == 4/3, 2/3" : " != 4/3, 2/3")};
}

// ---- 10 -------------------------------------------------------------------
Outcome determinism()
{
    auto run_with = [](unsigned workers) {
        cli::SimulateOptions opt;
        opt.common.format = cli::OutputFormat::Json;
        opt.config.seed = 4242;
        opt.config.n_per_arm = 200;
        opt.config.n_replicates = 2000;
        opt.config.training_n = 20000;
        opt.config.workers = workers;
        std::ostringstream out, err;
        const int code = cli::cmd_simulate(opt, out, err);
        return std::pair{code, out.str()};
    };
    const auto a = run_with(1);
    const auto b = run_with(1);
    const auto c = run_with(4);
    const auto d = run_with(7);
    const bool ok = a.first == 0 && !a.second.empty() && a.second == b.second && a.second == c.second &&
                    a.second == d.second;
    return {ok, "cmd_simulate JSON (" + std::to_string(a.second.size()) + " bytes) identical across 2 runs and " +
                    "worker counts 1/4/7: " + (ok ? "yes" : "no")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria{
        {1, "p-value gap anchor", pvalue_gap_anchor},
        {2, "simulation surrogate predicted R2", surrogate_r2},
        {3, "type-I error inflation and its correction", type_one_inflation},
        {4, "data-generating process null check", dgp_null_check},
        {5, "effect variance decomposition", variance_decomposition},
        {6, "adjusted-test coverage", adjusted_coverage},
        {7, "oracle equivalence", oracle_equivalence},
        {8, "CUPED properties", cuped_properties},
        {9, "lambda validity suite", lambda_suite},
        {10, "determinism", determinism},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    int ran = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("[%s] AC%-2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    if (ran == 0) {
        std::fprintf(stderr, "no criterion selected\n");
        return 2;
    }
    std::printf("%d/%d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
