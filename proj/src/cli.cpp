#include "sab/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "sab/errors.hpp"
#include "sab/report.hpp"
#include "sab/serialize.hpp"
#include "sab/text.hpp"

namespace sab::cli {

namespace {

// Map library exceptions onto exit codes.
int guarded(std::ostream& err, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const DegenerateError& e) {
        err << "error: degenerate statistics: " << e.what() << '\n';
        return kDegenerate;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const RangeError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

void emit(const CommonOptions& common, std::ostream& out, const std::string& text)
{
    if (common.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(common.output, std::ios::binary);
    if (!f) throw DataError("cannot write '" + common.output + "'");
    f << text;
}

std::string sig(double v)
{
    return format_sig(v, 6);
}

void require_input(const CommonOptions& common)
{
    if (common.input.empty()) throw RangeError("--input is required");
}

void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
}

} // namespace

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        require_input(opt.common);
        if (opt.sigma2 && !opt.error_model.empty()) throw RangeError("--sigma2 and --error-model are exclusive");
        const ExperimentDataset raw = load_dataset(opt.common.input, opt.common.schema, opt.common.alpha);
        const SrmResult srm = check_sample_ratio(raw, opt.expected_split, opt.srm_threshold);

        std::optional<CupedOutcome> cuped;
        if (opt.cuped) cuped = cuped_transform(raw);
        const ExperimentDataset& data = cuped ? cuped->transformed : raw;

        std::optional<double> sigma2 = opt.sigma2;
        if (!opt.error_model.empty()) sigma2 = read_error_model(opt.error_model).sigma2;

        TestResult result = sigma2 ? adjusted_test(data, *sigma2, opt.common.ci_level)
                                   : two_sample_test(data, MetricColumn::Surrogate, opt.method, opt.common.ci_level);
        result = relative_lift(result);
        const std::string metric = opt.metric_name.empty() ? opt.common.schema.surrogate : opt.metric_name;
        const ReportRow row = make_report_row(metric, result, opt.common.alpha);

        if (srm.flagged) {
            err << "WARNING: sample ratio mismatch (chi-square " << sig(srm.chi_square) << ", p = " << sig(srm.p_value)
                << "); randomization may be broken, interpret the report with care\n";
        }

        std::ostringstream s;
        if (opt.common.format == OutputFormat::Json) {
            Json j;
            j["dataset"] = raw.name();
            j["srm"] = to_json(srm);
            j["cuped"] = cuped ? to_json(*cuped) : Json(nullptr);
            j["test"] = to_json(result);
            j["report"] = {{"metric_name", row.metric_name},
                           {"percent_change", row.percent_change},
                           {"p_value", row.p_value},
                           {"ci_low_percent", row.ci_low_percent},
                           {"ci_high_percent", row.ci_high_percent},
                           {"adjusted", row.adjusted},
                           {"significant", row.significant}};
            s << j.dump(2) << '\n';
        } else {
            s << "dataset: " << raw.name() << " (treatment " << srm.n_treatment << ", control " << srm.n_control
              << ")\n";
            s << "sample ratio: chi-square " << sig(srm.chi_square) << ", p " << sig(srm.p_value) << " vs expected "
              << sig(opt.expected_split) << (srm.flagged ? "  ** SAMPLE RATIO MISMATCH **" : "  ok") << '\n';
            if (cuped) {
                s << "cuped: theta " << sig(cuped->theta) << ", variance reduction "
                  << sig(100.0 * cuped->variance_reduction_fraction) << "%\n";
            }
            if (result.adjusted) {
                s << "test: z, variance adjusted for prediction error (sigma2 " << sig(result.sigma2_used) << ")\n";
            } else {
                s << "test: " << to_string(result.method) << '\n';
            }
            s << "mean treatment " << sig(result.mean_treatment) << ", mean control " << sig(result.mean_control)
              << ", ate " << sig(result.ate) << ", var(ate) " << sig(result.var_ate) << ", t " << sig(result.t_stat)
              << '\n';
            s << '\n' << format_report({row});
        }
        emit(opt.common, out, s.str());
        return srm.flagged ? kSrmFlagged : kOk;
    });
}

int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        require_input(opt.common);
        const ExperimentDataset data = load_dataset(opt.common.input, opt.common.schema, opt.common.alpha);
        if (!data.has_truth()) {
            throw DataError("'" + opt.common.input + "' has no '" + opt.common.schema.truth +
                            "' column; surrogate validation needs matured truth values");
        }
        const auto pairs = pairs_of(data);
        const CalibrationCurve curve = calibration_curve(pairs, opt.buckets, opt.scheme);
        const ValidityReport validity = validity_lambda(data, opt.buckets, opt.scheme, opt.min_bucket_n);
        const bool passes = validity.passes(opt.lambda_tol);

        if (!opt.calibration_table.empty()) {
            std::ostringstream t;
            write_table(t, curve);
            write_text_file(opt.calibration_table, t.str());
        }
        if (!opt.lambda_table.empty()) {
            std::ostringstream t;
            write_table(t, validity);
            write_text_file(opt.lambda_table, t.str());
        }

        std::ostringstream s;
        if (opt.common.format == OutputFormat::Json) {
            Json j;
            j["dataset"] = data.name();
            j["calibration"] = to_json(curve);
            j["validity"] = to_json(validity);
            j["lambda_tolerance"] = opt.lambda_tol;
            j["passes"] = passes;
            s << j.dump(2) << '\n';
        } else {
            s << "calibration (" << to_string(opt.scheme) << ", " << opt.buckets << " buckets): slope "
              << sig(curve.slope) << ", intercept " << sig(curve.intercept) << '\n';
            write_table(s, curve);
            s << "\nlambda by surrogate bucket (" << validity.buckets.size() << " kept, " << validity.n_buckets_skipped
              << " skipped):\n";
            write_table(s, validity);
            s << "\nmax |ln lambda| " << sig(validity.max_abs_log_lambda) << " (tolerance " << sig(opt.lambda_tol)
              << "): " << (passes ? "PASS" : "FLAGGED") << '\n';
        }
        emit(opt.common, out, s.str());
        if (!passes) err << "surrogacy check flagged: max |ln lambda| exceeds " << sig(opt.lambda_tol) << '\n';
        return passes ? kOk : kValidationFlagged;
    });
}

int cmd_backtest(const BacktestOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        require_input(opt.common);
        if (opt.maturity_days < 0) throw RangeError("--maturity-days must be non-negative");
        const std::filesystem::path manifest = opt.common.input;
        std::ifstream in(manifest);
        if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");

        std::string line;
        if (!std::getline(in, line)) throw DataError("manifest '" + manifest.string() + "' is empty");
        const auto header = split_delimited(line, opt.common.schema.delimiter);
        std::optional<std::size_t> date_col;
        std::optional<std::size_t> path_col;
        for (std::size_t i = 0; i < header.size(); ++i) {
            const auto h = trim(header[i]);
            if (h == "as_of") date_col = i;
            if (h == "path") path_col = i;
        }
        if (!date_col || !path_col) throw DataError("manifest needs 'as_of' and 'path' columns");

        std::vector<Snapshot> snapshots;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto f = split_delimited(line, opt.common.schema.delimiter);
            if (f.size() <= std::max(*date_col, *path_col)) {
                throw DataError("manifest line " + std::to_string(line_no) + ": missing fields");
            }
            std::filesystem::path p = std::string(trim(f[*path_col]));
            if (p.is_relative()) p = manifest.parent_path() / p;
            Snapshot snap;
            snap.name = std::string(trim(f[*path_col]));
            snap.as_of = parse_date(f[*date_col]);
            snap.pairs = load_pairs(p, opt.common.schema);
            snapshots.push_back(std::move(snap));
        }

        const auto analysis_date =
            opt.analysis_date.empty()
                ? std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now())}
                : parse_date(opt.analysis_date);
        const BacktestResult result = backtest(snapshots, std::chrono::days{opt.maturity_days}, analysis_date);
        if (!opt.write_error_model.empty()) write_error_model(opt.write_error_model, result.pooled);

        std::ostringstream s;
        if (opt.common.format == OutputFormat::Json) {
            Json j;
            Json per = Json::array();
            for (std::size_t i = 0; i < result.per_snapshot.size(); ++i) {
                Json m = to_json(result.per_snapshot[i]);
                m["snapshot"] = snapshots[i].name;
                per.push_back(std::move(m));
            }
            j["snapshots"] = std::move(per);
            j["pooled"] = to_json(result.pooled);
            s << j.dump(2) << '\n';
        } else {
            s << "snapshot,as_of,n_validation,sigma2,r2_pred\n";
            for (std::size_t i = 0; i < result.per_snapshot.size(); ++i) {
                const auto& m = result.per_snapshot[i];
                s << snapshots[i].name << ',' << format_date(*m.as_of) << ',' << m.n_validation << ',' << sig(m.sigma2)
                  << ',' << (m.r2_pred ? sig(*m.r2_pred) : std::string("")) << '\n';
            }
            const auto& p = result.pooled;
            s << "pooled," << format_date(*p.as_of) << ',' << p.n_validation << ',' << sig(p.sigma2) << ','
              << (p.r2_pred ? sig(*p.r2_pred) : std::string("")) << '\n';
        }
        emit(opt.common, out, s.str());
        return kOk;
    });
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        SimulationConfig config = opt.config;
        config.retain_replicates = !opt.replicate_table.empty();
        validate(config);
        const SimulationResult result = run_fpr_study(config);
        const VarianceDecomposition decomposition = variance_decomposition_check(config);

        if (!opt.replicate_table.empty()) {
            std::ostringstream t;
            write_table(t, result.replicates);
            write_text_file(opt.replicate_table, t.str());
        }

        std::ostringstream s;
        if (opt.common.format == OutputFormat::Json) {
            Json j;
            j["config"] = to_json(config);
            j["result"] = to_json(result);
            j["variance_decomposition"] = to_json(decomposition);
            s << j.dump(2) << '\n';
        } else {
            const auto& c = result.model.coefficients;
            s << "surrogate model: " << sig(c[0]) << " + " << sig(c[1]) << " x1 + " << sig(c[2]) << " x2 + "
              << sig(c[3]) << " x3 (r2_pred " << sig(result.model.r2_pred) << ", training sigma2 "
              << sig(result.model.training_sigma2) << ")\n";
            s << "harness " << to_string(config.harness) << ", " << result.n_replicates << " replicates, "
              << config.n_per_arm << " units per arm, alpha " << sig(config.alpha) << '\n';
            s << "fpr unadjusted " << sig(result.fpr_unadjusted) << " (" << result.n_significant_unadjusted << "/"
              << result.n_replicates << "), binomial se " << sig(result.fpr_standard_error) << ", one-sided p "
              << sig(result.inflation_p_unadjusted) << '\n';
            s << "fpr adjusted   " << sig(result.fpr_adjusted) << " (" << result.n_significant_adjusted << "/"
              << result.n_replicates << "), binomial se " << sig(result.fpr_standard_error) << ", one-sided p "
              << sig(result.inflation_p_adjusted) << " (sigma2 " << sig(result.sigma2_used) << ")\n";
            s << "mean ate truth " << sig(result.mean_ate_truth) << ", surrogate " << sig(result.mean_ate_surrogate)
              << "; coverage unadjusted " << sig(result.coverage_unadjusted) << ", adjusted "
              << sig(result.coverage_adjusted) << '\n';
            s << "variance decomposition (injected sigma2 " << sig(decomposition.sigma2) << "): var(mu_Y) "
              << sig(decomposition.empirical_var_mu_y) << " vs var(mu_S) + 2 sigma2/n "
              << sig(decomposition.predicted_var_mu_y) << ", relative gap " << sig(decomposition.relative_gap)
              << "; mean gap z " << sig(decomposition.mean_gap_z) << '\n';
        }
        emit(opt.common, out, s.str());
        return kOk;
    });
}

int cmd_curve(const CurveOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (opt.r2_values.empty()) throw RangeError("at least one --r2 value is required");
        const std::vector<double> grid = opt.p_grid.empty() ? uniform_pvalue_grid(opt.grid_points) : opt.p_grid;
        const auto rows = pvalue_gap_curve(opt.r2_values, grid);
        std::ostringstream s;
        if (opt.common.format == OutputFormat::Json) {
            s << to_json(rows).dump(2) << '\n';
        } else {
            write_table(s, rows);
        }
        emit(opt.common, out, s.str());
        return kOk;
    });
}

namespace {

void add_common(CLI::App* sub, CommonOptions& common, bool needs_input)
{
    auto* in = sub->add_option("--input,-i", common.input, "Input file");
    if (needs_input) in->required();
    sub->add_option("--alpha", common.alpha, "Significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    sub->add_option("--ci-level", common.ci_level, "Confidence level")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--format", common.format, "Output format")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, OutputFormat>{{"table", OutputFormat::Table}, {"json", OutputFormat::Json}},
            CLI::ignore_case));
    sub->add_option("--output,-o", common.output, "Write the report here instead of stdout");
    sub->add_option("--col-unit-id", common.schema.unit_id, "Unit id column name")->capture_default_str();
    sub->add_option("--col-arm", common.schema.arm, "Arm column name")->capture_default_str();
    sub->add_option("--col-surrogate", common.schema.surrogate, "Surrogate column name")->capture_default_str();
    sub->add_option("--col-truth", common.schema.truth, "Truth column name")->capture_default_str();
    sub->add_option("--col-covariate", common.schema.covariate, "Covariate column name")->capture_default_str();
    sub->add_option("--control-label", common.schema.control_label, "Arm value meaning control")
        ->capture_default_str();
    sub->add_option("--treatment-label", common.schema.treatment_label, "Arm value meaning treatment")
        ->capture_default_str();
    sub->add_option("--delimiter", common.schema.delimiter, "Field delimiter")->capture_default_str();
}

void check_open_interval(double v, const char* name)
{
    if (!(v > 0.0 && v < 1.0)) throw CLI::ValidationError(name, "must lie strictly inside (0,1)");
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Surrogate-metric A/B test analysis"};
    app.name("sab");
    app.set_config("--config", "", "Key-value config file (flags override it)");
    app.require_subcommand(1, 1);

    AnalyzeOptions analyze;
    auto* a = app.add_subcommand("analyze", "Analyze one experiment file");
    add_common(a, analyze.common, true);
    a->add_option("--sigma2", analyze.sigma2, "Surrogate prediction MSE to add to the effect variance")
        ->check(CLI::NonNegativeNumber);
    a->add_option("--error-model", analyze.error_model, "Error-model JSON written by backtest");
    a->add_flag("--cuped", analyze.cuped, "Apply CUPED with the covariate column first");
    a->add_option("--method", analyze.method, "Unadjusted test method")
        ->transform(CLI::CheckedTransformer(std::map<std::string, TestMethod>{{"welch", TestMethod::Welch},
                                                                              {"pooled", TestMethod::Pooled},
                                                                              {"z", TestMethod::Z}},
                                            CLI::ignore_case));
    a->add_option("--expected-split", analyze.expected_split, "Designed treatment fraction")->capture_default_str();
    a->add_option("--srm-threshold", analyze.srm_threshold, "SRM p-value alarm threshold")->capture_default_str();
    a->add_option("--metric-name", analyze.metric_name, "Metric name shown in the report");

    ValidateOptions validate_opt;
    auto* v = app.add_subcommand("validate", "Calibration curve and lambda surrogacy check");
    add_common(v, validate_opt.common, true);
    v->add_option("--buckets", validate_opt.buckets, "Number of surrogate buckets")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    v->add_option("--scheme", validate_opt.scheme, "Bucket scheme")
        ->transform(CLI::CheckedTransformer(std::map<std::string, BucketScheme>{{"quantile", BucketScheme::Quantile},
                                                                                {"equal_width", BucketScheme::EqualWidth}},
                                            CLI::ignore_case));
    v->add_option("--min-bucket-n", validate_opt.min_bucket_n, "Minimum units per arm in a kept bucket")
        ->capture_default_str();
    v->add_option("--lambda-tol", validate_opt.lambda_tol, "Tolerance on max |ln lambda|")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    v->add_option("--calibration-table", validate_opt.calibration_table, "Write calibration buckets (CSV)");
    v->add_option("--lambda-table", validate_opt.lambda_table, "Write lambda buckets (CSV)");

    BacktestOptions back;
    auto* b = app.add_subcommand("backtest", "Prediction error over matured snapshots");
    add_common(b, back.common, false);
    b->add_option("--manifest", back.common.input, "CSV manifest with as_of,path columns");
    b->add_option("--maturity-days", back.maturity_days, "Days until truth is mature")->capture_default_str();
    b->add_option("--analysis-date", back.analysis_date, "YYYY-MM-DD (default: today)");
    b->add_option("--write-error-model", back.write_error_model, "Write the pooled error model (JSON)");

    SimulateOptions sim;
    auto* s = app.add_subcommand("simulate", "Type-I error simulation study");
    add_common(s, sim.common, false);
    std::vector<double> shift;
    std::uint64_t seed = sim.config.seed;
    s->add_option("--seed", seed, "Random seed")->capture_default_str();
    s->add_option("--n-per-arm", sim.config.n_per_arm, "Units per arm")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
    s->add_option("--replicates", sim.config.n_replicates, "Replicates")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    s->add_option("--training-n", sim.config.training_n, "Training sample for the surrogate model")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{10}, std::size_t{100000000}));
    s->add_option("--shift", shift, "Treatment lower bounds for x2 and x3")->expected(2);
    s->add_option("--harness", sim.config.harness, "Data generating harness")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, SimulationHarness>{{"nonlinear", SimulationHarness::Nonlinear},
                                                     {"injected_noise", SimulationHarness::InjectedNoise},
                                                     {"surrogate_is_truth", SimulationHarness::SurrogateIsTruth}},
            CLI::ignore_case));
    s->add_option("--noise-sigma2", sim.config.noise_sigma2, "Injected noise variance")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    s->add_option("--workers", sim.config.workers, "Worker threads (0: all cores)")->capture_default_str();
    s->add_option("--replicate-table", sim.replicate_table, "Write per-replicate records (CSV)");

    CurveOptions curve;
    auto* c = app.add_subcommand("curve", "True-metric p-value implied by a surrogate p-value");
    add_common(c, curve.common, false);
    std::vector<double> r2;
    c->add_option("--r2", r2, "Predicted R-squared values in (0,1]")->check(CLI::Range(0.0, 1.0));
    c->add_option("--grid", curve.grid_points, "Number of evenly spaced p-values")->capture_default_str();
    c->add_option("--p-grid", curve.p_grid, "Explicit surrogate p-values");

    try {
        app.parse(argc, argv);
        const std::pair<CLI::App*, CommonOptions*> subs[] = {
            {a, &analyze.common}, {v, &validate_opt.common}, {b, &back.common}, {s, &sim.common}, {c, &curve.common}};
        for (const auto& [sub, common] : subs) {
            if (!sub->parsed()) continue;
            check_open_interval(common->ci_level, "--ci-level");
            // The simulation accepts alpha = 0 (empty rejection region).
            if (sub != s) check_open_interval(common->alpha, "--alpha");
            else if (!(common->alpha >= 0.0 && common->alpha < 1.0)) {
                throw CLI::ValidationError("--alpha", "must lie in [0,1)");
            }
        }
        if (a->parsed()) check_open_interval(analyze.expected_split, "--expected-split");
        if (c->parsed()) {
            for (double x : r2) {
                if (!(x > 0.0)) throw CLI::ValidationError("--r2", "must lie in (0,1]");
            }
            for (double x : curve.p_grid) check_open_interval(x, "--p-grid");
        }
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    if (a->parsed()) return cmd_analyze(analyze, out, err);
    if (v->parsed()) return cmd_validate(validate_opt, out, err);
    if (b->parsed()) {
        if (back.common.input.empty()) {
            err << "usage error: --manifest is required\n";
            return kUsage;
        }
        return cmd_backtest(back, out, err);
    }
    if (s->parsed()) {
        sim.config.seed = seed;
        sim.config.alpha = sim.common.alpha;
        sim.config.ci_level = sim.common.ci_level;
        if (!shift.empty()) sim.config.treatment_shift = {0.0, shift[0], shift[1]};
        try {
            validate(sim.config);
        } catch (const RangeError& e) {
            err << "usage error: " << e.what() << '\n';
            return kUsage;
        }
        return cmd_simulate(sim, out, err);
    }
    if (c->parsed()) {
        if (!r2.empty()) curve.r2_values = r2;
        return cmd_curve(curve, out, err);
    }
    return kUsage;
}

} // namespace sab::cli
