#include "sab/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "sab/errors.hpp"
#include "sab/text.hpp"

namespace sab {

std::string format_date(std::chrono::year_month_day d)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::year_month_day parse_date(std::string_view text)
{
    text = trim(text);
    auto bad = [&] { return DataError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
    auto num = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
        if (ec != std::errc() || ptr != text.data() + pos + len) throw bad();
        return v;
    };
    const std::chrono::year_month_day d{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
    if (!d.ok()) throw bad();
    return d;
}

namespace {

Json optional_number(const std::optional<double>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

} // namespace

Json to_json(const TestResult& r)
{
    Json j;
    j["method"] = to_string(r.method);
    j["n_treatment"] = r.n_treatment;
    j["n_control"] = r.n_control;
    j["mean_treatment"] = r.mean_treatment;
    j["mean_control"] = r.mean_control;
    j["ate"] = r.ate;
    j["var_ate"] = r.var_ate;
    j["df"] = optional_number(r.df);
    j["t_stat"] = r.t_stat;
    j["p_value"] = r.p_value;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["ci_level"] = r.ci_level;
    j["relative_lift"] = r.relative_lift;
    j["relative_ci_low"] = r.relative_ci_low;
    j["relative_ci_high"] = r.relative_ci_high;
    j["adjusted"] = r.adjusted;
    j["sigma2_used"] = r.sigma2_used;
    return j;
}

Json to_json(const SrmResult& r)
{
    Json j;
    j["n_treatment"] = r.n_treatment;
    j["n_control"] = r.n_control;
    j["expected_ratio"] = r.expected_ratio;
    j["chi_square"] = r.chi_square;
    j["p_value"] = r.p_value;
    j["flagged"] = r.flagged;
    return j;
}

Json to_json(const SurrogateErrorModel& m)
{
    Json j;
    j["sigma2"] = m.sigma2;
    j["n_validation"] = m.n_validation;
    j["r2_pred"] = optional_number(m.r2_pred);
    j["provenance"] = to_string(m.provenance);
    j["as_of"] = m.as_of ? Json(format_date(*m.as_of)) : Json(nullptr);
    return j;
}

SurrogateErrorModel error_model_from_json(const Json& j)
{
    try {
        SurrogateErrorModel m;
        m.sigma2 = j.at("sigma2").get<double>();
        if (!(m.sigma2 >= 0.0)) throw DataError("error model sigma2 must be non-negative");
        m.n_validation = j.value("n_validation", std::size_t{0});
        if (j.contains("r2_pred") && !j["r2_pred"].is_null()) m.r2_pred = j["r2_pred"].get<double>();
        const std::string prov = j.value("provenance", std::string("validation_set"));
        if (prov == "backtest") {
            m.provenance = ErrorModelProvenance::Backtest;
        } else if (prov == "validation_set") {
            m.provenance = ErrorModelProvenance::ValidationSet;
        } else {
            throw DataError("unknown error model provenance '" + prov + "'");
        }
        if (j.contains("as_of") && !j["as_of"].is_null()) m.as_of = parse_date(j["as_of"].get<std::string>());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed error model: ") + e.what());
    }
}

void write_error_model(const std::string& path, const SurrogateErrorModel& m)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << to_json(m).dump(2) << '\n';
}

SurrogateErrorModel read_error_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open error model '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("error model '" + path + "' is not valid JSON: " + e.what());
    }
    return error_model_from_json(j);
}

Json to_json(const CupedOutcome& c)
{
    Json j;
    j["theta"] = c.theta;
    j["covariate_mean"] = c.covariate_mean;
    j["variance_reduction_fraction"] = c.variance_reduction_fraction;
    return j;
}

Json to_json(const ValidityReport& r)
{
    Json j;
    Json buckets = Json::array();
    for (const auto& b : r.buckets) {
        buckets.push_back({{"low", b.low},
                           {"high", b.high},
                           {"n_t", b.n_t},
                           {"n_c", b.n_c},
                           {"mean_truth_t", b.mean_truth_t},
                           {"mean_truth_c", b.mean_truth_c},
                           {"mean_truth_pooled", b.mean_truth_pooled},
                           {"lambda_t", b.lambda_t},
                           {"lambda_c", b.lambda_c}});
    }
    j["buckets"] = std::move(buckets);
    j["max_abs_log_lambda"] = r.max_abs_log_lambda;
    j["n_buckets_skipped"] = r.n_buckets_skipped;
    return j;
}

Json to_json(const CalibrationCurve& c)
{
    Json j;
    Json buckets = Json::array();
    for (const auto& b : c.buckets) {
        buckets.push_back({{"low", b.low},
                           {"high", b.high},
                           {"mean_surrogate", b.mean_surrogate},
                           {"mean_truth", b.mean_truth},
                           {"count", b.count}});
    }
    j["buckets"] = std::move(buckets);
    j["slope"] = c.slope;
    j["intercept"] = c.intercept;
    j["n_buckets_skipped"] = c.n_buckets_skipped;
    return j;
}

Json to_json(const AgreementSummary& a)
{
    Json j;
    Json pairs = Json::array();
    for (const auto& p : a.pairs) {
        pairs.push_back({{"experiment_id", p.experiment_id}, {"t_surrogate", p.t_surrogate}, {"t_truth", p.t_truth}});
    }
    j["pairs"] = std::move(pairs);
    j["r_squared"] = a.r_squared;
    j["sign_agreement_fraction"] = a.sign_agreement_fraction;
    return j;
}

Json to_json(const SurrogateModel& m)
{
    Json j;
    j["coefficients"] = m.coefficients;
    j["r2_pred"] = m.r2_pred;
    j["training_sigma2"] = m.training_sigma2;
    return j;
}

Json to_json(const SimulationConfig& c)
{
    Json j;
    j["n_per_arm"] = c.n_per_arm;
    j["n_replicates"] = c.n_replicates;
    j["alpha"] = c.alpha;
    j["ci_level"] = c.ci_level;
    j["seed"] = c.seed;
    j["treatment_shift"] = c.treatment_shift;
    j["training_n"] = c.training_n;
    j["rng_algorithm"] = c.rng_algorithm;
    j["harness"] = to_string(c.harness);
    j["noise_sigma2"] = c.noise_sigma2;
    return j;
}

Json to_json(const SimulationResult& r)
{
    Json j;
    j["n_replicates"] = r.n_replicates;
    j["n_significant_unadjusted"] = r.n_significant_unadjusted;
    j["n_significant_adjusted"] = r.n_significant_adjusted;
    j["fpr_unadjusted"] = r.fpr_unadjusted;
    j["fpr_adjusted"] = r.fpr_adjusted;
    j["fpr_standard_error"] = r.fpr_standard_error;
    j["inflation_p_unadjusted"] = r.inflation_p_unadjusted;
    j["inflation_p_adjusted"] = r.inflation_p_adjusted;
    j["mean_ate_truth"] = r.mean_ate_truth;
    j["mean_ate_surrogate"] = r.mean_ate_surrogate;
    j["empirical_var_mu_y"] = r.empirical_var_mu_y;
    j["empirical_var_mu_s"] = r.empirical_var_mu_s;
    j["sigma2_used"] = r.sigma2_used;
    j["coverage_unadjusted"] = r.coverage_unadjusted;
    j["coverage_adjusted"] = r.coverage_adjusted;
    j["model"] = to_json(r.model);
    return j;
}

Json to_json(const VarianceDecomposition& v)
{
    Json j;
    j["n_per_arm"] = v.n_per_arm;
    j["n_replicates"] = v.n_replicates;
    j["sigma2"] = v.sigma2;
    j["empirical_var_mu_y"] = v.empirical_var_mu_y;
    j["empirical_var_mu_s"] = v.empirical_var_mu_s;
    j["predicted_var_mu_y"] = v.predicted_var_mu_y;
    j["relative_gap"] = v.relative_gap;
    j["mean_mu_y"] = v.mean_mu_y;
    j["mean_mu_s"] = v.mean_mu_s;
    j["mean_gap_standard_error"] = v.mean_gap_standard_error;
    j["mean_gap_z"] = v.mean_gap_z;
    return j;
}

Json to_json(const std::vector<GapRow>& rows)
{
    Json arr = Json::array();
    for (const auto& r : rows) {
        arr.push_back({{"p_s", r.p_s}, {"r2_pred", r.r2_pred}, {"p_y", r.p_y}, {"delta_p", r.delta_p}});
    }
    return arr;
}

namespace {

class RowWriter {
public:
    RowWriter(std::ostream& out, char delimiter) : out_(out), d_(delimiter) {}

    RowWriter& cell(const std::string& s)
    {
        sep();
        out_ << s;
        return *this;
    }
    RowWriter& cell(double v) { return cell(format_sig(v, 6)); }
    RowWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
    RowWriter& cell(bool v) { return cell(std::string(v ? "1" : "0")); }
    void end()
    {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep()
    {
        if (!first_) out_ << d_;
        first_ = false;
    }
    std::ostream& out_;
    char d_;
    bool first_ = true;
};

} // namespace

void write_table(std::ostream& out, const ValidityReport& r, char delimiter)
{
    RowWriter w(out, delimiter);
    for (const char* h : {"low", "high", "n_t", "n_c", "mean_truth_t", "mean_truth_c", "mean_truth_pooled", "lambda_t",
                          "lambda_c"}) {
        w.cell(std::string(h));
    }
    w.end();
    for (const auto& b : r.buckets) {
        w.cell(b.low).cell(b.high).cell(b.n_t).cell(b.n_c).cell(b.mean_truth_t).cell(b.mean_truth_c)
            .cell(b.mean_truth_pooled).cell(b.lambda_t).cell(b.lambda_c);
        w.end();
    }
}

void write_table(std::ostream& out, const CalibrationCurve& c, char delimiter)
{
    RowWriter w(out, delimiter);
    for (const char* h : {"low", "high", "mean_surrogate", "mean_truth", "count"}) w.cell(std::string(h));
    w.end();
    for (const auto& b : c.buckets) {
        w.cell(b.low).cell(b.high).cell(b.mean_surrogate).cell(b.mean_truth).cell(b.count);
        w.end();
    }
}

void write_table(std::ostream& out, const std::vector<GapRow>& rows, char delimiter)
{
    RowWriter w(out, delimiter);
    for (const char* h : {"p_s", "r2_pred", "p_y", "delta_p"}) w.cell(std::string(h));
    w.end();
    for (const auto& r : rows) {
        w.cell(r.p_s).cell(r.r2_pred).cell(r.p_y).cell(r.delta_p);
        w.end();
    }
}

void write_table(std::ostream& out, const std::vector<ReplicateRecord>& rows, char delimiter)
{
    RowWriter w(out, delimiter);
    for (const char* h : {"replicate", "mu_surrogate", "mu_truth", "p_unadjusted", "p_adjusted",
                          "significant_unadjusted", "significant_adjusted", "covered_unadjusted",
                          "covered_adjusted"}) {
        w.cell(std::string(h));
    }
    w.end();
    for (const auto& r : rows) {
        w.cell(r.index).cell(r.mu_surrogate).cell(r.mu_truth).cell(r.p_unadjusted).cell(r.p_adjusted)
            .cell(r.significant_unadjusted).cell(r.significant_adjusted).cell(r.covered_unadjusted)
            .cell(r.covered_adjusted);
        w.end();
    }
}

} // namespace sab
