#include "sab/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sab/distributions.hpp"
#include "sab/errors.hpp"
#include "sab/text.hpp"

namespace sab {

const char* to_string(Arm arm)
{
    return arm == Arm::Treatment ? "treatment" : "control";
}

ExperimentDataset::ExperimentDataset(std::string name, std::vector<UnitRecord> records, double alpha)
    : name_(std::move(name)), records_(std::move(records)), alpha_(alpha)
{
    if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw RangeError("dataset alpha must lie in (0,1)");

    std::unordered_set<std::string> seen;
    seen.reserve(records_.size());
    std::size_t n_truth = 0;
    std::size_t n_covariate = 0;
    for (const auto& r : records_) {
        if (!seen.insert(r.unit_id).second) throw DataError("duplicate unit_id '" + r.unit_id + "'");
        if (!std::isfinite(r.surrogate)) throw DataError("non-finite surrogate for unit '" + r.unit_id + "'");
        if (r.truth) {
            if (!std::isfinite(*r.truth)) throw DataError("non-finite truth for unit '" + r.unit_id + "'");
            ++n_truth;
        }
        if (r.covariate) {
            if (!std::isfinite(*r.covariate)) throw DataError("non-finite covariate for unit '" + r.unit_id + "'");
            ++n_covariate;
        }
    }
    if (n_truth != 0 && n_truth != records_.size()) {
        throw DataError("truth column is populated for " + std::to_string(n_truth) + " of " +
                        std::to_string(records_.size()) + " records; it must be all or nothing");
    }
    if (n_covariate != 0 && n_covariate != records_.size()) {
        throw DataError("covariate column is populated for " + std::to_string(n_covariate) + " of " +
                        std::to_string(records_.size()) + " records; it must be all or nothing");
    }
    has_truth_ = !records_.empty() && n_truth == records_.size();
    has_covariate_ = !records_.empty() && n_covariate == records_.size();
}

std::size_t ExperimentDataset::count(Arm arm) const
{
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.arm == arm);
    return n;
}

std::vector<double> ExperimentDataset::values(Arm arm, MetricColumn column) const
{
    if (column == MetricColumn::Truth && !has_truth_) throw DataError("dataset has no truth column");
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        if (r.arm != arm) continue;
        out.push_back(column == MetricColumn::Truth ? *r.truth : r.surrogate);
    }
    return out;
}

ExperimentDataset ExperimentDataset::with_surrogate(const std::vector<double>& surrogate) const
{
    if (surrogate.size() != records_.size()) throw RangeError("with_surrogate: size mismatch");
    std::vector<UnitRecord> copy = records_;
    for (std::size_t i = 0; i < copy.size(); ++i) copy[i].surrogate = surrogate[i];
    return ExperimentDataset(name_, std::move(copy), alpha_);
}

ExperimentDataset ExperimentDataset::with_swapped_arms() const
{
    std::vector<UnitRecord> copy = records_;
    for (auto& r : copy) r.arm = r.arm == Arm::Treatment ? Arm::Control : Arm::Treatment;
    return ExperimentDataset(name_, std::move(copy), alpha_);
}

namespace {

struct ColumnIndex {
    std::unordered_map<std::string, std::size_t> by_name;

    std::optional<std::size_t> find(const std::string& name) const
    {
        auto it = by_name.find(name);
        if (it == by_name.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require(const std::string& name, const std::filesystem::path& path) const
    {
        auto idx = find(name);
        if (!idx) throw DataError(path.string() + ": missing required column '" + name + "'");
        return *idx;
    }
};

ColumnIndex read_header(std::istream& in, const std::filesystem::path& path, char delimiter)
{
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file (no header row)");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    ColumnIndex idx;
    const auto fields = split_delimited(line, delimiter);
    for (std::size_t i = 0; i < fields.size(); ++i) idx.by_name.emplace(trim(fields[i]), i);
    return idx;
}

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

double parse_metric(std::string_view cell, const char* column, std::size_t line_no)
{
    auto value = parse_double(cell);
    if (!value) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric " + column + " value '" +
                        std::string(cell) + "'");
    }
    if (!std::isfinite(*value)) {
        throw DataError("line " + std::to_string(line_no) + ": non-finite " + column + " value '" +
                        std::string(cell) + "'");
    }
    return *value;
}

const std::string& cell_at(const std::vector<std::string>& fields, std::size_t col, std::size_t line_no)
{
    if (col >= fields.size()) {
        throw DataError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(col + 1) +
                        " fields, found " + std::to_string(fields.size()));
    }
    return fields[col];
}

} // namespace

ExperimentDataset load_dataset(const std::filesystem::path& path, const Schema& schema, double alpha)
{
    auto in = open_input(path);
    const ColumnIndex columns = read_header(in, path, schema.delimiter);
    const std::size_t id_col = columns.require(schema.unit_id, path);
    const std::size_t arm_col = columns.require(schema.arm, path);
    const std::size_t s_col = columns.require(schema.surrogate, path);
    const auto truth_col = columns.find(schema.truth);
    const auto cov_col = columns.find(schema.covariate);

    std::vector<UnitRecord> records;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_delimited(line, schema.delimiter);

        UnitRecord rec;
        rec.unit_id = std::string(trim(cell_at(fields, id_col, line_no)));
        if (rec.unit_id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty unit_id");
        auto [it, inserted] = first_line.emplace(rec.unit_id, line_no);
        if (!inserted) {
            throw DataError("line " + std::to_string(line_no) + ": duplicate unit_id '" + rec.unit_id +
                            "' (first seen on line " + std::to_string(it->second) + ")");
        }

        const std::string_view arm = trim(cell_at(fields, arm_col, line_no));
        if (arm == schema.treatment_label) {
            rec.arm = Arm::Treatment;
        } else if (arm == schema.control_label) {
            rec.arm = Arm::Control;
        } else {
            throw DataError("line " + std::to_string(line_no) + ": invalid arm value '" + std::string(arm) +
                            "' (expected '" + schema.control_label + "' or '" + schema.treatment_label + "')");
        }

        rec.surrogate = parse_metric(trim(cell_at(fields, s_col, line_no)), "surrogate", line_no);
        if (truth_col && *truth_col < fields.size()) {
            const auto cell = trim(fields[*truth_col]);
            if (!cell.empty()) rec.truth = parse_metric(cell, "truth", line_no);
        }
        if (cov_col && *cov_col < fields.size()) {
            const auto cell = trim(fields[*cov_col]);
            if (!cell.empty()) rec.covariate = parse_metric(cell, "covariate", line_no);
        }
        records.push_back(std::move(rec));
    }

    try {
        return ExperimentDataset(path.stem().string(), std::move(records), alpha);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_dataset(const std::filesystem::path& path, const ExperimentDataset& dataset, const Schema& schema)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    const char d = schema.delimiter;
    out << schema.unit_id << d << schema.arm << d << schema.surrogate;
    if (dataset.has_truth()) out << d << schema.truth;
    if (dataset.has_covariate()) out << d << schema.covariate;
    out << '\n';
    for (const auto& r : dataset.records()) {
        out << r.unit_id << d << (r.arm == Arm::Treatment ? schema.treatment_label : schema.control_label) << d
            << format_roundtrip(r.surrogate);
        if (dataset.has_truth()) out << d << format_roundtrip(*r.truth);
        if (dataset.has_covariate()) out << d << format_roundtrip(*r.covariate);
        out << '\n';
    }
}

std::vector<SurrogateTruthPair> load_pairs(const std::filesystem::path& path, const Schema& schema)
{
    auto in = open_input(path);
    const ColumnIndex columns = read_header(in, path, schema.delimiter);
    const std::size_t s_col = columns.require(schema.surrogate, path);
    const std::size_t y_col = columns.require(schema.truth, path);

    std::vector<SurrogateTruthPair> pairs;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_delimited(line, schema.delimiter);
        SurrogateTruthPair p;
        p.surrogate = parse_metric(trim(cell_at(fields, s_col, line_no)), "surrogate", line_no);
        p.truth = parse_metric(trim(cell_at(fields, y_col, line_no)), "truth", line_no);
        pairs.push_back(p);
    }
    return pairs;
}

std::vector<SurrogateTruthPair> pairs_of(const ExperimentDataset& dataset)
{
    if (!dataset.has_truth()) throw DataError("dataset '" + dataset.name() + "' has no truth column");
    std::vector<SurrogateTruthPair> out;
    out.reserve(dataset.size());
    for (const auto& r : dataset.records()) out.push_back({r.surrogate, *r.truth});
    return out;
}

SrmResult check_sample_ratio(const ExperimentDataset& dataset, double expected_treatment_fraction,
                             double threshold)
{
    if (!(expected_treatment_fraction > 0.0 && expected_treatment_fraction < 1.0)) {
        throw RangeError("expected treatment fraction must lie in (0,1)");
    }
    SrmResult out;
    out.n_treatment = dataset.count(Arm::Treatment);
    out.n_control = dataset.count(Arm::Control);
    if (out.n_treatment == 0 || out.n_control == 0) throw DataError("sample ratio check needs both arms non-empty");

    const double n = static_cast<double>(out.n_treatment + out.n_control);
    const double exp_t = n * expected_treatment_fraction;
    const double exp_c = n * (1.0 - expected_treatment_fraction);
    const double dt = static_cast<double>(out.n_treatment) - exp_t;
    const double dc = static_cast<double>(out.n_control) - exp_c;
    out.expected_ratio = expected_treatment_fraction;
    out.chi_square = dt * dt / exp_t + dc * dc / exp_c;
    out.p_value = chi_square1_sf(out.chi_square);
    out.flagged = out.p_value < threshold;
    return out;
}

} // namespace sab
