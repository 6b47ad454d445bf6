#pragma once

// Unit-level experiment data: loading, validation and arm-wise views.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sab {

enum class Arm { Control, Treatment };

const char* to_string(Arm arm);

struct UnitRecord {
    std::string unit_id;
    Arm arm = Arm::Control;
    double surrogate = 0.0;
    std::optional<double> truth;
    std::optional<double> covariate;
};

/// Which metric column a test operates on.
enum class MetricColumn { Surrogate, Truth };

/// Column names and arm encoding of a delimited input file.
struct Schema {
    std::string unit_id = "unit_id";
    std::string arm = "arm";
    std::string surrogate = "surrogate";
    std::string truth = "truth";
    std::string covariate = "covariate";
    std::string control_label = "0";
    std::string treatment_label = "1";
    char delimiter = ',';
};

/// Immutable after construction. The constructor enforces unique unit ids,
/// finite metric values and the all-or-nothing rule for optional columns.
class ExperimentDataset {
public:
    ExperimentDataset() = default;
    ExperimentDataset(std::string name, std::vector<UnitRecord> records, double alpha = 0.05);

    const std::string& name() const { return name_; }
    const std::vector<UnitRecord>& records() const { return records_; }
    double alpha() const { return alpha_; }
    bool has_truth() const { return has_truth_; }
    bool has_covariate() const { return has_covariate_; }
    std::size_t size() const { return records_.size(); }

    std::size_t count(Arm arm) const;

    /// Values of one metric column for one arm, in row order.
    std::vector<double> values(Arm arm, MetricColumn column) const;

    /// Copy with the surrogate column replaced; the replacement must have size() entries.
    ExperimentDataset with_surrogate(const std::vector<double>& surrogate) const;

    /// Copy with every arm label flipped.
    ExperimentDataset with_swapped_arms() const;

private:
    std::string name_;
    std::vector<UnitRecord> records_;
    double alpha_ = 0.05;
    bool has_truth_ = false;
    bool has_covariate_ = false;
};

/// Load a delimited file with a header row. Errors carry 1-based line numbers.
ExperimentDataset load_dataset(const std::filesystem::path& path, const Schema& schema = {},
                               double alpha = 0.05);

/// Write a dataset in the layout load_dataset reads back.
void write_dataset(const std::filesystem::path& path, const ExperimentDataset& dataset,
                   const Schema& schema = {});

struct SurrogateTruthPair {
    double surrogate = 0.0;
    double truth = 0.0;
};

/// Read the surrogate and truth columns of a delimited file; other columns are ignored.
std::vector<SurrogateTruthPair> load_pairs(const std::filesystem::path& path, const Schema& schema = {});

/// All (surrogate, truth) pairs of a dataset that carries truth.
std::vector<SurrogateTruthPair> pairs_of(const ExperimentDataset& dataset);

struct SrmResult {
    std::size_t n_treatment = 0;
    std::size_t n_control = 0;
    double expected_ratio = 0.5;
    double chi_square = 0.0;
    double p_value = 1.0;
    bool flagged = false;
};

constexpr double kDefaultSrmThreshold = 0.001;

/// One-degree-of-freedom chi-square goodness of fit of the arm counts
/// against the designed treatment fraction.
SrmResult check_sample_ratio(const ExperimentDataset& dataset, double expected_treatment_fraction = 0.5,
                             double threshold = kDefaultSrmThreshold);

} // namespace sab
