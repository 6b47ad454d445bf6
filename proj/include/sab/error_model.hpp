#pragma once

#include <chrono>
#include <cstddef>
#include <optional>

namespace sab {

enum class ErrorModelProvenance { ValidationSet, Backtest };

const char* to_string(ErrorModelProvenance p);

/// Mean squared prediction error of a surrogate against the matured truth.
struct SurrogateErrorModel {
    double sigma2 = 0.0;
    std::size_t n_validation = 0;
    std::optional<double> r2_pred;
    ErrorModelProvenance provenance = ErrorModelProvenance::ValidationSet;
    std::optional<std::chrono::year_month_day> as_of;
};

} // namespace sab
