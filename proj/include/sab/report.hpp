#pragma once

// Human-readable experiment report rows:
//   Metric Name   % Change   p-value   Confidence Interval
//   Some metric   +0.84%     0.0034    [+0.28%, +1.40%]

#include <string>
#include <vector>

#include "sab/inference.hpp"

namespace sab {

struct ReportRow {
    std::string metric_name;
    /// Relative lift in percent.
    double percent_change = 0.0;
    double p_value = 1.0;
    double ci_low_percent = 0.0;
    double ci_high_percent = 0.0;
    bool adjusted = false;
    bool significant = false;
};

/// Build a row from a result that already carries its relative lift.
ReportRow make_report_row(const std::string& metric_name, const TestResult& result, double alpha);

/// "+0.84%": explicit sign, two decimals. Negative zero prints as "+0.00%".
std::string format_percent(double percent);

/// "0.0034": four decimals.
std::string format_pvalue(double p);

/// Column-aligned table with a header line and one line per row.
std::string format_report(const std::vector<ReportRow>& rows);

} // namespace sab
