#include "sab/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <string_view>

namespace sab {

ReportRow make_report_row(const std::string& metric_name, const TestResult& result, double alpha)
{
    ReportRow row;
    row.metric_name = metric_name;
    row.percent_change = 100.0 * result.relative_lift;
    row.ci_low_percent = 100.0 * result.relative_ci_low;
    row.ci_high_percent = 100.0 * result.relative_ci_high;
    row.p_value = result.p_value;
    row.adjusted = result.adjusted;
    row.significant = result.p_value < alpha;
    return row;
}

std::string format_percent(double percent)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.2f%%", percent);
    std::string s = buf;
    if (s == "-0.00%") s = "+0.00%";
    return s;
}

std::string format_pvalue(double p)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", p);
    return buf;
}

std::string format_report(const std::vector<ReportRow>& rows)
{
    using Line = std::array<std::string, 4>;
    std::vector<Line> lines;
    lines.push_back({"Metric Name", "% Change", "p-value", "Confidence Interval"});
    for (const auto& r : rows) {
        std::string name = r.metric_name;
        if (r.adjusted) name += " (adjusted)";
        lines.push_back({name, format_percent(r.percent_change), format_pvalue(r.p_value),
                         "[" + format_percent(r.ci_low_percent) + ", " + format_percent(r.ci_high_percent) + "]"});
    }
    std::array<std::size_t, 4> width{};
    for (const auto& l : lines) {
        for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], l[c].size());
    }
    std::string out;
    for (const auto& l : lines) {
        for (std::size_t c = 0; c < 4; ++c) {
            out += l[c];
            if (c + 1 < 4) out += std::string(width[c] - l[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

} // namespace sab
