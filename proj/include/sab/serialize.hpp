#pragma once

// JSON records and plot-ready delimited tables for every result type.
// JSON field names are part of the command-line contract.

#include <chrono>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sab/dataset.hpp"
#include "sab/error_model.hpp"
#include "sab/inference.hpp"
#include "sab/simulator.hpp"
#include "sab/surrogacy.hpp"

namespace sab {

using Json = nlohmann::ordered_json;

std::string format_date(std::chrono::year_month_day d);

/// Parse YYYY-MM-DD; throws DataError on anything else.
std::chrono::year_month_day parse_date(std::string_view text);

Json to_json(const TestResult& r);
Json to_json(const SrmResult& r);
Json to_json(const SurrogateErrorModel& m);
Json to_json(const CupedOutcome& c);
Json to_json(const ValidityReport& r);
Json to_json(const CalibrationCurve& c);
Json to_json(const AgreementSummary& a);
Json to_json(const SurrogateModel& m);
Json to_json(const SimulationConfig& c);
Json to_json(const SimulationResult& r);
Json to_json(const VarianceDecomposition& v);
Json to_json(const std::vector<GapRow>& rows);

/// Inverse of to_json(SurrogateErrorModel). Throws DataError on a malformed record.
SurrogateErrorModel error_model_from_json(const Json& j);

void write_error_model(const std::string& path, const SurrogateErrorModel& m);
SurrogateErrorModel read_error_model(const std::string& path);

// Delimited tables, one row per bucket / grid point / replicate.
void write_table(std::ostream& out, const ValidityReport& r, char delimiter = ',');
void write_table(std::ostream& out, const CalibrationCurve& c, char delimiter = ',');
void write_table(std::ostream& out, const std::vector<GapRow>& rows, char delimiter = ',');
void write_table(std::ostream& out, const std::vector<ReplicateRecord>& rows, char delimiter = ',');

} // namespace sab
