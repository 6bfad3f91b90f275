#pragma once

#include "cubicderiv/certify.hpp"
#include "cubicderiv/control.hpp"
#include "cubicderiv/maps.hpp"
#include "cubicderiv/recover.hpp"

#include <json.hpp>

#include <string>

namespace cubicderiv {

/// Finite values as numbers; inf/nan as the strings "inf", "-inf", "nan".
nlohmann::json json_number(double x);
nlohmann::json to_json(const Element& e);
nlohmann::json to_json(const ProbeConfig& p);
nlohmann::json to_json(const ValidationReport& v);
nlohmann::json to_json(const ResidualSummary& s, bool include_rows = false);
nlohmann::json to_json(const DeltaMeasurement& d);
nlohmann::json to_json(const RecoveryReport& r, bool include_values = false);
nlohmann::json to_json(const CertificateReport& c);

/// Column order probe_id,norm_a,deviation,bound,margin; %.17g numbers.
std::string certificate_csv(const CertificateReport& c);
std::string format_double(double x);

/// ISO-8601 UTC, seconds resolution.
std::string timestamp_utc();

/// Writes to <path>.tmp and renames over <path>.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace cubicderiv
