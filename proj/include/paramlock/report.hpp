#pragma once

// Report serialization. JSON documents carry {"schema": "...", "version": 1};
// non-finite numbers are written as null. CSV is one row per epoch, key,
// class or trial depending on the report type.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "paramlock/eval.hpp"

namespace paramlock {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ReportFormat { kText, kJson, kCsv };

/// "text", "json" or "csv"; anything else throws UsageError.
ReportFormat parse_report_format(std::string_view token);

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const SweepReport& r);
nlohmann::json to_json(const LatencyReport& r);
nlohmann::json to_json(const AttackCurve& r);
nlohmann::json to_json(const TrainingReport& r);

/// Inverse of to_json(EvalReport); throws std::invalid_argument on a schema
/// mismatch.
EvalReport eval_report_from_json(const nlohmann::json& j);
SweepReport sweep_report_from_json(const nlohmann::json& j);
AttackCurve attack_curve_from_json(const nlohmann::json& j);

void emit_report(const EvalReport& r, ReportFormat format, std::ostream& sink);
void emit_report(const SweepReport& r, ReportFormat format, std::ostream& sink);
void emit_report(const LatencyReport& r, ReportFormat format, std::ostream& sink);
void emit_report(const AttackCurve& r, ReportFormat format, std::ostream& sink);
void emit_report(const TrainingReport& r, ReportFormat format, std::ostream& sink);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace paramlock
