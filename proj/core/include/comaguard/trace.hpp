#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comaguard/sample.hpp"

namespace comaguard {

enum class TraceAction { Ack };

/// One row of a trace file: a sensor sample, optionally carrying a wearer acknowledgement.
struct TraceRecord {
    TimeMs t_ms = 0;
    double ax_g = 0.0;
    double ay_g = 0.0;
    double az_g = 1.0;
    std::optional<double> hr_bpm;
    std::optional<double> skin_rh;
    std::optional<TraceAction> action;

    SensorSample sample() const { return {t_ms, {ax_g, ay_g, az_g}, hr_bpm, skin_rh}; }
    bool is_ack() const noexcept { return action == TraceAction::Ack; }

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

inline constexpr std::string_view kTraceHeader = "t_ms,ax_g,ay_g,az_g,hr_bpm,skin_rh,action";

/// Finite numbers, t_ms >= 0, hr in (0, 300), rh in [0, 100].
bool is_valid(const TraceRecord& r) noexcept;

/// Parses the CSV trace format. Line numbers in errors are 1-based and count the header.
/// Throws ParseError or NonMonotonicTimestamps.
Trace parse_trace(std::string_view text);
Trace parse_trace(std::istream& in);
Trace read_trace_file(const std::string& path);

/// Serializes with the shortest round-trip representation of every number. Throws InvalidRecord.
std::string write_trace(const Trace& records);
void write_trace_file(const std::string& path, const Trace& records);

/// Formats one data row (no header, no newline). Throws InvalidRecord.
std::string format_trace_row(const TraceRecord& r);

}  // namespace comaguard
