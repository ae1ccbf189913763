#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "comaguard/replay.hpp"

namespace comaguard::oracle {

// Naive recomputation over the full sample history. `history` holds every sample seen so far,
// sorted by time; each call rescans the window from scratch. Window conventions match
// features::FeatureTracker.

FeatureFrame naive_frame(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config);
Baselines naive_baselines(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config);
bool naive_worn(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config);

/// Whole-trace simulation of the detector, the tick schedule and the offline gateway, written without
/// the streaming tracker, the Detector class or EscalationRun.
EventLog naive_event_log(const Trace& trace, const RunConfig& config, std::int64_t tick_period_s = 1);

enum class DivergenceKind { Ordering, Timing, Mismatch, Missing, Extra };

std::string_view to_string(DivergenceKind k) noexcept;

struct Divergence {
    DivergenceKind kind;
    std::size_t index;  // position in the checked log
    std::string detail;
};

struct VerifyResult {
    std::vector<Divergence> divergences;
    bool pass() const noexcept { return divergences.empty(); }
};

/// Structural checks that hold for any log: non-decreasing timestamps, and every ContactAttempt inside an
/// escalation that was started by an alarm.
std::vector<Divergence> check_safety_ordering(const EventLog& log);

/// Structural checks plus event-by-event comparison against naive_event_log. Only the first
/// content divergence is reported, since everything after it is shifted.
VerifyResult verify_events(const Trace& trace, const RunConfig& config, const EventLog& log,
                           std::int64_t tick_period_s = 1);

struct FeatureMismatch {
    TimeMs t_ms;
    std::string field;
    std::string detail;
};

/// Compares the streaming tracker against naive_frame at every sample of the trace.
/// Scalars within `tolerance`; booleans and presence exact.
std::vector<FeatureMismatch> verify_features(const Trace& trace, const DetectionConfig& config,
                                             double tolerance = 1e-9);

}  // namespace comaguard::oracle
