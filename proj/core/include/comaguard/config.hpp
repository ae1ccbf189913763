#pragma once

#include <cstdint>

#include "comaguard/sample.hpp"

namespace comaguard {

/// Local time of day, in seconds after midnight.
struct TimeOfDay {
    std::int32_t seconds = 0;

    static constexpr TimeOfDay hm(int h, int m) noexcept { return TimeOfDay{h * 3600 + m * 60}; }
    friend bool operator==(const TimeOfDay&, const TimeOfDay&) = default;
};

/// Half-open local-time interval [start, end); wraps past midnight when end <= start.
struct DailyWindow {
    TimeOfDay start = TimeOfDay::hm(22, 0);
    TimeOfDay end = TimeOfDay::hm(7, 0);

    bool contains(TimeOfDay t) const noexcept;
    friend bool operator==(const DailyWindow&, const DailyWindow&) = default;
};

/// Every threshold, window and timer of the detector. Durations are whole seconds.
struct DetectionConfig {
    std::int64_t immobility_duration_s = 300;
    std::int64_t hr_absence_timeout_s = 30;
    std::int64_t baseline_window_s = 120;
    std::int64_t hr_trend_window_s = 180;
    double hr_slope_min_bpm_per_min = 3.0;
    double tachycardia_abs_bpm = 100.0;
    double tachycardia_rel_factor = 1.2;
    double moisture_rise_pct = 15.0;
    std::int64_t ack_window_s = 60;
    std::int64_t alarm_cooldown_s = 600;
    std::int64_t activity_window_s = 10;
    double motion_threshold_g = 0.05;
    DailyWindow sleep_window{};
    std::int64_t reminder_interval_s = 1800;
    std::int64_t min_slope_samples = 10;
    std::int64_t min_baseline_samples = 30;
    /// Local time of day at t_ms = 0; maps logical time onto the sleep window.
    TimeOfDay session_start = TimeOfDay::hm(23, 0);

    friend bool operator==(const DetectionConfig&, const DetectionConfig&) = default;
};

/// Throws InvalidConfig naming the first offending field.
void validate(const DetectionConfig& config);

/// Local time of day at logical time t.
TimeOfDay local_time_of_day(const DetectionConfig& config, TimeMs t) noexcept;

}  // namespace comaguard
