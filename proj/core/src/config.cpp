#include "comaguard/config.hpp"

#include <cmath>

#include "comaguard/errors.hpp"

namespace comaguard {

bool DailyWindow::contains(TimeOfDay t) const noexcept {
    if (start.seconds == end.seconds) return false;
    if (start.seconds < end.seconds) return t.seconds >= start.seconds && t.seconds < end.seconds;
    return t.seconds >= start.seconds || t.seconds < end.seconds;
}

TimeOfDay local_time_of_day(const DetectionConfig& config, TimeMs t) noexcept {
    constexpr std::int64_t day = 24 * 3600;
    const std::int64_t s = (config.session_start.seconds + t / 1000) % day;
    return TimeOfDay{static_cast<std::int32_t>(s < 0 ? s + day : s)};
}

namespace {

void require_positive(std::int64_t v, const char* field) {
    if (v <= 0) throw InvalidConfig(field, "must be > 0");
}

void require_finite(double v, const char* field) {
    if (!std::isfinite(v)) throw InvalidConfig(field, "must be finite");
}

void require_time_of_day(TimeOfDay t, const char* field) {
    if (t.seconds < 0 || t.seconds >= 24 * 3600) throw InvalidConfig(field, "must be within one day");
}

}  // namespace

void validate(const DetectionConfig& c) {
    require_positive(c.immobility_duration_s, "immobility_duration_s");
    require_positive(c.hr_absence_timeout_s, "hr_absence_timeout_s");
    require_positive(c.baseline_window_s, "baseline_window_s");
    require_positive(c.hr_trend_window_s, "hr_trend_window_s");
    require_finite(c.hr_slope_min_bpm_per_min, "hr_slope_min_bpm_per_min");
    require_finite(c.tachycardia_abs_bpm, "tachycardia_abs_bpm");
    if (c.tachycardia_abs_bpm <= 0.0) throw InvalidConfig("tachycardia_abs_bpm", "must be > 0");
    require_finite(c.tachycardia_rel_factor, "tachycardia_rel_factor");
    if (c.tachycardia_rel_factor < 1.0) throw InvalidConfig("tachycardia_rel_factor", "must be >= 1");
    require_finite(c.moisture_rise_pct, "moisture_rise_pct");
    if (c.moisture_rise_pct <= 0.0) throw InvalidConfig("moisture_rise_pct", "must be > 0");
    require_positive(c.ack_window_s, "ack_window_s");
    require_positive(c.alarm_cooldown_s, "alarm_cooldown_s");
    require_positive(c.activity_window_s, "activity_window_s");
    require_finite(c.motion_threshold_g, "motion_threshold_g");
    if (c.motion_threshold_g <= 0.0) throw InvalidConfig("motion_threshold_g", "must be > 0");
    require_time_of_day(c.sleep_window.start, "sleep_window.start");
    require_time_of_day(c.sleep_window.end, "sleep_window.end");
    require_positive(c.reminder_interval_s, "reminder_interval_s");
    if (c.min_slope_samples < 2) throw InvalidConfig("min_slope_samples", "must be >= 2");
    require_positive(c.min_baseline_samples, "min_baseline_samples");
    require_time_of_day(c.session_start, "session_start");
}

}  // namespace comaguard
