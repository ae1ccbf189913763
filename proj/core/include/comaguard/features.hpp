#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "comaguard/config.hpp"
#include "comaguard/sample.hpp"

namespace comaguard::features {

struct HrPoint {
    TimeMs t_ms = 0;
    double bpm = 0.0;
};

enum class WearStatus { Worn, NotWorn };

/// Population standard deviation of |accel| over the window, in g.
/// Throws WindowTooSmall (< 2 samples) or InvalidTimestamps (not strictly increasing).
double motion_energy(std::span<const SensorSample> window);

/// Ordinary least-squares slope of heart rate against time, in bpm per minute.
/// Requires at least `min_samples` points spanning at least `min_span_ms`; throws InsufficientData otherwise.
double hr_slope(std::span<const HrPoint> window, std::size_t min_samples, TimeMs min_span_ms);

/// NotWorn iff no sample carrying a heart rate lies in [now_ms - timeout_ms, now_ms].
WearStatus wear_status(std::span<const SensorSample> recent, TimeMs now_ms, TimeMs timeout_ms);

/// Danger reasons for an immobile frame against established baselines (OR across reasons).
/// Throws BaselineMissing when no heart-rate baseline exists; a moving frame is a caller bug (std::logic_error).
DangerSet danger_assessment(const FeatureFrame& frame, const Baselines& baselines, const DetectionConfig& config);

/// Median; mean of the two middle values for even counts. Empty input is a caller bug.
double median(std::vector<double> values);

/// Incremental window bookkeeping for the detector.
///
/// Window conventions (shared with the offline verifier):
///   activity window   (t - activity_window, t]       motion energy, 0 when fewer than 2 samples
///   HR trend window   (t - hr_trend_window, t]       slope needs min_slope_samples over >= half the window
///   wear / freshness  [t - hr_absence_timeout, t]    newest HR / RH reading inside counts as "now"
///   baseline window   (t - baseline_window, t]       medians need min_baseline_samples readings
class FeatureTracker {
public:
    explicit FeatureTracker(const DetectionConfig& config);

    /// Appends a sample and returns the frame at its timestamp. Throws InvalidTimestamps on regression.
    FeatureFrame push(const SensorSample& sample);

    WearStatus wear(TimeMs now) const;
    std::optional<double> hr_now(TimeMs now) const;
    std::optional<double> rh_now(TimeMs now) const;

    /// Medians over the baseline window ending at `now`; hr_baseline absent when too few readings.
    Baselines baselines_at(TimeMs now) const;

    std::optional<TimeMs> last_sample_ms() const noexcept { return last_t_; }

private:
    struct Point {
        TimeMs t_ms;
        double value;
    };

    void evict(std::deque<Point>& q, TimeMs keep_from) const;

    TimeMs activity_ms_;
    TimeMs trend_ms_;
    TimeMs timeout_ms_;
    TimeMs baseline_ms_;
    std::size_t min_slope_samples_;
    std::size_t min_baseline_samples_;
    double motion_threshold_g_;

    std::deque<Point> magnitudes_;
    std::deque<Point> hr_;
    std::deque<Point> rh_;
    std::optional<TimeMs> last_t_;
};

}  // namespace comaguard::features
