#include "comaguard/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "comaguard/errors.hpp"

namespace comaguard {

bool is_valid(const SensorSample& s) noexcept {
    if (s.t_ms < 0) return false;
    if (!std::isfinite(s.accel.x) || !std::isfinite(s.accel.y) || !std::isfinite(s.accel.z)) return false;
    if (s.hr_bpm && !(std::isfinite(*s.hr_bpm) && *s.hr_bpm > 0.0 && *s.hr_bpm < 300.0)) return false;
    if (s.skin_rh && !(std::isfinite(*s.skin_rh) && *s.skin_rh >= 0.0 && *s.skin_rh <= 100.0)) return false;
    return true;
}

std::string_view to_string(DangerReason r) noexcept {
    switch (r) {
        case DangerReason::TachycardiaTrend: return "tachycardia_trend";
        case DangerReason::MoistureRise: return "moisture_rise";
    }
    return "unknown";
}

std::optional<DangerReason> danger_reason_from_string(std::string_view s) noexcept {
    if (s == "tachycardia_trend") return DangerReason::TachycardiaTrend;
    if (s == "moisture_rise") return DangerReason::MoistureRise;
    return std::nullopt;
}

std::vector<DangerReason> DangerSet::reasons() const {
    std::vector<DangerReason> out;
    if (contains(DangerReason::TachycardiaTrend)) out.push_back(DangerReason::TachycardiaTrend);
    if (contains(DangerReason::MoistureRise)) out.push_back(DangerReason::MoistureRise);
    return out;
}

}  // namespace comaguard

namespace comaguard::features {

namespace {

// Two-pass population standard deviation.
template <typename Range, typename Proj>
double population_stddev(const Range& values, Proj proj) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values) {
        sum += proj(v);
        ++n;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& v : values) {
        const double d = proj(v) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n));
}

// Centered least-squares slope with time in minutes relative to the first point.
template <typename Range>
double ols_slope_per_minute(const Range& points) {
    const TimeMs t0 = points.begin()->t_ms;
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    for (const auto& p : points) {
        sx += static_cast<double>(p.t_ms - t0) / 60000.0;
        sy += p.bpm_or_value();
        ++n;
    }
    const double xbar = sx / static_cast<double>(n);
    const double ybar = sy / static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& p : points) {
        const double dx = static_cast<double>(p.t_ms - t0) / 60000.0 - xbar;
        sxy += dx * (p.bpm_or_value() - ybar);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct HrView {
    TimeMs t_ms;
    double v;
    double bpm_or_value() const { return v; }
};

}  // namespace

double motion_energy(std::span<const SensorSample> window) {
    if (window.size() < 2) throw WindowTooSmall();
    for (std::size_t i = 1; i < window.size(); ++i) {
        if (window[i].t_ms <= window[i - 1].t_ms) throw InvalidTimestamps();
    }
    return population_stddev(window, [](const SensorSample& s) { return s.accel.norm(); });
}

double hr_slope(std::span<const HrPoint> window, std::size_t min_samples, TimeMs min_span_ms) {
    for (std::size_t i = 1; i < window.size(); ++i) {
        if (window[i].t_ms <= window[i - 1].t_ms) throw InvalidTimestamps();
    }
    const std::size_t required = std::max<std::size_t>(min_samples, 2);
    if (window.size() < required) {
        throw InsufficientData(std::to_string(window.size()) + " heart-rate readings, need " +
                               std::to_string(required));
    }
    const TimeMs span = window.back().t_ms - window.front().t_ms;
    if (span < min_span_ms) {
        throw InsufficientData("readings span " + std::to_string(span) + " ms, need " + std::to_string(min_span_ms));
    }
    std::vector<HrView> view;
    view.reserve(window.size());
    for (const auto& p : window) view.push_back({p.t_ms, p.bpm});
    return ols_slope_per_minute(view);
}

WearStatus wear_status(std::span<const SensorSample> recent, TimeMs now_ms, TimeMs timeout_ms) {
    const bool any = std::any_of(recent.begin(), recent.end(), [&](const SensorSample& s) {
        return s.hr_bpm.has_value() && s.t_ms >= now_ms - timeout_ms && s.t_ms <= now_ms;
    });
    return any ? WearStatus::Worn : WearStatus::NotWorn;
}

DangerSet danger_assessment(const FeatureFrame& frame, const Baselines& baselines, const DetectionConfig& config) {
    if (frame.moving) throw std::logic_error("danger is only assessed on immobile frames");
    if (!baselines.established()) throw BaselineMissing();

    DangerSet out;
    if (frame.hr_slope_bpm_per_min && frame.hr_now) {
        const double floor_bpm =
            std::max(config.tachycardia_abs_bpm, config.tachycardia_rel_factor * *baselines.hr_baseline_bpm);
        if (*frame.hr_slope_bpm_per_min >= config.hr_slope_min_bpm_per_min && *frame.hr_now >= floor_bpm) {
            out.insert(DangerReason::TachycardiaTrend);
        }
    }
    // No humidity sensor (or no humidity baseline) disables the moisture reason.
    if (frame.rh_now && baselines.rh_baseline_pct &&
        *frame.rh_now - *baselines.rh_baseline_pct >= config.moisture_rise_pct) {
        out.insert(DangerReason::MoistureRise);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::logic_error("median of empty sequence");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lower + upper) / 2.0;
}

FeatureTracker::FeatureTracker(const DetectionConfig& config)
    : activity_ms_(seconds_to_ms(config.activity_window_s)),
      trend_ms_(seconds_to_ms(config.hr_trend_window_s)),
      timeout_ms_(seconds_to_ms(config.hr_absence_timeout_s)),
      baseline_ms_(seconds_to_ms(config.baseline_window_s)),
      min_slope_samples_(static_cast<std::size_t>(config.min_slope_samples)),
      min_baseline_samples_(static_cast<std::size_t>(config.min_baseline_samples)),
      motion_threshold_g_(config.motion_threshold_g) {}

void FeatureTracker::evict(std::deque<Point>& q, TimeMs keep_from) const {
    while (!q.empty() && q.front().t_ms < keep_from) q.pop_front();
}

FeatureFrame FeatureTracker::push(const SensorSample& sample) {
    if (last_t_ && sample.t_ms <= *last_t_) throw InvalidTimestamps();
    last_t_ = sample.t_ms;
    const TimeMs t = sample.t_ms;

    magnitudes_.push_back({t, sample.accel.norm()});
    if (sample.hr_bpm) hr_.push_back({t, *sample.hr_bpm});
    if (sample.skin_rh) rh_.push_back({t, *sample.skin_rh});

    // Keep the closed freshness interval as well as the half-open windows.
    evict(magnitudes_, t - activity_ms_ + 1);
    evict(hr_, t - std::max({trend_ms_ - 1, timeout_ms_, baseline_ms_ - 1}));
    evict(rh_, t - std::max(timeout_ms_, baseline_ms_ - 1));

    FeatureFrame frame;
    frame.t_ms = t;
    if (magnitudes_.size() >= 2) {
        frame.motion_energy_g = population_stddev(magnitudes_, [](const Point& p) { return p.value; });
    }
    frame.moving = frame.motion_energy_g > motion_threshold_g_;
    frame.worn = wear(t) == WearStatus::Worn;
    frame.hr_now = hr_now(t);
    frame.rh_now = rh_now(t);

    std::vector<HrView> trend;
    for (const auto& p : hr_) {
        if (p.t_ms > t - trend_ms_) trend.push_back({p.t_ms, p.value});
    }
    const std::size_t required = std::max<std::size_t>(min_slope_samples_, 2);
    if (trend.size() >= required && trend.back().t_ms - trend.front().t_ms >= trend_ms_ / 2) {
        frame.hr_slope_bpm_per_min = ols_slope_per_minute(trend);
    }
    return frame;
}

WearStatus FeatureTracker::wear(TimeMs now) const {
    return hr_now(now) ? WearStatus::Worn : WearStatus::NotWorn;
}

std::optional<double> FeatureTracker::hr_now(TimeMs now) const {
    if (hr_.empty() || hr_.back().t_ms < now - timeout_ms_) return std::nullopt;
    return hr_.back().value;
}

std::optional<double> FeatureTracker::rh_now(TimeMs now) const {
    if (rh_.empty() || rh_.back().t_ms < now - timeout_ms_) return std::nullopt;
    return rh_.back().value;
}

Baselines FeatureTracker::baselines_at(TimeMs now) const {
    const auto collect = [&](const std::deque<Point>& q) {
        std::vector<double> v;
        for (const auto& p : q) {
            if (p.t_ms > now - baseline_ms_ && p.t_ms <= now) v.push_back(p.value);
        }
        return v;
    };
    Baselines b;
    auto hr = collect(hr_);
    if (hr.size() >= min_baseline_samples_ && !hr.empty()) {
        b.hr_baseline_bpm = median(std::move(hr));
        b.established_at_ms = now;
        auto rh = collect(rh_);
        if (rh.size() >= min_baseline_samples_ && !rh.empty()) b.rh_baseline_pct = median(std::move(rh));
    }
    return b;
}

}  // namespace comaguard::features
