#include "comaguard/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "comaguard/errors.hpp"

namespace comaguard {

std::string_view to_string(ScenarioKind k) noexcept {
    switch (k) {
        case ScenarioKind::RestfulSleep: return "restful_sleep";
        case ScenarioKind::ExerciseThenRest: return "exercise_then_rest";
        case ScenarioKind::HypoglycemicComa: return "hypoglycemic_coma";
        case ScenarioKind::HyperglycemicComa: return "hyperglycemic_coma";
        case ScenarioKind::DeviceRemoved: return "device_removed";
        case ScenarioKind::NightmareFalsePositive: return "nightmare_false_positive";
    }
    return "restful_sleep";
}

std::optional<ScenarioKind> scenario_kind_from_string(std::string_view s) noexcept {
    for (auto k : {ScenarioKind::RestfulSleep, ScenarioKind::ExerciseThenRest, ScenarioKind::HypoglycemicComa,
                   ScenarioKind::HyperglycemicComa, ScenarioKind::DeviceRemoved,
                   ScenarioKind::NightmareFalsePositive}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::int64_t default_duration_s(ScenarioKind k) noexcept {
    switch (k) {
        case ScenarioKind::RestfulSleep: return 3600;
        case ScenarioKind::ExerciseThenRest: return 1800;
        case ScenarioKind::HypoglycemicComa: return 900;
        case ScenarioKind::HyperglycemicComa: return 900;
        case ScenarioKind::DeviceRemoved: return 1000;
        case ScenarioKind::NightmareFalsePositive: return 1200;
    }
    return 900;
}

ScenarioRng::ScenarioRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t ScenarioRng::next_u64() {
    return engine_();
}

double ScenarioRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double ScenarioRng::normal(double mean, double stddev) {
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return mean + stddev * z;
    }
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return mean + stddev * r * std::cos(theta);
}

namespace {

/// Noise-free description of one second of a scenario.
struct Moment {
    bool active = false;
    bool on_table = false;
    std::optional<double> hr;
    std::optional<double> rh;
    bool ack = false;
};

double ramp(double t, double start, double length, double from, double to) {
    const double f = std::clamp((t - start) / length, 0.0, 1.0);
    return from + (to - from) * f;
}

double settle(double t, double start, double from, double to, double tau) {
    if (t <= start) return from;
    return to + (from - to) * std::exp(-(t - start) / tau);
}

constexpr double kActivityEnd = 60.0;

Moment restful_sleep(double t) {
    Moment m;
    m.active = t < kActivityEnd;
    // Roll-overs in bed.
    if (std::fmod(t, 1500.0) >= 1494.0) m.active = true;
    m.hr = m.active && t < kActivityEnd ? 88.0
                                         : settle(t, kActivityEnd, 88.0, 60.0, 60.0) +
                                               2.0 * std::sin(2.0 * std::numbers::pi * t / 900.0);
    m.rh = 38.0 + std::sin(2.0 * std::numbers::pi * t / 1200.0);
    return m;
}

Moment exercise_then_rest(double t) {
    constexpr double end = 600.0;
    Moment m;
    m.active = t < end;
    const double peak = 75.0 + 55.0 * (1.0 - std::exp(-end / 120.0));
    m.hr = t < end ? 75.0 + 55.0 * (1.0 - std::exp(-t / 120.0)) : settle(t, end, peak, 70.0, 90.0);
    m.rh = t < end ? ramp(t, 0.0, end, 40.0, 48.0) : settle(t, end, 48.0, 42.0, 300.0);
    return m;
}

Moment coma(double t, double hr_rest, double hr_peak, double rh_rest, double rh_peak) {
    constexpr double ramp_start = kActivityEnd + 300.0 + 120.0;
    constexpr double ramp_len = 240.0;
    Moment m;
    m.active = t < kActivityEnd;
    m.hr = t < kActivityEnd ? hr_rest + 8.0
                            : settle(t, kActivityEnd, hr_rest + 8.0, hr_rest, 20.0) +
                                  ramp(t, ramp_start, ramp_len, 0.0, hr_peak - hr_rest);
    m.rh = ramp(t, ramp_start, ramp_len, rh_rest, rh_peak);
    return m;
}

Moment device_removed(double t) {
    constexpr double removed = 400.0;
    constexpr double back_on = 700.0;
    constexpr double burst_end = 760.0;
    Moment m;
    if (t >= removed && t < back_on) {
        m.on_table = true;
        return m;
    }
    m.active = t < kActivityEnd || (t >= back_on && t < burst_end);
    if (t < kActivityEnd) {
        m.hr = 76.0;
    } else if (t < removed) {
        m.hr = settle(t, kActivityEnd, 76.0, 68.0, 20.0);
    } else if (t < burst_end) {
        m.hr = 80.0;
    } else {
        m.hr = settle(t, burst_end, 80.0, 70.0, 30.0);
    }
    m.rh = 40.0;
    return m;
}

Moment nightmare(double t) {
    constexpr double surge = 500.0;
    constexpr double rate_per_s = 0.5;
    constexpr double ack_at = surge + (100.0 - 64.0) / rate_per_s + 25.0;
    constexpr double awake_end = 640.0;
    Moment m;
    m.active = t < kActivityEnd || (t >= 600.0 && t < awake_end);
    if (t < kActivityEnd) {
        m.hr = 72.0;
    } else if (t < 600.0) {
        m.hr = settle(t, kActivityEnd, 72.0, 64.0, 20.0) + ramp(t, surge, 100.0, 0.0, 50.0);
    } else {
        m.hr = settle(t, 600.0, 114.0, 68.0, 60.0);
    }
    m.rh = t < 600.0 ? ramp(t, surge, 100.0, 40.0, 45.0) : settle(t, 600.0, 45.0, 40.0, 120.0);
    m.ack = t == ack_at;
    return m;
}

Moment moment_at(ScenarioKind kind, double t) {
    switch (kind) {
        case ScenarioKind::RestfulSleep: return restful_sleep(t);
        case ScenarioKind::ExerciseThenRest: return exercise_then_rest(t);
        case ScenarioKind::HypoglycemicComa: return coma(t, 70.0, 120.0, 40.0, 60.0);
        case ScenarioKind::HyperglycemicComa: return coma(t, 72.0, 124.0, 36.0, 36.0);
        case ScenarioKind::DeviceRemoved: return device_removed(t);
        case ScenarioKind::NightmareFalsePositive: return nightmare(t);
    }
    return {};
}

// Division by a power of ten keeps the printed value short (0.06, not 0.060000000000000005).
double round_to(double v, double scale) {
    return std::round(v * scale) / scale;
}

}  // namespace

Trace generate_scenario(const ScenarioSpec& spec) {
    if (spec.duration_s <= 0) throw InvalidSpec("duration_s must be > 0");
    if (!(spec.noise.accel_g >= 0.0) || !(spec.noise.hr_bpm >= 0.0) || !(spec.noise.rh_pct >= 0.0)) {
        throw InvalidSpec("noise levels must be >= 0");
    }
    if (!(spec.hr_dropout >= 0.0 && spec.hr_dropout <= 1.0)) throw InvalidSpec("hr_dropout must be in [0, 1]");

    ScenarioRng rng(spec.seed);
    // Resting wrist orientation, unit length.
    const double ox = 0.06, oy = -0.12;
    const double oz = std::sqrt(1.0 - ox * ox - oy * oy);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();

    Trace trace;
    trace.reserve(static_cast<std::size_t>(spec.duration_s));
    for (std::int64_t i = 0; i < spec.duration_s; ++i) {
        const double t = static_cast<double>(i);
        const Moment m = moment_at(spec.kind, t);

        TraceRecord r;
        r.t_ms = i * 1000;
        if (m.on_table) {
            r.ax_g = round_to(rng.normal(0.0, spec.noise.accel_g / 3.0), 1e4);
            r.ay_g = round_to(rng.normal(0.0, spec.noise.accel_g / 3.0), 1e4);
            r.az_g = round_to(rng.normal(1.0, spec.noise.accel_g / 3.0), 1e4);
        } else {
            const double magnitude =
                m.active ? 1.0 + 0.35 * std::sin(2.0 * std::numbers::pi * 0.9 * t + phase) + rng.normal(0.0, 0.05)
                         : 1.0;
            const double sigma = m.active ? 0.05 : spec.noise.accel_g;
            r.ax_g = round_to(ox * magnitude + rng.normal(0.0, sigma), 1e4);
            r.ay_g = round_to(oy * magnitude + rng.normal(0.0, sigma), 1e4);
            r.az_g = round_to(oz * magnitude + rng.normal(0.0, sigma), 1e4);
        }
        // Draw every stream unconditionally so one channel's dropout does not shift the others.
        const double hr_noise = rng.normal(0.0, spec.noise.hr_bpm);
        const double rh_noise = rng.normal(0.0, spec.noise.rh_pct);
        const bool dropped = rng.uniform() < spec.hr_dropout;
        if (m.hr && !dropped) r.hr_bpm = round_to(std::clamp(*m.hr + hr_noise, 30.0, 250.0), 10.0);
        if (m.rh) r.skin_rh = round_to(std::clamp(*m.rh + rh_noise, 0.0, 100.0), 10.0);
        if (m.ack) r.action = TraceAction::Ack;
        trace.push_back(r);
    }
    return trace;
}

}  // namespace comaguard
