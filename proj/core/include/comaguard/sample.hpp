#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>
#include <vector>

namespace comaguard {

/// Milliseconds since session start. All time in the library is logical time of this kind.
using TimeMs = std::int64_t;

constexpr TimeMs seconds_to_ms(std::int64_t s) noexcept { return s * 1000; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// One timestamped wearable reading. Acceleration is in g; heart rate and skin humidity are
/// optional because the sensors drop out (and humidity hardware is not present on every watch).
struct SensorSample {
    TimeMs t_ms = 0;
    Vec3 accel{0.0, 0.0, 1.0};
    std::optional<double> hr_bpm;
    std::optional<double> skin_rh;

    friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

/// hr in (0, 300), rh in [0, 100], everything finite.
bool is_valid(const SensorSample& s) noexcept;

enum class DangerReason : std::uint8_t { TachycardiaTrend = 1, MoistureRise = 2 };

std::string_view to_string(DangerReason r) noexcept;
std::optional<DangerReason> danger_reason_from_string(std::string_view s) noexcept;

class DangerSet {
public:
    DangerSet() = default;
    DangerSet(std::initializer_list<DangerReason> reasons) {
        for (auto r : reasons) insert(r);
    }

    void insert(DangerReason r) noexcept { bits_ |= static_cast<std::uint8_t>(r); }
    bool contains(DangerReason r) const noexcept { return (bits_ & static_cast<std::uint8_t>(r)) != 0; }
    bool empty() const noexcept { return bits_ == 0; }
    std::size_t size() const noexcept { return (bits_ & 1u) + ((bits_ >> 1) & 1u); }

    /// Canonical order: TachycardiaTrend, MoistureRise.
    std::vector<DangerReason> reasons() const;

    friend bool operator==(const DangerSet&, const DangerSet&) = default;

private:
    std::uint8_t bits_ = 0;
};

struct FeatureFrame {
    TimeMs t_ms = 0;
    double motion_energy_g = 0.0;
    bool moving = false;
    std::optional<double> hr_now;
    std::optional<double> hr_slope_bpm_per_min;
    bool worn = false;
    std::optional<double> rh_now;
};

struct Baselines {
    std::optional<double> hr_baseline_bpm;
    std::optional<double> rh_baseline_pct;
    std::optional<TimeMs> established_at_ms;

    bool established() const noexcept { return hr_baseline_bpm.has_value(); }

    friend bool operator==(const Baselines&, const Baselines&) = default;
};

}  // namespace comaguard
