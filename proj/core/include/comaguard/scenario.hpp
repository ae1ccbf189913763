#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "comaguard/trace.hpp"

namespace comaguard {

enum class ScenarioKind {
    RestfulSleep,
    ExerciseThenRest,
    HypoglycemicComa,
    HyperglycemicComa,
    DeviceRemoved,
    NightmareFalsePositive,
};

std::string_view to_string(ScenarioKind k) noexcept;
std::optional<ScenarioKind> scenario_kind_from_string(std::string_view s) noexcept;

struct NoiseLevels {
    double accel_g = 0.003;
    double hr_bpm = 1.0;
    double rh_pct = 0.3;
};

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::RestfulSleep;
    std::int64_t duration_s = 900;
    std::uint64_t seed = 0;
    NoiseLevels noise{};
    /// Probability that a worn-device sample is missing its heart rate.
    double hr_dropout = 0.0;
};

/// Duration that covers the whole scripted shape of a kind.
std::int64_t default_duration_s(ScenarioKind k) noexcept;

/// Deterministic 1 Hz trace for the scenario, truncated at duration_s. Throws InvalidSpec.
///
/// Shapes (seconds from start, tuned to the default detection config):
///   restful_sleep            60 s activity, then sleep with HR settling to ~60 bpm and brief roll-overs
///   exercise_then_rest       600 s treadmill walking (HR 75 -> ~130), then rest with HR decaying
///   hypoglycemic_coma        60 s activity, stillness, HR 70 -> 120 and RH 40 -> 60 %RH over 240 s from t = 480
///   hyperglycemic_coma       as above with HR 72 -> 124 and flat, dry skin
///   device_removed           watch taken off at t = 400 (no HR, no RH), put back on with activity at t = 700
///   nightmare_false_positive HR surge 64 -> 114 from t = 500, wearer acknowledges at t = 597, then moves
Trace generate_scenario(const ScenarioSpec& spec);

/// Seeded source used by the generator: std::mt19937_64 for bits, 53-bit uniforms, Box-Muller normals.
/// Both steps are spelled out here so traces do not depend on the standard library's distributions.
class ScenarioRng {
public:
    explicit ScenarioRng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();
    double normal(double mean, double stddev);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace comaguard
