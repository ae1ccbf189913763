#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "comaguard/escalation.hpp"
#include "comaguard/sample.hpp"

namespace comaguard {

enum class StateKind { Idle, Active, Immobile, Vigil, LocalAlarm, Escalating };

std::string_view to_string(StateKind s) noexcept;
std::optional<StateKind> state_kind_from_string(std::string_view s) noexcept;

namespace state {
struct Idle {
    friend bool operator==(const Idle&, const Idle&) = default;
};
struct Active {
    TimeMs since_ms = 0;
    friend bool operator==(const Active&, const Active&) = default;
};
struct Immobile {
    TimeMs entered_at_ms = 0;
    friend bool operator==(const Immobile&, const Immobile&) = default;
};
struct Vigil {
    Baselines baselines;
    friend bool operator==(const Vigil&, const Vigil&) = default;
};
struct LocalAlarm {
    TimeMs raised_at_ms = 0;
    DangerSet reasons;
    friend bool operator==(const LocalAlarm&, const LocalAlarm&) = default;
};
struct Escalating {
    TimeMs started_at_ms = 0;
    friend bool operator==(const Escalating&, const Escalating&) = default;
};
}  // namespace state

using DetectorState =
    std::variant<state::Idle, state::Active, state::Immobile, state::Vigil, state::LocalAlarm, state::Escalating>;

StateKind kind_of(const DetectorState& s) noexcept;

// ---- inputs ---------------------------------------------------------------

namespace input {
struct Sample {
    SensorSample sample;
};
struct Acknowledge {
    TimeMs t_ms = 0;
};
struct Tick {
    TimeMs t_ms = 0;
};
/// Gateway answer for the in-flight escalation attempt.
struct AttemptResult {
    TimeMs t_ms = 0;
    std::string contact_id;
    AttemptOutcome outcome = AttemptOutcome::Failed;
};
}  // namespace input

using InputEvent = std::variant<input::Sample, input::Acknowledge, input::Tick, input::AttemptResult>;

TimeMs timestamp_of(const InputEvent& e) noexcept;

// ---- outputs --------------------------------------------------------------

enum class StopCause { Acknowledged, Exhausted };

std::string_view to_string(StopCause c) noexcept;

namespace event {
struct StateChanged {
    TimeMs t_ms = 0;
    StateKind from = StateKind::Idle;
    StateKind to = StateKind::Idle;
    friend bool operator==(const StateChanged&, const StateChanged&) = default;
};
struct AlarmRaised {
    TimeMs t_ms = 0;
    DangerSet reasons;
    friend bool operator==(const AlarmRaised&, const AlarmRaised&) = default;
};
struct AlarmAcknowledged {
    TimeMs t_ms = 0;
    friend bool operator==(const AlarmAcknowledged&, const AlarmAcknowledged&) = default;
};
struct EscalationStarted {
    TimeMs t_ms = 0;
    friend bool operator==(const EscalationStarted&, const EscalationStarted&) = default;
};
struct ContactAttempt {
    TimeMs t_ms = 0;
    std::string contact_id;
    Channel channel = Channel::Call;
    AttemptOutcome outcome = AttemptOutcome::Failed;
    friend bool operator==(const ContactAttempt&, const ContactAttempt&) = default;
};
struct EscalationStopped {
    TimeMs t_ms = 0;
    StopCause cause = StopCause::Exhausted;
    friend bool operator==(const EscalationStopped&, const EscalationStopped&) = default;
};
struct WearReminder {
    TimeMs t_ms = 0;
    friend bool operator==(const WearReminder&, const WearReminder&) = default;
};
}  // namespace event

using OutputEvent = std::variant<event::StateChanged, event::AlarmRaised, event::AlarmAcknowledged,
                                 event::EscalationStarted, event::ContactAttempt, event::EscalationStopped,
                                 event::WearReminder>;

using EventLog = std::vector<OutputEvent>;

TimeMs timestamp_of(const OutputEvent& e) noexcept;
std::string_view type_name(const OutputEvent& e) noexcept;

/// One JSON object, keys in fixed order: t_ms, type, then the type-specific fields. No trailing newline.
std::string to_json_line(const OutputEvent& e);
/// Throws ParseError(line_no) on malformed input.
OutputEvent event_from_json_line(std::string_view line, std::size_t line_no = 0);

/// JSON Lines, LF-terminated.
std::string to_json_lines(const EventLog& log);
EventLog event_log_from_json_lines(std::string_view text);

}  // namespace comaguard
