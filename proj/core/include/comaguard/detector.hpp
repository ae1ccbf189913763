#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "comaguard/config.hpp"
#include "comaguard/escalation.hpp"
#include "comaguard/events.hpp"
#include "comaguard/features.hpp"

namespace comaguard {

/// An escalation attempt the caller has to hand to a notification gateway. Answer it with an
/// input::AttemptResult for the same contact; unanswered attempts close as Timeout on the logical clock.
struct DispatchRequest {
    std::uint64_t seq = 0;
    Contact contact;
    Channel channel = Channel::Call;
    TimeMs started_ms = 0;
    DangerSet reasons;
};

/// Timer-driven detection state machine.
///
///   Idle --moving--> Active --still for immobility_duration--> Immobile --baseline ready--> Vigil
///   Immobile/Vigil --moving--> Active          Immobile/Vigil --no HR for hr_absence_timeout--> Idle
///   Vigil --danger (outside cooldown)--> LocalAlarm --ack--> Active
///   LocalAlarm --ack_window elapsed--> Escalating --ack--> Active, --contacts exhausted--> Idle
///
/// Time only advances through input timestamps; Tick inputs let timers fire between samples.
/// Motion never cancels LocalAlarm or Escalating. Wear reminders are emitted from Idle only.
class Detector {
public:
    /// Throws InvalidConfig.
    Detector(DetectionConfig config, ContactList contacts, EscalationPolicy policy = {});

    /// Applies one input and returns the events it produced (also appended to history()).
    /// Throws NonMonotonicInput if the timestamp regresses (or a sample repeats a sample timestamp),
    /// InvalidRecord for out-of-range sensor values. A throwing step leaves the detector unchanged.
    std::vector<OutputEvent> step(const InputEvent& input);

    const DetectorState& current_state() const noexcept { return state_; }
    StateKind current_kind() const noexcept { return kind_of(state_); }

    /// Attempt started by the last step(s) and not yet handed out; cleared by this call.
    std::optional<DispatchRequest> take_dispatch();
    std::optional<DispatchRequest> in_flight() const;

    const EventLog& history() const noexcept { return history_; }
    const DetectionConfig& config() const noexcept { return config_; }
    const ContactList& contacts() const noexcept { return contacts_; }
    const EscalationPolicy& policy() const noexcept { return policy_; }
    std::optional<TimeMs> last_input_ms() const noexcept { return last_input_ms_; }
    const std::optional<EscalationRun>& escalation() const noexcept { return run_; }

private:
    void transition(DetectorState next, TimeMs t, std::vector<OutputEvent>& out);
    void drive_escalation(TimeMs t, std::vector<OutputEvent>& out);
    void emit_new_attempts(std::size_t from, std::vector<OutputEvent>& out);
    bool in_cooldown(TimeMs t) const noexcept;
    void maybe_remind(TimeMs t, std::vector<OutputEvent>& out);

    DetectionConfig config_;
    ContactList contacts_;
    EscalationPolicy policy_;
    features::FeatureTracker tracker_;

    DetectorState state_ = state::Idle{};
    std::optional<TimeMs> last_input_ms_;
    std::optional<TimeMs> last_ack_ms_;
    std::optional<TimeMs> last_reminder_ms_;
    std::optional<EscalationRun> run_;
    DangerSet alarm_reasons_;
    std::uint64_t dispatch_seq_ = 0;
    std::optional<DispatchRequest> in_flight_;
    bool dispatch_taken_ = true;
    EventLog history_;
};

}  // namespace comaguard
