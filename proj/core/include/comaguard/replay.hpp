#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "comaguard/detector.hpp"
#include "comaguard/errors.hpp"
#include "comaguard/trace.hpp"

namespace comaguard {

/// Answers escalation attempts. nullopt means "no answer": the attempt closes as Timeout on the
/// logical clock once the per-contact timeout passes.
class Notifier {
public:
    virtual ~Notifier() = default;
    virtual std::optional<AttemptOutcome> notify(const DispatchRequest& request) = 0;
};

/// Scripted stand-in for telephony during offline replay. Answers arrive at the logical time of dispatch.
struct OfflineGateway : Notifier {
    AttemptOutcome default_outcome = AttemptOutcome::Timeout;
    /// Keyed by contact id.
    std::map<std::string, AttemptOutcome> per_contact;

    std::optional<AttemptOutcome> outcome_for(const std::string& contact_id) const;
    std::optional<AttemptOutcome> notify(const DispatchRequest& request) override;
};

/// Everything a pipeline needs besides its inputs.
struct RunConfig {
    DetectionConfig detection{};
    ContactList contacts{};
    EscalationPolicy policy{};
    OfflineGateway gateway{};
};

/// Tick times k * period with prev < k * period < next.
std::vector<TimeMs> ticks_between(TimeMs prev, TimeMs next, TimeMs period_ms);

/// Detector plus the plumbing shared by offline replay and live sessions: tick synthesis between
/// records, ACK routing, and synchronous hand-off of dispatch requests to a notifier.
class Pipeline {
public:
    Pipeline(const RunConfig& config, Notifier& notifier, std::int64_t tick_period_s = 1);

    /// Ticks up to the record, the sample, then an Acknowledge when the record carries ACK.
    std::vector<OutputEvent> feed(const TraceRecord& record);
    /// Acknowledge at `t` (>= last input time).
    std::vector<OutputEvent> acknowledge(TimeMs t);
    /// Aligned ticks in (last record, t], for wall-clock sessions.
    std::vector<OutputEvent> advance_to(TimeMs t);
    std::vector<OutputEvent> apply(const InputEvent& input);

    /// Last logical time seen (record, tick or ack); 0 before any input.
    TimeMs now() const noexcept { return detector_.last_input_ms().value_or(0); }
    std::optional<TimeMs> last_record_ms() const noexcept { return last_record_ms_; }
    std::optional<TimeMs> last_tick_ms() const noexcept { return last_tick_ms_; }

    const Detector& detector() const noexcept { return detector_; }

    /// Observer for every input actually applied (journaling).
    void set_input_observer(std::function<void(const InputEvent&)> observer) { observer_ = std::move(observer); }

private:
    void pump_dispatch(std::vector<OutputEvent>& out);
    void tick_range(TimeMs from_exclusive, TimeMs to, bool inclusive, std::vector<OutputEvent>& out);

    Detector detector_;
    Notifier& notifier_;
    TimeMs tick_period_ms_;
    std::optional<TimeMs> last_record_ms_;
    std::optional<TimeMs> last_tick_ms_;
    std::function<void(const InputEvent&)> observer_;
};

/// Maps logical time onto the wall clock for paced replay.
class Pacer {
public:
    virtual ~Pacer() = default;
    virtual void wait_until(TimeMs logical_ms) = 0;
};

/// Sleeps so that logical time advances `speed` times faster than wall time.
class WallClockPacer : public Pacer {
public:
    explicit WallClockPacer(double speed);
    void wait_until(TimeMs logical_ms) override;

private:
    double speed_;
    std::optional<TimeMs> origin_logical_;
    std::chrono::steady_clock::time_point origin_wall_;
};

struct ReplayOptions {
    /// Logical-to-wall speed multiplier; infinity replays without pacing.
    double speed = std::numeric_limits<double>::infinity();
    std::int64_t tick_period_s = 1;
};

/// Detector error while replaying, with the 1-based trace line (header is line 1).
class ReplayError : public Error {
public:
    ReplayError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Feeds the trace through a fresh pipeline and returns the full event log. The log depends only
/// on logical time, never on `speed`. A custom pacer replaces the wall-clock one.
EventLog replay(const Trace& trace, const RunConfig& config, const ReplayOptions& options = {},
                Pacer* pacer = nullptr);

}  // namespace comaguard
