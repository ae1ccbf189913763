#include "comaguard/replay.hpp"

#include <cmath>
#include <thread>

namespace comaguard {

std::optional<AttemptOutcome> OfflineGateway::outcome_for(const std::string& contact_id) const {
    const auto it = per_contact.find(contact_id);
    const AttemptOutcome outcome = it == per_contact.end() ? default_outcome : it->second;
    if (outcome == AttemptOutcome::Timeout) return std::nullopt;
    return outcome;
}

std::optional<AttemptOutcome> OfflineGateway::notify(const DispatchRequest& request) {
    return outcome_for(request.contact.id);
}

std::vector<TimeMs> ticks_between(TimeMs prev, TimeMs next, TimeMs period_ms) {
    std::vector<TimeMs> out;
    if (period_ms <= 0 || next <= prev) return out;
    for (TimeMs k = prev / period_ms + 1; k * period_ms < next; ++k) out.push_back(k * period_ms);
    return out;
}

Pipeline::Pipeline(const RunConfig& config, Notifier& notifier, std::int64_t tick_period_s)
    : detector_(config.detection, config.contacts, config.policy),
      notifier_(notifier),
      tick_period_ms_(seconds_to_ms(tick_period_s)) {
    if (tick_period_s <= 0) throw InvalidConfig("tick_period_s", "must be > 0");
}

std::vector<OutputEvent> Pipeline::apply(const InputEvent& input) {
    auto out = detector_.step(input);
    if (const auto* s = std::get_if<input::Sample>(&input)) last_record_ms_ = s->sample.t_ms;
    if (const auto* t = std::get_if<input::Tick>(&input)) last_tick_ms_ = t->t_ms;
    if (observer_) observer_(input);
    pump_dispatch(out);
    return out;
}

void Pipeline::pump_dispatch(std::vector<OutputEvent>& out) {
    while (auto request = detector_.take_dispatch()) {
        const auto outcome = notifier_.notify(*request);
        if (!outcome) return;
        const InputEvent answer = input::AttemptResult{now(), request->contact.id, *outcome};
        auto more = detector_.step(answer);
        if (observer_) observer_(answer);
        out.insert(out.end(), more.begin(), more.end());
    }
}

void Pipeline::tick_range(TimeMs from_exclusive, TimeMs to, bool inclusive, std::vector<OutputEvent>& out) {
    auto ticks = ticks_between(from_exclusive, inclusive ? to + 1 : to, tick_period_ms_);
    for (TimeMs t : ticks) {
        auto ev = apply(input::Tick{t});
        out.insert(out.end(), ev.begin(), ev.end());
    }
}

std::vector<OutputEvent> Pipeline::feed(const TraceRecord& record) {
    // Validate before ticking so a rejected record leaves the pipeline untouched.
    if (last_record_ms_ && record.t_ms <= *last_record_ms_) throw NonMonotonicInput(*last_record_ms_, record.t_ms);
    const auto last = detector_.last_input_ms();
    if (last && record.t_ms < *last) throw NonMonotonicInput(*last, record.t_ms);
    if (!is_valid(record)) throw InvalidRecord("sensor values out of range at t_ms=" + std::to_string(record.t_ms));

    std::vector<OutputEvent> out;
    if (last_record_ms_) tick_range(now(), record.t_ms, false, out);
    auto ev = apply(input::Sample{record.sample()});
    out.insert(out.end(), ev.begin(), ev.end());
    if (record.is_ack()) {
        auto ack = apply(input::Acknowledge{record.t_ms});
        out.insert(out.end(), ack.begin(), ack.end());
    }
    return out;
}

std::vector<OutputEvent> Pipeline::acknowledge(TimeMs t) {
    return apply(input::Acknowledge{t});
}

std::vector<OutputEvent> Pipeline::advance_to(TimeMs t) {
    std::vector<OutputEvent> out;
    if (last_record_ms_ && t > now()) tick_range(now(), t, true, out);
    return out;
}

WallClockPacer::WallClockPacer(double speed) : speed_(speed) {
    if (!(speed > 0.0)) throw InvalidConfig("speed", "must be > 0");
}

void WallClockPacer::wait_until(TimeMs logical_ms) {
    if (std::isinf(speed_)) return;
    if (!origin_logical_) {
        origin_logical_ = logical_ms;
        origin_wall_ = std::chrono::steady_clock::now();
        return;
    }
    const double wall_ms = static_cast<double>(logical_ms - *origin_logical_) / speed_;
    std::this_thread::sleep_until(origin_wall_ + std::chrono::microseconds(static_cast<std::int64_t>(wall_ms * 1000.0)));
}

EventLog replay(const Trace& trace, const RunConfig& config, const ReplayOptions& options, Pacer* pacer) {
    if (!(options.speed > 0.0)) throw InvalidConfig("speed", "must be > 0");
    OfflineGateway gateway = config.gateway;
    Pipeline pipeline(config, gateway, options.tick_period_s);
    WallClockPacer wall(options.speed);
    Pacer& pace = pacer ? *pacer : wall;

    EventLog log;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        pace.wait_until(trace[i].t_ms);
        try {
            auto ev = pipeline.feed(trace[i]);
            log.insert(log.end(), ev.begin(), ev.end());
        } catch (const Error& e) {
            throw ReplayError(i + 2, e.what());
        }
    }
    return log;
}

}  // namespace comaguard
