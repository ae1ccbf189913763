#include "comaguard/detector.hpp"

#include "comaguard/errors.hpp"

namespace comaguard {

Detector::Detector(DetectionConfig config, ContactList contacts, EscalationPolicy policy)
    : config_(config), contacts_(std::move(contacts)), policy_(policy), tracker_(config_) {
    validate(config_);
    validate(policy_);
}

std::optional<DispatchRequest> Detector::take_dispatch() {
    if (dispatch_taken_ || !in_flight_) return std::nullopt;
    dispatch_taken_ = true;
    return in_flight_;
}

std::optional<DispatchRequest> Detector::in_flight() const {
    return in_flight_;
}

bool Detector::in_cooldown(TimeMs t) const noexcept {
    return last_ack_ms_ && t - *last_ack_ms_ < seconds_to_ms(config_.alarm_cooldown_s);
}

void Detector::transition(DetectorState next, TimeMs t, std::vector<OutputEvent>& out) {
    const StateKind from = kind_of(state_);
    state_ = std::move(next);
    out.push_back(event::StateChanged{t, from, kind_of(state_)});
}

void Detector::emit_new_attempts(std::size_t from, std::vector<OutputEvent>& out) {
    const auto& log = run_->attempts();
    for (std::size_t i = from; i < log.size(); ++i) {
        const auto& r = log[i];
        out.push_back(event::ContactAttempt{r.t_ms, r.contact_id, r.channel, r.outcome});
    }
}

void Detector::drive_escalation(TimeMs t, std::vector<OutputEvent>& out) {
    const std::size_t before = run_->attempts().size();
    const bool was_in_flight = run_->attempt_in_flight();
    auto target = run_->next_attempt(t);
    emit_new_attempts(before, out);

    if (target) {
        in_flight_ = DispatchRequest{++dispatch_seq_, target->contact, target->channel, t, alarm_reasons_};
        dispatch_taken_ = false;
        return;
    }
    if (was_in_flight && !run_->attempt_in_flight()) in_flight_.reset();
    if (run_->exhausted()) {
        in_flight_.reset();
        out.push_back(event::EscalationStopped{t, StopCause::Exhausted});
        transition(state::Idle{}, t, out);
    }
}

void Detector::maybe_remind(TimeMs t, std::vector<OutputEvent>& out) {
    if (kind_of(state_) != StateKind::Idle) return;
    if (!config_.sleep_window.contains(local_time_of_day(config_, t))) return;
    if (tracker_.wear(t) != features::WearStatus::NotWorn) return;
    if (last_reminder_ms_ && t - *last_reminder_ms_ < seconds_to_ms(config_.reminder_interval_s)) return;
    last_reminder_ms_ = t;
    out.push_back(event::WearReminder{t});
}

std::vector<OutputEvent> Detector::step(const InputEvent& input) {
    const TimeMs t = timestamp_of(input);
    if (last_input_ms_ && t < *last_input_ms_) throw NonMonotonicInput(*last_input_ms_, t);

    const auto* sample = std::get_if<input::Sample>(&input);
    if (sample) {
        const auto last_sample = tracker_.last_sample_ms();
        if (last_sample && t <= *last_sample) throw NonMonotonicInput(*last_sample, t);
        if (!is_valid(sample->sample)) throw InvalidRecord("sensor values out of range at t_ms=" + std::to_string(t));
    }
    last_input_ms_ = t;

    std::optional<FeatureFrame> frame;
    if (sample) frame = tracker_.push(sample->sample);
    const bool moving = frame && frame->moving;
    const bool ack = std::holds_alternative<input::Acknowledge>(input);

    std::vector<OutputEvent> out;
    switch (kind_of(state_)) {
        case StateKind::Idle:
            if (moving) transition(state::Active{t}, t, out);
            break;

        case StateKind::Active: {
            auto& active = std::get<state::Active>(state_);
            if (moving) {
                active.since_ms = t;
            } else if (t - active.since_ms >= seconds_to_ms(config_.immobility_duration_s)) {
                transition(state::Immobile{t}, t, out);
            }
            break;
        }

        case StateKind::Immobile: {
            const auto entered = std::get<state::Immobile>(state_).entered_at_ms;
            if (moving) {
                transition(state::Active{t}, t, out);
            } else if (tracker_.wear(t) == features::WearStatus::NotWorn) {
                transition(state::Idle{}, t, out);
            } else if (t - entered >= seconds_to_ms(config_.baseline_window_s)) {
                auto baselines = tracker_.baselines_at(t);
                if (baselines.established()) transition(state::Vigil{baselines}, t, out);
            }
            break;
        }

        case StateKind::Vigil: {
            if (moving) {
                transition(state::Active{t}, t, out);
            } else if (tracker_.wear(t) == features::WearStatus::NotWorn) {
                transition(state::Idle{}, t, out);
            } else if (frame) {
                const auto& baselines = std::get<state::Vigil>(state_).baselines;
                const DangerSet danger = features::danger_assessment(*frame, baselines, config_);
                if (!danger.empty() && !in_cooldown(t)) {
                    out.push_back(event::AlarmRaised{t, danger});
                    alarm_reasons_ = danger;
                    transition(state::LocalAlarm{t, danger}, t, out);
                }
            }
            break;
        }

        case StateKind::LocalAlarm:
        case StateKind::Escalating: {
            if (auto* alarm = std::get_if<state::LocalAlarm>(&state_)) {
                if (t - alarm->raised_at_ms >= seconds_to_ms(config_.ack_window_s)) {
                    out.push_back(event::EscalationStarted{t});
                    transition(state::Escalating{t}, t, out);
                    run_.emplace(policy_, contacts_, t);
                } else {
                    if (ack) {
                        last_ack_ms_ = t;
                        out.push_back(event::AlarmAcknowledged{t});
                        transition(state::Active{t}, t, out);
                    }
                    break;
                }
            }

            if (ack) {
                run_->cancel(t);
                in_flight_.reset();
                last_ack_ms_ = t;
                out.push_back(event::EscalationStopped{t, StopCause::Acknowledged});
                transition(state::Active{t}, t, out);
                break;
            }
            if (const auto* result = std::get_if<input::AttemptResult>(&input)) {
                const auto pending = run_->in_flight_target();
                // Late or foreign answers are ignored.
                if (pending && pending->contact.id == result->contact_id) {
                    const std::size_t before = run_->attempts().size();
                    run_->record_outcome(result->contact_id, result->outcome, t);
                    in_flight_.reset();
                    emit_new_attempts(before, out);
                }
            }
            drive_escalation(t, out);
            break;
        }
    }

    maybe_remind(t, out);
    history_.insert(history_.end(), out.begin(), out.end());
    return out;
}

}  // namespace comaguard
