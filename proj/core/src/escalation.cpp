#include "comaguard/escalation.hpp"

#include <algorithm>
#include <set>

#include "comaguard/errors.hpp"

namespace comaguard {

std::string_view to_string(Channel c) noexcept {
    return c == Channel::Call ? "call" : "message";
}

std::string_view to_string(ChannelPreference c) noexcept {
    switch (c) {
        case ChannelPreference::Call: return "call";
        case ChannelPreference::Message: return "message";
        case ChannelPreference::Both: return "both";
    }
    return "call";
}

std::string_view to_string(AttemptOutcome o) noexcept {
    switch (o) {
        case AttemptOutcome::Delivered: return "delivered";
        case AttemptOutcome::Failed: return "failed";
        case AttemptOutcome::Timeout: return "timeout";
    }
    return "failed";
}

std::optional<Channel> channel_from_string(std::string_view s) noexcept {
    if (s == "call") return Channel::Call;
    if (s == "message") return Channel::Message;
    return std::nullopt;
}

std::optional<ChannelPreference> channel_preference_from_string(std::string_view s) noexcept {
    if (s == "call") return ChannelPreference::Call;
    if (s == "message") return ChannelPreference::Message;
    if (s == "both") return ChannelPreference::Both;
    return std::nullopt;
}

std::optional<AttemptOutcome> attempt_outcome_from_string(std::string_view s) noexcept {
    if (s == "delivered") return AttemptOutcome::Delivered;
    if (s == "failed") return AttemptOutcome::Failed;
    if (s == "timeout") return AttemptOutcome::Timeout;
    return std::nullopt;
}

ContactList::ContactList(std::vector<Contact> contacts) {
    std::set<std::string> ids;
    std::size_t emergencies = 0;
    for (const auto& c : contacts) {
        if (c.id.empty()) throw InvalidConfig("contacts.id", "must not be empty");
        if (c.number.empty()) throw InvalidConfig("contacts.number", "contact '" + c.id + "' has no number");
        if (!ids.insert(c.id).second) throw InvalidConfig("contacts.id", "duplicate id '" + c.id + "'");
        if (c.is_emergency) ++emergencies;
    }
    if (emergencies > 1) throw InvalidConfig("contacts.is_emergency", "at most one emergency contact");
    std::stable_partition(contacts.begin(), contacts.end(), [](const Contact& c) { return !c.is_emergency; });
    contacts_ = std::move(contacts);
}

const Contact* ContactList::find(std::string_view id) const noexcept {
    auto it = std::find_if(contacts_.begin(), contacts_.end(), [&](const Contact& c) { return c.id == id; });
    return it == contacts_.end() ? nullptr : &*it;
}

void validate(const EscalationPolicy& policy) {
    if (policy.per_contact_timeout_s < 1) throw InvalidConfig("per_contact_timeout_s", "must be >= 1");
    if (policy.max_rounds < 1) throw InvalidConfig("max_rounds", "must be >= 1");
}

EscalationRun::EscalationRun(EscalationPolicy policy, ContactList contacts, TimeMs started_at_ms)
    : policy_(policy), contacts_(std::move(contacts)), started_at_(started_at_ms) {}

bool EscalationRun::exhausted() const noexcept {
    return !in_flight_ && (contacts_.empty() || round_ > policy_.max_rounds);
}

Channel EscalationRun::primary_channel(const Contact& c) const noexcept {
    return c.channel_preference == ChannelPreference::Message ? Channel::Message : Channel::Call;
}

std::optional<AttemptTarget> EscalationRun::in_flight_target() const {
    if (!in_flight_) return std::nullopt;
    return AttemptTarget{contacts_[in_flight_->index], in_flight_->channel};
}

std::optional<TimeMs> EscalationRun::in_flight_since() const {
    if (!in_flight_) return std::nullopt;
    return in_flight_->started_ms;
}

void EscalationRun::close_in_flight(AttemptOutcome outcome, TimeMs t_ms) {
    const InFlight done = *in_flight_;
    in_flight_.reset();
    const Contact& contact = contacts_[done.index];
    log_.push_back({t_ms, contact.id, done.channel, outcome});

    if (contact.channel_preference == ChannelPreference::Both && done.channel == Channel::Call &&
        outcome != AttemptOutcome::Delivered) {
        fallback_pending_ = true;
        return;
    }
    fallback_pending_ = false;
    if (++index_ == contacts_.size()) {
        index_ = 0;
        ++round_;
    }
}

std::optional<AttemptTarget> EscalationRun::next_attempt(TimeMs now_ms) {
    if (cancelled_) throw Cancelled();
    if (in_flight_) {
        if (now_ms - in_flight_->started_ms <= seconds_to_ms(policy_.per_contact_timeout_s)) return std::nullopt;
        close_in_flight(AttemptOutcome::Timeout, now_ms);
    }
    if (exhausted()) return std::nullopt;

    const Contact& contact = contacts_[index_];
    const Channel channel = fallback_pending_ ? Channel::Message : primary_channel(contact);
    in_flight_ = InFlight{index_, channel, now_ms};
    return AttemptTarget{contact, channel};
}

void EscalationRun::record_outcome(std::string_view contact_id, AttemptOutcome outcome, TimeMs t_ms) {
    if (!in_flight_) throw NoAttemptInFlight();
    if (contacts_[in_flight_->index].id != contact_id) throw UnknownContact(std::string(contact_id));
    close_in_flight(outcome, t_ms);
}

void EscalationRun::cancel(TimeMs t_ms) {
    if (cancelled_) return;
    cancelled_ = true;
    cancelled_at_ = t_ms;
    in_flight_.reset();
}

}  // namespace comaguard
