#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comaguard/sample.hpp"

namespace comaguard {

enum class Channel { Call, Message };
enum class ChannelPreference { Call, Message, Both };
enum class AttemptOutcome { Delivered, Failed, Timeout };

std::string_view to_string(Channel c) noexcept;
std::string_view to_string(ChannelPreference c) noexcept;
std::string_view to_string(AttemptOutcome o) noexcept;
std::optional<Channel> channel_from_string(std::string_view s) noexcept;
std::optional<ChannelPreference> channel_preference_from_string(std::string_view s) noexcept;
std::optional<AttemptOutcome> attempt_outcome_from_string(std::string_view s) noexcept;

struct Contact {
    std::string id;
    std::string label;
    std::string number;
    ChannelPreference channel_preference = ChannelPreference::Call;
    bool is_emergency = false;

    friend bool operator==(const Contact&, const Contact&) = default;
};

/// Escalation order. At most one emergency contact, and it is always last: construction moves it
/// behind the relatives while keeping their relative order. Ids are unique, numbers non-empty.
class ContactList {
public:
    ContactList() = default;
    /// Throws InvalidConfig on duplicate ids, empty id/number, or more than one emergency contact.
    explicit ContactList(std::vector<Contact> contacts);

    const std::vector<Contact>& contacts() const noexcept { return contacts_; }
    std::size_t size() const noexcept { return contacts_.size(); }
    bool empty() const noexcept { return contacts_.empty(); }
    const Contact& operator[](std::size_t i) const { return contacts_[i]; }
    const Contact* find(std::string_view id) const noexcept;

    auto begin() const noexcept { return contacts_.begin(); }
    auto end() const noexcept { return contacts_.end(); }

private:
    std::vector<Contact> contacts_;
};

struct EscalationPolicy {
    std::int64_t per_contact_timeout_s = 30;
    std::int64_t max_rounds = 3;

    friend bool operator==(const EscalationPolicy&, const EscalationPolicy&) = default;
};

void validate(const EscalationPolicy& policy);

struct AttemptRecord {
    TimeMs t_ms = 0;
    std::string contact_id;
    Channel channel = Channel::Call;
    AttemptOutcome outcome = AttemptOutcome::Failed;

    friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct AttemptTarget {
    Contact contact;
    Channel channel = Channel::Call;
};

/// Second alarm layer: walks the contact list in order, max_rounds times, one attempt in flight at a time.
///
/// Channel policy: Call first; a contact preferring Both gets one Message after a Failed or Timeout call
/// before the run moves on. Delivered never ends the run, only cancel() does.
class EscalationRun {
public:
    EscalationRun(EscalationPolicy policy, ContactList contacts, TimeMs started_at_ms);

    /// Starts and returns the next attempt when nothing is in flight. An in-flight attempt older than the
    /// per-contact timeout (strictly) is closed as Timeout first. Returns nothing while an attempt is still
    /// pending or once the run is exhausted. Throws Cancelled after cancel().
    std::optional<AttemptTarget> next_attempt(TimeMs now_ms);

    /// Closes the in-flight attempt. Throws NoAttemptInFlight or UnknownContact.
    void record_outcome(std::string_view contact_id, AttemptOutcome outcome, TimeMs t_ms);

    /// Idempotent. Any in-flight attempt is abandoned without a record.
    void cancel(TimeMs t_ms);

    bool cancelled() const noexcept { return cancelled_; }
    bool exhausted() const noexcept;
    bool attempt_in_flight() const noexcept { return in_flight_.has_value(); }
    std::optional<AttemptTarget> in_flight_target() const;
    std::optional<TimeMs> in_flight_since() const;

    /// 1-based round of the current position.
    std::int64_t round() const noexcept { return round_; }
    std::optional<TimeMs> cancelled_at() const noexcept { return cancelled_at_; }
    TimeMs started_at() const noexcept { return started_at_; }
    const std::vector<AttemptRecord>& attempts() const noexcept { return log_; }
    const ContactList& contacts() const noexcept { return contacts_; }
    const EscalationPolicy& policy() const noexcept { return policy_; }

private:
    struct InFlight {
        std::size_t index;
        Channel channel;
        TimeMs started_ms;
    };

    Channel primary_channel(const Contact& c) const noexcept;
    void close_in_flight(AttemptOutcome outcome, TimeMs t_ms);

    EscalationPolicy policy_;
    ContactList contacts_;
    TimeMs started_at_;

    std::size_t index_ = 0;
    std::int64_t round_ = 1;
    bool fallback_pending_ = false;
    std::optional<InFlight> in_flight_;
    std::vector<AttemptRecord> log_;
    bool cancelled_ = false;
    std::optional<TimeMs> cancelled_at_;
};

}  // namespace comaguard
