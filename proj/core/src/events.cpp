#include "comaguard/events.hpp"

#include <nlohmann/json.hpp>

#include "comaguard/errors.hpp"

namespace comaguard {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

std::string_view to_string(StateKind s) noexcept {
    switch (s) {
        case StateKind::Idle: return "idle";
        case StateKind::Active: return "active";
        case StateKind::Immobile: return "immobile";
        case StateKind::Vigil: return "vigil";
        case StateKind::LocalAlarm: return "local_alarm";
        case StateKind::Escalating: return "escalating";
    }
    return "idle";
}

std::optional<StateKind> state_kind_from_string(std::string_view s) noexcept {
    for (auto k : {StateKind::Idle, StateKind::Active, StateKind::Immobile, StateKind::Vigil, StateKind::LocalAlarm,
                   StateKind::Escalating}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

StateKind kind_of(const DetectorState& s) noexcept {
    return static_cast<StateKind>(s.index());
}

TimeMs timestamp_of(const InputEvent& e) noexcept {
    return std::visit(overloaded{
                          [](const input::Sample& s) { return s.sample.t_ms; },
                          [](const auto& other) { return other.t_ms; },
                      },
                      e);
}

std::string_view to_string(StopCause c) noexcept {
    return c == StopCause::Acknowledged ? "acknowledged" : "exhausted";
}

TimeMs timestamp_of(const OutputEvent& e) noexcept {
    return std::visit([](const auto& ev) { return ev.t_ms; }, e);
}

std::string_view type_name(const OutputEvent& e) noexcept {
    return std::visit(overloaded{
                          [](const event::StateChanged&) { return std::string_view("state_changed"); },
                          [](const event::AlarmRaised&) { return std::string_view("alarm_raised"); },
                          [](const event::AlarmAcknowledged&) { return std::string_view("alarm_acknowledged"); },
                          [](const event::EscalationStarted&) { return std::string_view("escalation_started"); },
                          [](const event::ContactAttempt&) { return std::string_view("contact_attempt"); },
                          [](const event::EscalationStopped&) { return std::string_view("escalation_stopped"); },
                          [](const event::WearReminder&) { return std::string_view("wear_reminder"); },
                      },
                      e);
}

std::string to_json_line(const OutputEvent& e) {
    nlohmann::ordered_json j;
    j["t_ms"] = timestamp_of(e);
    j["type"] = type_name(e);
    std::visit(overloaded{
                   [&](const event::StateChanged& ev) {
                       j["from"] = to_string(ev.from);
                       j["to"] = to_string(ev.to);
                   },
                   [&](const event::AlarmRaised& ev) {
                       auto reasons = nlohmann::ordered_json::array();
                       for (auto r : ev.reasons.reasons()) reasons.push_back(to_string(r));
                       j["reasons"] = std::move(reasons);
                   },
                   [&](const event::ContactAttempt& ev) {
                       j["contact_id"] = ev.contact_id;
                       j["channel"] = to_string(ev.channel);
                       j["outcome"] = to_string(ev.outcome);
                   },
                   [&](const event::EscalationStopped& ev) { j["cause"] = to_string(ev.cause); },
                   [](const auto&) {},
               },
               e);
    return j.dump();
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string()) throw ParseError(line_no, std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

template <typename T, typename F>
T parse_enum(const nlohmann::json& j, const char* key, std::size_t line_no, F from_string) {
    auto v = from_string(required_string(j, key, line_no));
    if (!v) throw ParseError(line_no, std::string("bad value for '") + key + "'");
    return *v;
}

}  // namespace

OutputEvent event_from_json_line(std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t_ms") || !j["t_ms"].is_number_integer()) {
        throw ParseError(line_no, "missing integer field 't_ms'");
    }
    const TimeMs t = j["t_ms"].get<TimeMs>();
    const std::string type = required_string(j, "type", line_no);

    if (type == "state_changed") {
        return event::StateChanged{t, parse_enum<StateKind>(j, "from", line_no, state_kind_from_string),
                                   parse_enum<StateKind>(j, "to", line_no, state_kind_from_string)};
    }
    if (type == "alarm_raised") {
        if (!j.contains("reasons") || !j["reasons"].is_array()) throw ParseError(line_no, "missing 'reasons'");
        DangerSet reasons;
        for (const auto& r : j["reasons"]) {
            auto v = r.is_string() ? danger_reason_from_string(r.get<std::string>()) : std::nullopt;
            if (!v) throw ParseError(line_no, "bad danger reason");
            reasons.insert(*v);
        }
        return event::AlarmRaised{t, reasons};
    }
    if (type == "alarm_acknowledged") return event::AlarmAcknowledged{t};
    if (type == "escalation_started") return event::EscalationStarted{t};
    if (type == "contact_attempt") {
        return event::ContactAttempt{t, required_string(j, "contact_id", line_no),
                                     parse_enum<Channel>(j, "channel", line_no, channel_from_string),
                                     parse_enum<AttemptOutcome>(j, "outcome", line_no, attempt_outcome_from_string)};
    }
    if (type == "escalation_stopped") {
        const auto cause = required_string(j, "cause", line_no);
        if (cause == "acknowledged") return event::EscalationStopped{t, StopCause::Acknowledged};
        if (cause == "exhausted") return event::EscalationStopped{t, StopCause::Exhausted};
        throw ParseError(line_no, "bad value for 'cause'");
    }
    if (type == "wear_reminder") return event::WearReminder{t};
    throw ParseError(line_no, "unknown event type '" + type + "'");
}

std::string to_json_lines(const EventLog& log) {
    std::string out;
    for (const auto& e : log) {
        out += to_json_line(e);
        out += '\n';
    }
    return out;
}

EventLog event_log_from_json_lines(std::string_view text) {
    EventLog log;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        ++line_no;
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) log.push_back(event_from_json_line(line, line_no));
        pos = nl + 1;
    }
    return log;
}

}  // namespace comaguard
