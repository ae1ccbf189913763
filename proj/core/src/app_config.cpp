#include "comaguard/app_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace comaguard {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& field) {
    if (!j.is_object()) throw InvalidConfig(field, "expected an object");
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& prefix) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw InvalidConfig(prefix + key, "unknown key");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& prefix) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    const std::string field = prefix + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw InvalidConfig(field, "expected a boolean");
        out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw InvalidConfig(field, "expected an integer");
        out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw InvalidConfig(field, "expected a number");
        out = v.get<T>();
    } else {
        if (!v.is_string()) throw InvalidConfig(field, "expected a string");
        out = v.get<std::string>();
    }
}

}  // namespace

TimeOfDay parse_time_of_day(const std::string& text, const std::string& field) {
    int h = -1, m = -1, s = 0;
    char tail = 0;
    const int n = std::sscanf(text.c_str(), "%2d:%2d:%2d%c", &h, &m, &s, &tail);
    if ((n != 2 && n != 3) || h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) {
        throw InvalidConfig(field, "expected HH:MM or HH:MM:SS, got '" + text + "'");
    }
    return TimeOfDay{h * 3600 + m * 60 + s};
}

std::string format_time_of_day(TimeOfDay t) {
    char buf[16];
    const int h = t.seconds / 3600, m = (t.seconds / 60) % 60, s = t.seconds % 60;
    if (s == 0) {
        std::snprintf(buf, sizeof buf, "%02d:%02d", h, m);
    } else {
        std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", h, m, s);
    }
    return buf;
}

void apply_json(DetectionConfig& c, const json& j) {
    require_object(j, "detection");
    reject_unknown(j,
                   {"immobility_duration_s", "hr_absence_timeout_s", "baseline_window_s", "hr_trend_window_s",
                    "hr_slope_min_bpm_per_min", "tachycardia_abs_bpm", "tachycardia_rel_factor", "moisture_rise_pct",
                    "ack_window_s", "alarm_cooldown_s", "activity_window_s", "motion_threshold_g", "sleep_window",
                    "reminder_interval_s", "min_slope_samples", "min_baseline_samples", "session_start"},
                   "");
    read(j, "immobility_duration_s", c.immobility_duration_s, "");
    read(j, "hr_absence_timeout_s", c.hr_absence_timeout_s, "");
    read(j, "baseline_window_s", c.baseline_window_s, "");
    read(j, "hr_trend_window_s", c.hr_trend_window_s, "");
    read(j, "hr_slope_min_bpm_per_min", c.hr_slope_min_bpm_per_min, "");
    read(j, "tachycardia_abs_bpm", c.tachycardia_abs_bpm, "");
    read(j, "tachycardia_rel_factor", c.tachycardia_rel_factor, "");
    read(j, "moisture_rise_pct", c.moisture_rise_pct, "");
    read(j, "ack_window_s", c.ack_window_s, "");
    read(j, "alarm_cooldown_s", c.alarm_cooldown_s, "");
    read(j, "activity_window_s", c.activity_window_s, "");
    read(j, "motion_threshold_g", c.motion_threshold_g, "");
    read(j, "reminder_interval_s", c.reminder_interval_s, "");
    read(j, "min_slope_samples", c.min_slope_samples, "");
    read(j, "min_baseline_samples", c.min_baseline_samples, "");
    if (j.contains("sleep_window")) {
        const auto& w = j.at("sleep_window");
        require_object(w, "sleep_window");
        reject_unknown(w, {"start", "end"}, "sleep_window.");
        std::string start = format_time_of_day(c.sleep_window.start);
        std::string end = format_time_of_day(c.sleep_window.end);
        read(w, "start", start, "sleep_window.");
        read(w, "end", end, "sleep_window.");
        c.sleep_window = {parse_time_of_day(start, "sleep_window.start"), parse_time_of_day(end, "sleep_window.end")};
    }
    if (j.contains("session_start")) {
        std::string s;
        read(j, "session_start", s, "");
        c.session_start = parse_time_of_day(s, "session_start");
    }
}

void apply_json(EscalationPolicy& p, const json& j) {
    require_object(j, "escalation");
    reject_unknown(j, {"per_contact_timeout_s", "max_rounds"}, "escalation.");
    read(j, "per_contact_timeout_s", p.per_contact_timeout_s, "escalation.");
    read(j, "max_rounds", p.max_rounds, "escalation.");
}

void apply_json(OfflineGateway& g, const json& j) {
    require_object(j, "replay_gateway");
    reject_unknown(j, {"default_outcome", "per_contact"}, "replay_gateway.");
    const auto outcome = [](const json& v, const std::string& field) {
        auto o = v.is_string() ? attempt_outcome_from_string(v.get<std::string>()) : std::nullopt;
        if (!o) throw InvalidConfig(field, "expected delivered, failed or timeout");
        return *o;
    };
    if (j.contains("default_outcome")) g.default_outcome = outcome(j.at("default_outcome"), "replay_gateway.default_outcome");
    if (j.contains("per_contact")) {
        const auto& pc = j.at("per_contact");
        require_object(pc, "replay_gateway.per_contact");
        for (const auto& [id, v] : pc.items()) g.per_contact[id] = outcome(v, "replay_gateway.per_contact." + id);
    }
}

void apply_json(ServiceOptions& s, const json& j) {
    require_object(j, "service");
    reject_unknown(j, {"host", "port", "gateway_url", "gateway_timeout_ms", "data_dir", "tick_period_s"}, "service.");
    read(j, "host", s.host, "service.");
    read(j, "port", s.port, "service.");
    read(j, "gateway_url", s.gateway_url, "service.");
    read(j, "gateway_timeout_ms", s.gateway_timeout_ms, "service.");
    read(j, "data_dir", s.data_dir, "service.");
    read(j, "tick_period_s", s.tick_period_s, "service.");
    if (s.port < 0 || s.port > 65535) throw InvalidConfig("service.port", "must be in [0, 65535]");
    if (s.gateway_timeout_ms <= 0) throw InvalidConfig("service.gateway_timeout_ms", "must be > 0");
    if (s.tick_period_s <= 0) throw InvalidConfig("service.tick_period_s", "must be > 0");
}

ContactList contacts_from_json(const json& j) {
    if (!j.is_array()) throw InvalidConfig("contacts", "expected an array");
    std::vector<Contact> out;
    for (const auto& item : j) {
        require_object(item, "contacts");
        reject_unknown(item, {"id", "label", "number", "channel", "emergency"}, "contacts.");
        Contact c;
        read(item, "id", c.id, "contacts.");
        read(item, "label", c.label, "contacts.");
        read(item, "number", c.number, "contacts.");
        read(item, "emergency", c.is_emergency, "contacts.");
        if (item.contains("channel")) {
            std::string ch;
            read(item, "channel", ch, "contacts.");
            auto pref = channel_preference_from_string(ch);
            if (!pref) throw InvalidConfig("contacts.channel", "expected call, message or both");
            c.channel_preference = *pref;
        }
        if (c.label.empty()) c.label = c.id;
        out.push_back(std::move(c));
    }
    return ContactList(std::move(out));
}

AppConfig app_config_from_json(const json& j, AppConfig base) {
    require_object(j, "config");
    reject_unknown(j, {"detection", "escalation", "contacts", "replay_gateway", "service"}, "");
    if (j.contains("detection")) apply_json(base.run.detection, j.at("detection"));
    if (j.contains("escalation")) apply_json(base.run.policy, j.at("escalation"));
    if (j.contains("contacts")) base.run.contacts = contacts_from_json(j.at("contacts"));
    if (j.contains("replay_gateway")) apply_json(base.run.gateway, j.at("replay_gateway"));
    if (j.contains("service")) apply_json(base.service, j.at("service"));
    validate(base.run.detection);
    validate(base.run.policy);
    return base;
}

AppConfig load_app_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return app_config_from_json(j);
}

nlohmann::ordered_json to_json(const DetectionConfig& c) {
    nlohmann::ordered_json j;
    j["immobility_duration_s"] = c.immobility_duration_s;
    j["hr_absence_timeout_s"] = c.hr_absence_timeout_s;
    j["baseline_window_s"] = c.baseline_window_s;
    j["hr_trend_window_s"] = c.hr_trend_window_s;
    j["hr_slope_min_bpm_per_min"] = c.hr_slope_min_bpm_per_min;
    j["tachycardia_abs_bpm"] = c.tachycardia_abs_bpm;
    j["tachycardia_rel_factor"] = c.tachycardia_rel_factor;
    j["moisture_rise_pct"] = c.moisture_rise_pct;
    j["ack_window_s"] = c.ack_window_s;
    j["alarm_cooldown_s"] = c.alarm_cooldown_s;
    j["activity_window_s"] = c.activity_window_s;
    j["motion_threshold_g"] = c.motion_threshold_g;
    j["sleep_window"] = {{"start", format_time_of_day(c.sleep_window.start)},
                         {"end", format_time_of_day(c.sleep_window.end)}};
    j["reminder_interval_s"] = c.reminder_interval_s;
    j["min_slope_samples"] = c.min_slope_samples;
    j["min_baseline_samples"] = c.min_baseline_samples;
    j["session_start"] = format_time_of_day(c.session_start);
    return j;
}

nlohmann::ordered_json to_json(const EscalationPolicy& p) {
    nlohmann::ordered_json j;
    j["per_contact_timeout_s"] = p.per_contact_timeout_s;
    j["max_rounds"] = p.max_rounds;
    return j;
}

nlohmann::ordered_json to_json(const ContactList& contacts) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : contacts) {
        nlohmann::ordered_json j;
        j["id"] = c.id;
        j["label"] = c.label;
        j["number"] = c.number;
        j["channel"] = to_string(c.channel_preference);
        j["emergency"] = c.is_emergency;
        arr.push_back(std::move(j));
    }
    return arr;
}

nlohmann::ordered_json to_json(const OfflineGateway& g) {
    nlohmann::ordered_json j;
    j["default_outcome"] = to_string(g.default_outcome);
    nlohmann::ordered_json pc = nlohmann::ordered_json::object();
    for (const auto& [id, o] : g.per_contact) pc[id] = to_string(o);
    j["per_contact"] = std::move(pc);
    return j;
}

nlohmann::ordered_json to_json(const ServiceOptions& s) {
    nlohmann::ordered_json j;
    j["host"] = s.host;
    j["port"] = s.port;
    j["gateway_url"] = s.gateway_url;
    j["gateway_timeout_ms"] = s.gateway_timeout_ms;
    j["data_dir"] = s.data_dir;
    j["tick_period_s"] = s.tick_period_s;
    return j;
}

nlohmann::ordered_json to_json(const AppConfig& c) {
    nlohmann::ordered_json j;
    j["detection"] = to_json(c.run.detection);
    j["escalation"] = to_json(c.run.policy);
    j["contacts"] = to_json(c.run.contacts);
    j["replay_gateway"] = to_json(c.run.gateway);
    j["service"] = to_json(c.service);
    return j;
}

}  // namespace comaguard
