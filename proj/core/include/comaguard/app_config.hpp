#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "comaguard/replay.hpp"

namespace comaguard {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string gateway_url = "http://127.0.0.1:9090";
    /// Wall-clock bound on one gateway request. No answer in time means no outcome is injected;
    /// the attempt then times out on the session's logical clock.
    std::int64_t gateway_timeout_ms = 2000;
    std::string data_dir = "sessions";
    std::int64_t tick_period_s = 1;

    friend bool operator==(const ServiceOptions&, const ServiceOptions&) = default;
};

struct AppConfig {
    RunConfig run{};
    ServiceOptions service{};
};

// Each apply_* overrides only the keys present in `j`; unknown keys and wrong types throw InvalidConfig
// naming the field.
void apply_json(DetectionConfig& config, const nlohmann::json& j);
void apply_json(EscalationPolicy& policy, const nlohmann::json& j);
void apply_json(OfflineGateway& gateway, const nlohmann::json& j);
void apply_json(ServiceOptions& options, const nlohmann::json& j);
ContactList contacts_from_json(const nlohmann::json& j);

/// Defaults overridden by a document with optional sections: detection, escalation, contacts,
/// replay_gateway, service. Validates the result.
AppConfig app_config_from_json(const nlohmann::json& j, AppConfig base = {});
AppConfig load_app_config(const std::string& path);

nlohmann::ordered_json to_json(const DetectionConfig& config);
nlohmann::ordered_json to_json(const EscalationPolicy& policy);
nlohmann::ordered_json to_json(const ContactList& contacts);
nlohmann::ordered_json to_json(const OfflineGateway& gateway);
nlohmann::ordered_json to_json(const ServiceOptions& options);
nlohmann::ordered_json to_json(const AppConfig& config);

/// "HH:MM" or "HH:MM:SS".
TimeOfDay parse_time_of_day(const std::string& text, const std::string& field);
std::string format_time_of_day(TimeOfDay t);

}  // namespace comaguard
