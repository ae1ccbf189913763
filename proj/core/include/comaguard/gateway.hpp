#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "comaguard/replay.hpp"

namespace comaguard {

/// Body of POST {gateway_url}/notify.
struct GatewayRequest {
    std::string session_id;
    std::string number;
    Channel channel = Channel::Call;
    std::string message;

    friend bool operator==(const GatewayRequest&, const GatewayRequest&) = default;
};

nlohmann::ordered_json to_json(const GatewayRequest& r);
/// Throws InvalidRecord on a malformed body.
GatewayRequest gateway_request_from_json(const nlohmann::json& j);

/// Human-readable alert text sent with every attempt.
std::string alert_message(const std::string& session_id, const DispatchRequest& request);

/// Sends each dispatch to a telephony gateway over HTTP.
///
/// Outcome mapping: a {"outcome": "delivered"|"failed"} answer is used as-is; an unreachable gateway,
/// an error status or a malformed answer is Failed; no answer within the wall-clock timeout yields no
/// outcome, so the attempt closes as Timeout on the logical clock.
class HttpGatewayNotifier : public Notifier {
public:
    HttpGatewayNotifier(std::string gateway_url, std::string session_id, std::chrono::milliseconds timeout);

    std::optional<AttemptOutcome> notify(const DispatchRequest& request) override;

private:
    std::string url_;
    std::string session_id_;
    std::chrono::milliseconds timeout_;
};

/// Scriptable in-repo stand-in for a telephony provider.
///
/// Script document:
///   {"default": {"behavior": "fail"},
///    "numbers": {"+41790000001": {"behavior": "deliver"},
///                "+41790000002": {"behavior": "delay", "delay_ms": 3000, "then": "deliver"}}}
/// Behaviors: deliver, fail, delay (sleep, then answer `then`, default deliver).
class MockGateway {
public:
    struct Behavior {
        enum class Kind { Deliver, Fail, Delay } kind = Kind::Fail;
        std::int64_t delay_ms = 0;
        AttemptOutcome then = AttemptOutcome::Delivered;
    };

    struct Script {
        Behavior fallback{};
        std::map<std::string, Behavior> numbers;
    };

    /// Throws InvalidConfig.
    static Script script_from_json(const nlohmann::json& j);

    MockGateway();
    explicit MockGateway(Script script);
    ~MockGateway();
    MockGateway(const MockGateway&) = delete;
    MockGateway& operator=(const MockGateway&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port. Returns the bound port, or -1.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop(). Returns false if the port could not be bound.
    bool run(const std::string& host, int port);
    void stop();

    void set_script(Script script);
    std::vector<GatewayRequest> requests() const;
    std::string base_url() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace comaguard
