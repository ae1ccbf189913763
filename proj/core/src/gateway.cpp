#include "comaguard/gateway.hpp"

#include <httplib.h>

#include <thread>

#include <spdlog/spdlog.h>

namespace comaguard {

nlohmann::ordered_json to_json(const GatewayRequest& r) {
    nlohmann::ordered_json j;
    j["session_id"] = r.session_id;
    j["number"] = r.number;
    j["channel"] = to_string(r.channel);
    j["message"] = r.message;
    return j;
}

GatewayRequest gateway_request_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidRecord("gateway request must be an object");
    GatewayRequest r;
    const auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) throw InvalidRecord(std::string("missing '") + key + "'");
        return j[key].get<std::string>();
    };
    r.session_id = str("session_id");
    r.number = str("number");
    auto ch = channel_from_string(str("channel"));
    if (!ch) throw InvalidRecord("channel must be call or message");
    r.channel = *ch;
    r.message = str("message");
    return r;
}

std::string alert_message(const std::string& session_id, const DispatchRequest& request) {
    std::string reasons;
    for (auto r : request.reasons.reasons()) {
        if (!reasons.empty()) reasons += ", ";
        reasons += to_string(r);
    }
    return "ComaGuard alert for " + request.contact.label + ": the wearer of session " + session_id +
           " is immobile and did not respond to the local alarm (" + (reasons.empty() ? "danger" : reasons) +
           "). Please check on them now.";
}

namespace {

struct UrlParts {
    std::string origin;  // scheme://host:port
    std::string path_prefix;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

}  // namespace

HttpGatewayNotifier::HttpGatewayNotifier(std::string gateway_url, std::string session_id,
                                         std::chrono::milliseconds timeout)
    : url_(std::move(gateway_url)), session_id_(std::move(session_id)), timeout_(timeout) {}

std::optional<AttemptOutcome> HttpGatewayNotifier::notify(const DispatchRequest& request) {
    const auto parts = split_url(url_);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    const GatewayRequest body{session_id_, request.contact.number, request.channel, alert_message(session_id_, request)};
    auto res = client.Post(parts.path_prefix + "/notify", to_json(body).dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::Read) {
            spdlog::warn("session {}: gateway did not answer for {} within {} ms", session_id_, request.contact.id,
                         timeout_.count());
            return std::nullopt;
        }
        spdlog::warn("session {}: gateway unreachable ({}), recording failed attempt", session_id_,
                     httplib::to_string(res.error()));
        return AttemptOutcome::Failed;
    }
    if (res->status != 200) return AttemptOutcome::Failed;
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto outcome = attempt_outcome_from_string(j.at("outcome").get<std::string>());
        if (outcome == AttemptOutcome::Delivered || outcome == AttemptOutcome::Failed) return outcome;
    } catch (const nlohmann::json::exception&) {
    }
    return AttemptOutcome::Failed;
}

// ---- mock gateway ---------------------------------------------------------

namespace {

MockGateway::Behavior behavior_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("behavior") || !j["behavior"].is_string()) {
        throw InvalidConfig(field, "expected {\"behavior\": ...}");
    }
    MockGateway::Behavior b;
    const auto kind = j["behavior"].get<std::string>();
    if (kind == "deliver") {
        b.kind = MockGateway::Behavior::Kind::Deliver;
    } else if (kind == "fail") {
        b.kind = MockGateway::Behavior::Kind::Fail;
    } else if (kind == "delay") {
        b.kind = MockGateway::Behavior::Kind::Delay;
        if (!j.contains("delay_ms") || !j["delay_ms"].is_number_integer() || j["delay_ms"].get<std::int64_t>() < 0) {
            throw InvalidConfig(field + ".delay_ms", "expected a non-negative integer");
        }
        b.delay_ms = j["delay_ms"].get<std::int64_t>();
        if (j.contains("then")) {
            const auto then = j["then"].is_string() ? j["then"].get<std::string>() : "";
            if (then == "deliver" || then == "delivered") {
                b.then = AttemptOutcome::Delivered;
            } else if (then == "fail" || then == "failed") {
                b.then = AttemptOutcome::Failed;
            } else {
                throw InvalidConfig(field + ".then", "expected deliver or fail");
            }
        }
    } else {
        throw InvalidConfig(field + ".behavior", "expected deliver, fail or delay");
    }
    return b;
}

}  // namespace

MockGateway::Script MockGateway::script_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConfig("script", "expected an object");
    Script s;
    if (j.contains("default")) s.fallback = behavior_from_json(j["default"], "default");
    if (j.contains("numbers")) {
        if (!j["numbers"].is_object()) throw InvalidConfig("numbers", "expected an object");
        for (const auto& [number, b] : j["numbers"].items()) s.numbers[number] = behavior_from_json(b, "numbers." + number);
    }
    return s;
}

struct MockGateway::Impl {
    httplib::Server server;
    std::thread thread;
    mutable std::mutex mu;
    Script script;
    std::vector<GatewayRequest> requests;
    std::string host;
    int port = -1;

    void install_routes() {
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        server.Post("/notify", [this](const httplib::Request& req, httplib::Response& res) {
            GatewayRequest parsed;
            try {
                parsed = gateway_request_from_json(nlohmann::json::parse(req.body));
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
                return;
            }
            Behavior b;
            {
                std::lock_guard lock(mu);
                requests.push_back(parsed);
                auto it = script.numbers.find(parsed.number);
                b = it == script.numbers.end() ? script.fallback : it->second;
            }
            AttemptOutcome outcome = AttemptOutcome::Failed;
            switch (b.kind) {
                case Behavior::Kind::Deliver: outcome = AttemptOutcome::Delivered; break;
                case Behavior::Kind::Fail: outcome = AttemptOutcome::Failed; break;
                case Behavior::Kind::Delay:
                    std::this_thread::sleep_for(std::chrono::milliseconds(b.delay_ms));
                    outcome = b.then;
                    break;
            }
            res.set_content(nlohmann::json{{"outcome", std::string(to_string(outcome))}}.dump(), "application/json");
        });
        server.Get("/requests", [this](const httplib::Request&, httplib::Response& res) {
            auto arr = nlohmann::ordered_json::array();
            {
                std::lock_guard lock(mu);
                for (const auto& r : requests) arr.push_back(to_json(r));
            }
            res.set_content(arr.dump(), "application/json");
        });
        server.Post("/script", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                auto s = script_from_json(nlohmann::json::parse(req.body));
                std::lock_guard lock(mu);
                script = std::move(s);
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            }
        });
    }
};

MockGateway::MockGateway() : MockGateway(Script{}) {}

MockGateway::MockGateway(Script script) : impl_(std::make_unique<Impl>()) {
    impl_->script = std::move(script);
    impl_->install_routes();
}

MockGateway::~MockGateway() {
    stop();
}

int MockGateway::start(const std::string& host, int port) {
    impl_->host = host;
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) return -1;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

bool MockGateway::run(const std::string& host, int port) {
    impl_->host = host;
    if (!impl_->server.bind_to_port(host, port)) return false;
    impl_->port = port;
    return impl_->server.listen_after_bind();
}

void MockGateway::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void MockGateway::set_script(Script script) {
    std::lock_guard lock(impl_->mu);
    impl_->script = std::move(script);
}

std::vector<GatewayRequest> MockGateway::requests() const {
    std::lock_guard lock(impl_->mu);
    return impl_->requests;
}

std::string MockGateway::base_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

}  // namespace comaguard
