#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "comaguard/app_config.hpp"

namespace comaguard {

/// How a session's logical clock advances between records.
///   samples: only record timestamps (and ticks synthesized between them) move time; matches offline replay.
///   wall:    a background ticker maps wall time onto logical time at `speed`; records may omit t_ms and
///            are then stamped with the current logical time.
enum class ClockMode { Samples, Wall };

std::string_view to_string(ClockMode m) noexcept;
std::optional<ClockMode> clock_mode_from_string(std::string_view s) noexcept;

struct SessionSettings {
    DetectionConfig detection{};
    ContactList contacts{};
    EscalationPolicy policy{};
    ClockMode clock = ClockMode::Samples;
    double speed = 1.0;
    std::int64_t tick_period_s = 1;
};

/// Body of POST /sessions: optional keys detection, escalation, contacts, clock, speed, tick_period_s.
/// Missing keys fall back to `defaults`. Throws InvalidConfig.
SessionSettings session_settings_from_json(const nlohmann::json& body, const AppConfig& defaults);
nlohmann::ordered_json to_json(const SessionSettings& s);

/// A record in the JSON ingestion format; t_ms may be absent in wall-clock sessions.
/// Keys: t_ms, ax_g, ay_g, az_g, hr_bpm, skin_rh (null or absent = missing), action ("ACK").
inline constexpr TimeMs kStampNow = -1;
/// Accepts an array of records or {"records": [...]}. Throws InvalidRecord.
Trace records_from_json(const nlohmann::json& body);
nlohmann::ordered_json to_json(const TraceRecord& r);

/// Journal format of applied inputs (one JSON object per line).
nlohmann::ordered_json to_json(const InputEvent& e);
/// Throws InvalidRecord.
InputEvent input_from_json(const nlohmann::json& j);

struct IngestResult {
    std::size_t accepted = 0;
    /// Index in the session log of the first event produced by this call.
    std::size_t first_event = 0;
    EventLog events;
};

/// Live sessions. Every session owns one pipeline; all of its inputs (records, acknowledgements,
/// wall-clock ticks, gateway answers) are serialized under a per-session lock. Gateway requests are made
/// synchronously under that lock, so a session never has more than one in flight.
///
/// Persistence (when data_dir is non-empty), per session directory:
///   session.json   settings and creation time
///   inputs.jsonl   every applied input, flushed per line; the source of truth for recovery
///   events.jsonl   the event log, flushed per batch
/// recover() replays inputs.jsonl without contacting the gateway, drops a torn trailing line, and rewrites
/// events.jsonl from the recomputed log.
class SessionService {
public:
    using NotifierFactory = std::function<std::unique_ptr<Notifier>(const std::string& session_id)>;

    /// Without a factory, attempts go to HttpGatewayNotifier(defaults.service.gateway_url).
    explicit SessionService(AppConfig defaults, NotifierFactory factory = {});
    ~SessionService();
    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    /// Loads every session found under data_dir. Returns the number recovered.
    std::size_t recover();

    /// Throws InvalidConfig.
    std::string create_session(const nlohmann::json& body);
    /// All-or-nothing: the whole batch is validated before the first record is applied.
    /// Throws UnknownSession, NonMonotonicInput, InvalidRecord.
    IngestResult ingest(const std::string& id, const Trace& records);
    /// Acknowledge at the session's current logical time. Throws UnknownSession.
    IngestResult acknowledge(const std::string& id);

    /// Serialized events from `offset`. Blocks up to `wait` when none are available yet.
    std::vector<std::string> events_since(const std::string& id, std::size_t offset,
                                          std::chrono::milliseconds wait = std::chrono::milliseconds{0});
    std::size_t event_count(const std::string& id);
    EventLog event_log(const std::string& id);
    nlohmann::ordered_json state(const std::string& id);
    std::vector<std::string> session_ids() const;
    bool contains(const std::string& id) const;

    /// Advances wall-clock sessions to the current wall time. Called by the ticker.
    void advance_wall_clocks();
    void start_ticker(std::chrono::milliseconds interval = std::chrono::milliseconds{20});
    /// Stops the ticker, wakes every waiting reader and flushes logs. Idempotent.
    void shutdown();
    bool closing() const noexcept;

    const AppConfig& defaults() const noexcept { return defaults_; }

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<Session> open_session(std::string id, SessionSettings settings, std::string created_at,
                                          bool fresh);
    std::string fresh_id();

    AppConfig defaults_;
    NotifierFactory factory_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::thread ticker_;
    struct Shared;
    std::shared_ptr<Shared> shared_;
};

/// HTTP front end for SessionService.
///
///   POST /sessions                    -> 201 {"id": ...}
///   GET  /sessions                    -> [{"id", "state", "event_count"}]
///   POST /sessions/{id}/samples       JSON records or text/csv trace -> {"accepted", "first_event", "events"}
///   POST /sessions/{id}/ack           -> {"first_event", "events"}
///   GET  /sessions/{id}/events        ?offset=N; JSON Lines, or server-sent events when follow=1 or
///                                     Accept: text/event-stream (Last-Event-ID resumes; id = next offset)
///   GET  /sessions/{id}/state
///   GET  /healthz
/// Errors: 400 {"error", "field"?, "line"?}, 404 unknown session, 409 non-monotonic input.
class HttpServer {
public:
    explicit HttpServer(SessionService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires a successful bind().
    bool listen();
    /// bind + listen on a background thread.
    int start(const std::string& host, int port);
    void stop();
    int port() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace comaguard
