#include "comaguard/session_service.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "comaguard/gateway.hpp"

namespace comaguard {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ClockMode m) noexcept {
    return m == ClockMode::Wall ? "wall" : "samples";
}

std::optional<ClockMode> clock_mode_from_string(std::string_view s) noexcept {
    if (s == "samples") return ClockMode::Samples;
    if (s == "wall") return ClockMode::Wall;
    return std::nullopt;
}

SessionSettings session_settings_from_json(const json& body, const AppConfig& defaults) {
    if (!body.is_object()) throw InvalidConfig("body", "expected an object");
    static const std::set<std::string> known{"detection", "escalation", "contacts", "clock", "speed", "tick_period_s"};
    for (const auto& [key, _] : body.items()) {
        if (!known.count(key)) throw InvalidConfig(key, "unknown key");
    }
    SessionSettings s;
    s.detection = defaults.run.detection;
    s.contacts = defaults.run.contacts;
    s.policy = defaults.run.policy;
    s.tick_period_s = defaults.service.tick_period_s;
    if (body.contains("detection")) apply_json(s.detection, body["detection"]);
    if (body.contains("escalation")) apply_json(s.policy, body["escalation"]);
    if (body.contains("contacts")) s.contacts = contacts_from_json(body["contacts"]);
    if (body.contains("clock")) {
        const auto& c = body["clock"];
        auto mode = c.is_string() ? clock_mode_from_string(c.get<std::string>()) : std::nullopt;
        if (!mode) throw InvalidConfig("clock", "expected samples or wall");
        s.clock = *mode;
    }
    if (body.contains("speed")) {
        const auto& v = body["speed"];
        if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>())) {
            throw InvalidConfig("speed", "must be a finite number > 0");
        }
        s.speed = v.get<double>();
    }
    if (body.contains("tick_period_s")) {
        const auto& v = body["tick_period_s"];
        if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) throw InvalidConfig("tick_period_s", "must be > 0");
        s.tick_period_s = v.get<std::int64_t>();
    }
    validate(s.detection);
    validate(s.policy);
    return s;
}

ordered_json to_json(const SessionSettings& s) {
    ordered_json j;
    j["detection"] = to_json(s.detection);
    j["escalation"] = to_json(s.policy);
    j["contacts"] = to_json(s.contacts);
    j["clock"] = to_string(s.clock);
    j["speed"] = s.speed;
    j["tick_period_s"] = s.tick_period_s;
    return j;
}

namespace {

std::optional<double> optional_number(const json& j, const char* key, std::size_t index) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number()) throw InvalidRecord("record " + std::to_string(index) + ": " + key + " must be a number");
    return j[key].get<double>();
}

TraceRecord record_from_json(const json& j, std::size_t index) {
    if (!j.is_object()) throw InvalidRecord("record " + std::to_string(index) + " must be an object");
    TraceRecord r;
    r.t_ms = kStampNow;
    if (j.contains("t_ms")) {
        if (!j["t_ms"].is_number_integer() || j["t_ms"].get<std::int64_t>() < 0) {
            throw InvalidRecord("record " + std::to_string(index) + ": t_ms must be a non-negative integer");
        }
        r.t_ms = j["t_ms"].get<std::int64_t>();
    }
    const auto axis = [&](const char* key, double& out) {
        if (auto v = optional_number(j, key, index)) out = *v;
    };
    axis("ax_g", r.ax_g);
    axis("ay_g", r.ay_g);
    axis("az_g", r.az_g);
    r.hr_bpm = optional_number(j, "hr_bpm", index);
    r.skin_rh = optional_number(j, "skin_rh", index);
    if (j.contains("action") && !j["action"].is_null()) {
        const auto& a = j["action"];
        if (!a.is_string() || (a.get<std::string>() != "ACK" && !a.get<std::string>().empty())) {
            throw InvalidRecord("record " + std::to_string(index) + ": action must be \"ACK\"");
        }
        if (a.get<std::string>() == "ACK") r.action = TraceAction::Ack;
    }
    return r;
}

}  // namespace

Trace records_from_json(const json& body) {
    const json* arr = &body;
    if (body.is_object() && body.contains("records")) arr = &body["records"];
    if (!arr->is_array()) throw InvalidRecord("expected an array of records or {\"records\": [...]}");
    Trace out;
    out.reserve(arr->size());
    for (std::size_t i = 0; i < arr->size(); ++i) out.push_back(record_from_json((*arr)[i], i));
    return out;
}

ordered_json to_json(const TraceRecord& r) {
    ordered_json j;
    j["t_ms"] = r.t_ms;
    j["ax_g"] = r.ax_g;
    j["ay_g"] = r.ay_g;
    j["az_g"] = r.az_g;
    j["hr_bpm"] = r.hr_bpm ? json(*r.hr_bpm) : json(nullptr);
    j["skin_rh"] = r.skin_rh ? json(*r.skin_rh) : json(nullptr);
    if (r.is_ack()) j["action"] = "ACK";
    return j;
}

ordered_json to_json(const InputEvent& e) {
    ordered_json j;
    std::visit(
        [&](const auto& in) {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, input::Sample>) {
                j["kind"] = "sample";
                j["t_ms"] = in.sample.t_ms;
                j["ax_g"] = in.sample.accel.x;
                j["ay_g"] = in.sample.accel.y;
                j["az_g"] = in.sample.accel.z;
                j["hr_bpm"] = in.sample.hr_bpm ? json(*in.sample.hr_bpm) : json(nullptr);
                j["skin_rh"] = in.sample.skin_rh ? json(*in.sample.skin_rh) : json(nullptr);
            } else if constexpr (std::is_same_v<T, input::Acknowledge>) {
                j["kind"] = "ack";
                j["t_ms"] = in.t_ms;
            } else if constexpr (std::is_same_v<T, input::Tick>) {
                j["kind"] = "tick";
                j["t_ms"] = in.t_ms;
            } else {
                j["kind"] = "attempt_result";
                j["t_ms"] = in.t_ms;
                j["contact_id"] = in.contact_id;
                j["outcome"] = to_string(in.outcome);
            }
        },
        e);
    return j;
}

InputEvent input_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        const auto t = j.at("t_ms").get<TimeMs>();
        if (kind == "sample") {
            SensorSample s;
            s.t_ms = t;
            s.accel = {j.at("ax_g").get<double>(), j.at("ay_g").get<double>(), j.at("az_g").get<double>()};
            if (!j.at("hr_bpm").is_null()) s.hr_bpm = j["hr_bpm"].get<double>();
            if (!j.at("skin_rh").is_null()) s.skin_rh = j["skin_rh"].get<double>();
            return input::Sample{s};
        }
        if (kind == "ack") return input::Acknowledge{t};
        if (kind == "tick") return input::Tick{t};
        if (kind == "attempt_result") {
            auto outcome = attempt_outcome_from_string(j.at("outcome").get<std::string>());
            if (!outcome) throw InvalidRecord("bad outcome");
            return input::AttemptResult{t, j.at("contact_id").get<std::string>(), *outcome};
        }
        throw InvalidRecord("unknown input kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw InvalidRecord(std::string("malformed journal entry: ") + e.what());
    }
}

// ---- sessions -------------------------------------------------------------

namespace {

/// Forwards to the session's gateway; detached while the journal is replayed.
struct SwitchNotifier : Notifier {
    Notifier* target = nullptr;
    std::optional<AttemptOutcome> notify(const DispatchRequest& request) override {
        return target ? target->notify(request) : std::nullopt;
    }
};

std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json state_detail(const DetectorState& s, const DetectionConfig& c) {
    ordered_json j = ordered_json::object();
    std::visit(
        [&](const auto& st) {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, state::Active>) {
                j["since_ms"] = st.since_ms;
            } else if constexpr (std::is_same_v<T, state::Immobile>) {
                j["entered_at_ms"] = st.entered_at_ms;
            } else if constexpr (std::is_same_v<T, state::Vigil>) {
                j["hr_baseline_bpm"] = st.baselines.hr_baseline_bpm ? json(*st.baselines.hr_baseline_bpm) : json(nullptr);
                j["rh_baseline_pct"] = st.baselines.rh_baseline_pct ? json(*st.baselines.rh_baseline_pct) : json(nullptr);
            } else if constexpr (std::is_same_v<T, state::LocalAlarm>) {
                j["raised_at_ms"] = st.raised_at_ms;
                j["escalates_at_ms"] = st.raised_at_ms + seconds_to_ms(c.ack_window_s);
                auto reasons = ordered_json::array();
                for (auto r : st.reasons.reasons()) reasons.push_back(to_string(r));
                j["reasons"] = std::move(reasons);
            } else if constexpr (std::is_same_v<T, state::Escalating>) {
                j["started_at_ms"] = st.started_at_ms;
            }
        },
        s);
    return j;
}

}  // namespace

struct SessionService::Shared {
    std::atomic<bool> closing{false};
    std::mutex mu;
    std::condition_variable cv;
};

struct SessionService::Session {
    std::string id;
    SessionSettings settings;
    std::string created_at;
    fs::path dir;
    bool persist = false;

    std::unique_ptr<Notifier> gateway;
    SwitchNotifier notifier;
    std::unique_ptr<Pipeline> pipeline;
    std::mutex mu;
    std::ofstream inputs_out;
    std::ofstream events_out;

    std::chrono::steady_clock::time_point wall_origin = std::chrono::steady_clock::now();
    TimeMs logical_origin = 0;

    std::mutex ev_mu;
    std::condition_variable ev_cv;
    std::vector<std::string> lines;

    TimeMs wall_now() const {
        const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_origin);
        return logical_origin + static_cast<TimeMs>(std::floor(elapsed.count() * settings.speed));
    }

    void journal(const InputEvent& e) {
        if (!persist) return;
        inputs_out << to_json(e).dump() << '\n';
        inputs_out.flush();
    }

    // Caller holds mu.
    void publish(const EventLog& events) {
        if (events.empty()) return;
        std::vector<std::string> fresh;
        fresh.reserve(events.size());
        for (const auto& e : events) fresh.push_back(to_json_line(e));
        if (persist) {
            std::string block;
            for (const auto& l : fresh) block += l + '\n';
            events_out << block;
            events_out.flush();
        }
        {
            std::lock_guard lock(ev_mu);
            lines.insert(lines.end(), fresh.begin(), fresh.end());
        }
        ev_cv.notify_all();
    }

    std::size_t line_count() {
        std::lock_guard lock(ev_mu);
        return lines.size();
    }

    // Caller holds mu.
    void catch_up_wall(EventLog& out) {
        if (settings.clock != ClockMode::Wall) return;
        auto ev = pipeline->advance_to(wall_now());
        out.insert(out.end(), ev.begin(), ev.end());
    }
};

SessionService::SessionService(AppConfig defaults, NotifierFactory factory)
    : defaults_(std::move(defaults)), factory_(std::move(factory)), shared_(std::make_shared<Shared>()) {
    if (!factory_) {
        std::string url = defaults_.service.gateway_url;
        if (const char* env = std::getenv("COMAGUARD_GATEWAY_URL"); env && *env) url = env;
        const auto timeout = std::chrono::milliseconds(defaults_.service.gateway_timeout_ms);
        factory_ = [url, timeout](const std::string& id) {
            return std::make_unique<HttpGatewayNotifier>(url, id, timeout);
        };
    }
}

SessionService::~SessionService() {
    shutdown();
}

bool SessionService::closing() const noexcept {
    return shared_->closing.load();
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession(id);
    return it->second;
}

bool SessionService::contains(const std::string& id) const {
    std::shared_lock lock(mu_);
    return sessions_.count(id) > 0;
}

std::vector<std::string> SessionService::session_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

std::string SessionService::fresh_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    for (;;) {
        std::string id;
        for (auto v = rng(), i = std::uint64_t{0}; i < 12; ++i, v >>= 4) id += kHex[v & 0xF];
        if (sessions_.count(id)) continue;
        if (!defaults_.service.data_dir.empty() && fs::exists(fs::path(defaults_.service.data_dir) / id)) continue;
        return id;
    }
}

std::shared_ptr<SessionService::Session> SessionService::open_session(std::string id, SessionSettings settings,
                                                                      std::string created_at, bool fresh) {
    auto s = std::make_shared<Session>();
    s->id = std::move(id);
    s->settings = std::move(settings);
    s->created_at = std::move(created_at);
    s->persist = !defaults_.service.data_dir.empty();
    RunConfig run{s->settings.detection, s->settings.contacts, s->settings.policy, {}};
    s->pipeline = std::make_unique<Pipeline>(run, s->notifier, s->settings.tick_period_s);
    if (!s->persist) return s;

    s->dir = fs::path(defaults_.service.data_dir) / s->id;
    if (fresh) {
        fs::create_directories(s->dir);
        ordered_json meta;
        meta["id"] = s->id;
        meta["created_at"] = s->created_at;
        meta["settings"] = to_json(s->settings);
        std::ofstream(s->dir / "session.json") << meta.dump(2) << '\n';
        s->inputs_out.open(s->dir / "inputs.jsonl", std::ios::trunc);
        s->events_out.open(s->dir / "events.jsonl", std::ios::trunc);
        if (!s->inputs_out || !s->events_out) throw Error("cannot write session files under " + s->dir.string());
    }
    return s;
}

std::string SessionService::create_session(const json& body) {
    auto settings = session_settings_from_json(body, defaults_);
    std::unique_lock lock(mu_);
    auto id = fresh_id();
    auto s = open_session(id, std::move(settings), utc_now_iso(), true);
    s->gateway = factory_(id);
    s->notifier.target = s->gateway.get();
    s->pipeline->set_input_observer([raw = s.get()](const InputEvent& e) { raw->journal(e); });
    sessions_[id] = s;
    spdlog::info("session {} created ({} clock)", id, to_string(s->settings.clock));
    return id;
}

std::size_t SessionService::recover() {
    const auto& root = defaults_.service.data_dir;
    if (root.empty() || !fs::is_directory(root)) return 0;
    std::size_t recovered = 0;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto meta_path = entry.path() / "session.json";
        if (!entry.is_directory() || !fs::exists(meta_path)) continue;
        try {
            json meta;
            std::ifstream(meta_path) >> meta;
            const auto id = meta.at("id").get<std::string>();
            if (contains(id)) continue;
            auto settings = session_settings_from_json(meta.at("settings"), defaults_);
            auto s = open_session(id, std::move(settings), meta.value("created_at", ""), false);

            // Replay the journal; anything after the first unreadable line is discarded.
            std::string text;
            {
                std::ifstream in(s->dir / "inputs.jsonl", std::ios::binary);
                std::ostringstream ss;
                ss << in.rdbuf();
                text = ss.str();
            }
            std::size_t good = 0, pos = 0, replayed = 0;
            while (pos < text.size()) {
                const auto nl = text.find('\n', pos);
                if (nl == std::string::npos) break;
                try {
                    s->pipeline->apply(input_from_json(json::parse(std::string_view(text).substr(pos, nl - pos))));
                } catch (const std::exception& e) {
                    spdlog::warn("session {}: journal unreadable at byte {} ({}), truncating", id, pos, e.what());
                    break;
                }
                pos = nl + 1;
                good = pos;
                ++replayed;
            }
            if (good != text.size()) fs::resize_file(s->dir / "inputs.jsonl", good);

            const auto log_text = to_json_lines(s->pipeline->detector().history());
            std::ofstream(s->dir / "events.jsonl", std::ios::trunc | std::ios::binary) << log_text;
            for (const auto& e : s->pipeline->detector().history()) s->lines.push_back(to_json_line(e));

            s->inputs_out.open(s->dir / "inputs.jsonl", std::ios::app);
            s->events_out.open(s->dir / "events.jsonl", std::ios::app);
            s->logical_origin = s->pipeline->now();
            s->wall_origin = std::chrono::steady_clock::now();
            s->gateway = factory_(id);
            s->notifier.target = s->gateway.get();
            s->pipeline->set_input_observer([raw = s.get()](const InputEvent& e) { raw->journal(e); });
            {
                std::unique_lock lock(mu_);
                sessions_[id] = s;
            }
            ++recovered;
            spdlog::info("session {} recovered: {} inputs, {} events, state {}", id, replayed, s->lines.size(),
                         to_string(s->pipeline->detector().current_kind()));
        } catch (const std::exception& e) {
            spdlog::error("skipping session directory {}: {}", entry.path().string(), e.what());
        }
    }
    return recovered;
}

IngestResult SessionService::ingest(const std::string& id, const Trace& records) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    IngestResult result;
    result.first_event = s->line_count();

    EventLog out;
    s->catch_up_wall(out);

    // Stamp and validate the whole batch before applying anything.
    Trace batch = records;
    const auto& p = *s->pipeline;
    std::optional<TimeMs> prev = p.last_record_ms();
    const TimeMs floor = p.detector().last_input_ms().value_or(0);
    for (auto& r : batch) {
        if (r.t_ms == kStampNow) {
            if (s->settings.clock != ClockMode::Wall) throw InvalidRecord("t_ms is required in samples-clock sessions");
            r.t_ms = std::max(floor, s->wall_now());
            if (prev && r.t_ms <= *prev) r.t_ms = *prev + 1;
        }
        if (prev && r.t_ms <= *prev) throw NonMonotonicInput(*prev, r.t_ms);
        if (r.t_ms < floor) throw NonMonotonicInput(floor, r.t_ms);
        if (!is_valid(r)) throw InvalidRecord("sensor values out of range at t_ms=" + std::to_string(r.t_ms));
        prev = r.t_ms;
    }
    if (!batch.empty() && s->settings.clock == ClockMode::Wall && batch.back().t_ms > s->wall_now()) {
        // Records ahead of the wall clock pull it forward.
        s->logical_origin += batch.back().t_ms - s->wall_now();
    }

    for (const auto& r : batch) {
        auto ev = s->pipeline->feed(r);
        out.insert(out.end(), ev.begin(), ev.end());
    }
    s->publish(out);
    result.accepted = batch.size();
    result.events = std::move(out);
    return result;
}

IngestResult SessionService::acknowledge(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    IngestResult result;
    result.first_event = s->line_count();
    EventLog out;
    s->catch_up_wall(out);
    auto ev = s->pipeline->acknowledge(s->pipeline->now());
    out.insert(out.end(), ev.begin(), ev.end());
    s->publish(out);
    result.events = std::move(out);
    return result;
}

std::vector<std::string> SessionService::events_since(const std::string& id, std::size_t offset,
                                                      std::chrono::milliseconds wait) {
    auto s = find(id);
    std::unique_lock lock(s->ev_mu);
    if (wait.count() > 0) {
        s->ev_cv.wait_for(lock, wait, [&] { return s->lines.size() > offset || closing(); });
    }
    if (offset >= s->lines.size()) return {};
    return {s->lines.begin() + static_cast<std::ptrdiff_t>(offset), s->lines.end()};
}

std::size_t SessionService::event_count(const std::string& id) {
    return find(id)->line_count();
}

EventLog SessionService::event_log(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return s->pipeline->detector().history();
}

ordered_json SessionService::state(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    const auto& p = *s->pipeline;
    const auto& d = p.detector();
    ordered_json j;
    j["id"] = s->id;
    j["created_at"] = s->created_at;
    j["state"] = to_string(d.current_kind());
    j["detail"] = state_detail(d.current_state(), d.config());
    j["now_ms"] = p.now();
    j["last_record_ms"] = p.last_record_ms() ? json(*p.last_record_ms()) : json(nullptr);
    j["event_count"] = s->line_count();
    j["clock"] = to_string(s->settings.clock);
    j["speed"] = s->settings.speed;
    if (s->settings.clock == ClockMode::Wall) j["wall_now_ms"] = s->wall_now();
    if (const auto& run = d.escalation()) {
        ordered_json e;
        e["started_at_ms"] = run->started_at();
        e["round"] = run->round();
        e["cancelled"] = run->cancelled();
        e["exhausted"] = run->exhausted();
        auto attempts = ordered_json::array();
        for (const auto& a : run->attempts()) {
            attempts.push_back({{"t_ms", a.t_ms},
                                {"contact_id", a.contact_id},
                                {"channel", to_string(a.channel)},
                                {"outcome", to_string(a.outcome)}});
        }
        e["attempts"] = std::move(attempts);
        if (auto target = run->in_flight_target()) {
            const TimeMs since = run->in_flight_since().value_or(0);
            e["in_flight"] = {{"contact_id", target->contact.id},
                              {"channel", to_string(target->channel)},
                              {"since_ms", since},
                              {"times_out_after_ms", since + seconds_to_ms(run->policy().per_contact_timeout_s)}};
        } else {
            e["in_flight"] = nullptr;
        }
        j["escalation"] = std::move(e);
    } else {
        j["escalation"] = nullptr;
    }
    j["settings"] = to_json(s->settings);
    return j;
}

void SessionService::advance_wall_clocks() {
    std::vector<std::shared_ptr<Session>> wall;
    {
        std::shared_lock lock(mu_);
        for (const auto& [_, s] : sessions_) {
            if (s->settings.clock == ClockMode::Wall) wall.push_back(s);
        }
    }
    for (const auto& s : wall) {
        std::lock_guard lock(s->mu);
        EventLog out;
        s->catch_up_wall(out);
        s->publish(out);
    }
}

void SessionService::start_ticker(std::chrono::milliseconds interval) {
    if (ticker_.joinable()) return;
    ticker_ = std::thread([this, interval] {
        std::unique_lock lock(shared_->mu);
        while (!closing()) {
            shared_->cv.wait_for(lock, interval, [this] { return closing(); });
            if (closing()) break;
            lock.unlock();
            try {
                advance_wall_clocks();
            } catch (const std::exception& e) {
                spdlog::error("wall clock ticker: {}", e.what());
            }
            lock.lock();
        }
    });
}

void SessionService::shutdown() {
    if (!shared_->closing.exchange(true)) {
        shared_->cv.notify_all();
    }
    if (ticker_.joinable()) ticker_.join();
    std::shared_lock lock(mu_);
    for (const auto& [_, s] : sessions_) {
        {
            std::lock_guard sl(s->mu);
            if (s->inputs_out.is_open()) s->inputs_out.flush();
            if (s->events_out.is_open()) s->events_out.flush();
        }
        s->ev_cv.notify_all();
    }
}

// ---- HTTP -----------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, ordered_json{{"error", message}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const UnknownSession& e) {
        send_error(res, 404, e.what());
    } catch (const NonMonotonicInput& e) {
        send_error(res, 409, e.what());
    } catch (const InvalidConfig& e) {
        send_json(res, 400, ordered_json{{"error", e.what()}, {"field", e.field()}});
    } catch (const ParseError& e) {
        send_json(res, 400, ordered_json{{"error", e.what()}, {"line", e.line()}});
    } catch (const Error& e) {
        send_error(res, 400, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
        spdlog::error("request failed: {}", e.what());
        send_error(res, 500, e.what());
    }
}

ordered_json events_json(const EventLog& events) {
    auto arr = ordered_json::array();
    for (const auto& e : events) arr.push_back(ordered_json::parse(to_json_line(e)));
    return arr;
}

std::size_t parse_offset(const std::string& text) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) throw Error("offset must be a non-negative integer");
    return value;
}

}  // namespace

struct HttpServer::Impl {
    SessionService& service;
    httplib::Server server;
    std::thread thread;
    int port = -1;

    explicit Impl(SessionService& s) : service(s) {
        // Event streams hold a worker each.
        server.new_task_queue = [] { return new httplib::ThreadPool(64); };
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
            res.status = 204;
        });

        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, ordered_json{{"ok", true}});
        });

        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = req.body.empty() ? json::object() : json::parse(req.body);
                const auto id = service.create_session(body);
                send_json(res, 201, ordered_json{{"id", id}});
            });
        });

        server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                auto arr = ordered_json::array();
                for (const auto& id : service.session_ids()) {
                    auto st = service.state(id);
                    arr.push_back({{"id", id}, {"state", st["state"]}, {"event_count", st["event_count"]}});
                }
                send_json(res, 200, arr);
            });
        });

        server.Post(R"(/sessions/([^/]+)/samples)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                Trace records;
                const auto type = req.get_header_value("Content-Type");
                if (type.rfind("text/csv", 0) == 0 || req.body.rfind("t_ms,", 0) == 0) {
                    records = parse_trace(req.body);
                } else {
                    records = records_from_json(json::parse(req.body));
                }
                auto r = service.ingest(id, records);
                send_json(res, 200,
                          ordered_json{{"accepted", r.accepted}, {"first_event", r.first_event}, {"events", events_json(r.events)}});
            });
        });

        server.Post(R"(/sessions/([^/]+)/ack)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto r = service.acknowledge(req.matches[1]);
                send_json(res, 200, ordered_json{{"first_event", r.first_event}, {"events", events_json(r.events)}});
            });
        });

        server.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, service.state(req.matches[1])); });
        });

        server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { serve_events(req, res); });
        });
    }

    void serve_events(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        if (!service.contains(id)) throw UnknownSession(id);
        std::size_t offset = 0;
        if (req.has_param("offset")) {
            offset = parse_offset(req.get_param_value("offset"));
        } else if (req.has_header("Last-Event-ID")) {
            offset = parse_offset(req.get_header_value("Last-Event-ID"));
        }
        const bool follow = req.get_param_value("follow") == "1" || req.get_param_value("follow") == "true" ||
                            req.get_header_value("Accept").find("text/event-stream") != std::string::npos;
        if (!follow) {
            std::string body;
            for (const auto& line : service.events_since(id, offset)) body += line + '\n';
            res.set_content(body, "application/x-ndjson");
            return;
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        auto next = std::make_shared<std::size_t>(offset);
        res.set_chunked_content_provider("text/event-stream", [this, id, next](std::size_t, httplib::DataSink& sink) {
            if (service.closing()) {
                sink.done();
                return true;
            }
            std::vector<std::string> lines;
            try {
                lines = service.events_since(id, *next, std::chrono::milliseconds(1000));
            } catch (const Error&) {
                sink.done();
                return true;
            }
            if (lines.empty()) {
                static constexpr std::string_view ping = ": keepalive\n\n";
                return sink.write(ping.data(), ping.size());
            }
            std::string chunk;
            for (const auto& line : lines) {
                ++*next;
                chunk += "id: " + std::to_string(*next) + "\ndata: " + line + "\n\n";
            }
            return sink.write(chunk.data(), chunk.size());
        });
    }
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() {
    stop();
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    return impl_->port;
}

bool HttpServer::listen() {
    return impl_->server.listen_after_bind();
}

int HttpServer::start(const std::string& host, int port) {
    if (bind(host, port) < 0) return -1;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const noexcept {
    return impl_->port;
}

}  // namespace comaguard
