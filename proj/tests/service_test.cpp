#include <gtest/gtest.h>

#include <fstream>
#include <future>
#include <thread>

#include <httplib.h>

#include "comaguard/gateway.hpp"
#include "comaguard/oracle.hpp"
#include "comaguard/scenario.hpp"
#include "comaguard/session_service.hpp"
#include "support.hpp"

using namespace comaguard;
using namespace comaguard::testing;
using nlohmann::json;

namespace {

const json kContacts = json::array({
    {{"id", "A"}, {"label", "A"}, {"number", "+1001"}, {"channel", "call"}, {"emergency", false}},
    {{"id", "E"}, {"label", "E"}, {"number", "+1112"}, {"channel", "call"}, {"emergency", true}},
    {{"id", "B"}, {"label", "B"}, {"number", "+1002"}, {"channel", "call"}, {"emergency", false}},
});

Trace golden_trace() { return generate_scenario({ScenarioKind::HypoglycemicComa, 900, 42}); }

AppConfig offline_defaults(const std::string& data_dir = "") {
    AppConfig c;
    c.run.contacts = contacts_from_json(kContacts);
    c.service.data_dir = data_dir;
    return c;
}

SessionService::NotifierFactory offline(AttemptOutcome outcome) {
    return [outcome](const std::string&) {
        auto gw = std::make_unique<OfflineGateway>();
        gw->default_outcome = outcome;
        return gw;
    };
}

RunConfig run_config(AttemptOutcome outcome) {
    RunConfig r;
    r.contacts = contacts_from_json(kContacts);
    r.gateway.default_outcome = outcome;
    return r;
}

Trace slice(const Trace& t, std::size_t from, std::size_t to) {
    return Trace(t.begin() + static_cast<std::ptrdiff_t>(from), t.begin() + static_cast<std::ptrdiff_t>(to));
}

std::vector<std::string> attempt_ids(const EventLog& log) {
    std::vector<std::string> out;
    for (const auto& e : log) {
        if (const auto* a = std::get_if<event::ContactAttempt>(&e)) out.push_back(a->contact_id);
    }
    return out;
}

}  // namespace

TEST(SessionService, IngestMatchesOfflineReplay) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session(json::object());
    const auto trace = golden_trace();
    for (std::size_t i = 0; i < trace.size(); i += 97) svc.ingest(id, slice(trace, i, std::min(trace.size(), i + 97)));
    const auto expected = replay(trace, run_config(AttemptOutcome::Timeout));
    EXPECT_EQ(to_json_lines(svc.event_log(id)), to_json_lines(expected));
    EXPECT_EQ(svc.event_count(id), expected.size());
    EXPECT_EQ(svc.state(id)["state"], "escalating");
}

TEST(SessionService, IngestReportsFirstEventIndex) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session(json::object());
    const auto trace = golden_trace();
    std::size_t expected_first = 0;
    for (std::size_t i = 0; i < trace.size(); i += 50) {
        const auto r = svc.ingest(id, slice(trace, i, std::min(trace.size(), i + 50)));
        EXPECT_EQ(r.first_event, expected_first);
        expected_first += r.events.size();
    }
}

TEST(SessionService, BatchIsAllOrNothing) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session(json::object());
    svc.ingest(id, {row(0), row(1000)});
    const auto before = svc.state(id);
    EXPECT_THROW(svc.ingest(id, {row(2000), row(3000), row(2500)}), NonMonotonicInput);
    EXPECT_THROW(svc.ingest(id, {row(500)}), NonMonotonicInput);
    EXPECT_THROW(svc.ingest(id, {row(4000), row(5000, 70.0, 120.0)}), InvalidRecord);
    EXPECT_EQ(svc.state(id).dump(), before.dump());
    EXPECT_NO_THROW(svc.ingest(id, {row(2000)}));
}

TEST(SessionService, UnknownSession) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    EXPECT_THROW(svc.ingest("nope", {row(0)}), UnknownSession);
    EXPECT_THROW(svc.acknowledge("nope"), UnknownSession);
    EXPECT_THROW(svc.state("nope"), UnknownSession);
    EXPECT_FALSE(svc.contains("nope"));
}

TEST(SessionService, InvalidSettings) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    try {
        svc.create_session({{"detection", {{"ack_window_s", 0}}}});
        FAIL();
    } catch (const InvalidConfig& e) {
        EXPECT_EQ(e.field(), "ack_window_s");
    }
    EXPECT_THROW(svc.create_session({{"clock", "sundial"}}), InvalidConfig);
    EXPECT_THROW(svc.create_session({{"colour", "red"}}), InvalidConfig);
    EXPECT_TRUE(svc.session_ids().empty());
}

TEST(SessionService, EventsSinceOffsetAndWait) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session(json::object());
    const auto trace = golden_trace();
    svc.ingest(id, trace);
    const auto all = svc.events_since(id, 0);
    ASSERT_GT(all.size(), 3u);
    const auto tail = svc.events_since(id, 3);
    EXPECT_EQ(tail, std::vector<std::string>(all.begin() + 3, all.end()));
    EXPECT_TRUE(svc.events_since(id, all.size() + 10).empty());

    auto waiter = std::async(std::launch::async, [&] { return svc.events_since(id, all.size(), std::chrono::seconds(5)); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    svc.acknowledge(id);
    svc.ingest(id, {row(trace.back().t_ms + 1000)});
    // An idle-session ack emits nothing; give the waiter something real.
    TimeMs t = trace.back().t_ms + 2000;
    for (int i = 0; i < 40 && waiter.wait_for(std::chrono::milliseconds(0)) != std::future_status::ready; ++i, t += 1000) {
        svc.ingest(id, {moving_row(t)});
    }
    const auto got = waiter.get();
    ASSERT_FALSE(got.empty());
    EXPECT_EQ(got.front(), svc.events_since(id, all.size()).front());
}

TEST(SessionService, ShutdownWakesWaiters) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session(json::object());
    auto waiter = std::async(std::launch::async, [&] { return svc.events_since(id, 0, std::chrono::seconds(30)); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const auto start = std::chrono::steady_clock::now();
    svc.shutdown();
    EXPECT_TRUE(waiter.get().empty());
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
    EXPECT_TRUE(svc.closing());
}

TEST(SessionService, RecoveryRebuildsIdenticalLog) {
    TempDir dir;
    const auto trace = golden_trace();
    const auto half = trace.size() / 2 + 123;
    std::string id;
    {
        SessionService svc(offline_defaults(dir.str()), offline(AttemptOutcome::Failed));
        id = svc.create_session(json::object());
        svc.ingest(id, slice(trace, 0, half));
    }
    {
        std::ofstream torn(dir.path() / id / "inputs.jsonl", std::ios::app);
        torn << "{\"kind\":\"sample\",\"t_m";
    }
    SessionService svc(offline_defaults(dir.str()), offline(AttemptOutcome::Failed));
    EXPECT_EQ(svc.recover(), 1u);
    ASSERT_TRUE(svc.contains(id));
    svc.ingest(id, slice(trace, half, trace.size()));
    const auto expected = to_json_lines(replay(trace, run_config(AttemptOutcome::Failed)));
    EXPECT_EQ(to_json_lines(svc.event_log(id)), expected);
    svc.shutdown();
    std::ifstream in(dir.path() / id / "events.jsonl", std::ios::binary);
    std::ostringstream persisted;
    persisted << in.rdbuf();
    EXPECT_EQ(persisted.str(), expected);
}

TEST(SessionService, InputJournalRoundTrip) {
    const std::vector<InputEvent> inputs{
        input::Sample{still(1000, std::nullopt, 41.5)}, input::Acknowledge{2000}, input::Tick{3000},
        input::AttemptResult{4000, "A", AttemptOutcome::Delivered}};
    for (const auto& in : inputs) {
        const auto back = input_from_json(json::parse(to_json(in).dump()));
        EXPECT_EQ(to_json(back).dump(), to_json(in).dump());
    }
    EXPECT_THROW(input_from_json({{"kind", "teleport"}}), InvalidRecord);
}

TEST(SessionService, WallClockAdvancesOnItsOwn) {
    SessionService svc(offline_defaults(), offline(AttemptOutcome::Timeout));
    const auto id = svc.create_session({{"clock", "wall"}, {"speed", 100.0}});
    svc.start_ticker(std::chrono::milliseconds(10));
    Trace stamped{row(kStampNow)};
    svc.ingest(id, stamped);
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    const auto st = svc.state(id);
    EXPECT_GE(st["now_ms"].get<TimeMs>(), 10000);
    svc.shutdown();
}

class MockGatewayTest : public ::testing::Test {
protected:
    void SetUp() override { ASSERT_GT(mock.start("127.0.0.1", 0), 0); }
    void TearDown() override { mock.stop(); }

    AppConfig http_defaults() {
        auto c = offline_defaults();
        c.service.gateway_url = mock.base_url();
        c.service.gateway_timeout_ms = 200;
        return c;
    }

    MockGateway mock;
};

TEST_F(MockGatewayTest, AllFailOneRoundExhausts) {
    MockGateway::Script script;
    script.fallback.kind = MockGateway::Behavior::Kind::Fail;
    mock.set_script(script);
    SessionService svc(http_defaults());
    const auto id = svc.create_session({{"escalation", {{"max_rounds", 1}}}});
    svc.ingest(id, golden_trace());
    const auto log = svc.event_log(id);
    EXPECT_EQ(attempt_ids(log), (std::vector<std::string>{"A", "B", "E"}));
    const auto stopped = first<event::EscalationStopped>(log);
    ASSERT_NE(stopped, nullptr);
    EXPECT_EQ(stopped->cause, StopCause::Exhausted);
    const auto requests = mock.requests();
    ASSERT_EQ(requests.size(), 3u);
    EXPECT_EQ(requests[0].number, "+1001");
    EXPECT_EQ(requests[1].number, "+1002");
    EXPECT_EQ(requests[2].number, "+1112");
    EXPECT_EQ(requests[0].session_id, id);
    for (const auto& e : log) {
        if (const auto* a = std::get_if<event::ContactAttempt>(&e)) EXPECT_EQ(a->outcome, AttemptOutcome::Failed);
    }
}

TEST_F(MockGatewayTest, AckAfterFirstAttemptStopsFurtherRequests) {
    MockGateway::Script script;
    script.fallback = {MockGateway::Behavior::Kind::Delay, 500, AttemptOutcome::Delivered};
    mock.set_script(script);
    SessionService svc(http_defaults());
    const auto id = svc.create_session(json::object());
    const auto trace = golden_trace();
    const auto reference = replay(trace, run_config(AttemptOutcome::Timeout));
    const auto started = first<event::EscalationStarted>(reference);
    ASSERT_NE(started, nullptr);
    Trace head;
    for (const auto& r : trace) {
        if (r.t_ms <= started->t_ms + 5000) head.push_back(r);
    }
    svc.ingest(id, head);
    ASSERT_EQ(mock.requests().size(), 1u);
    svc.acknowledge(id);
    Trace rest;
    for (const auto& r : trace) {
        if (r.t_ms > started->t_ms + 5000) rest.push_back(r);
    }
    svc.ingest(id, rest);
    EXPECT_EQ(mock.requests().size(), 1u);
    const auto log = svc.event_log(id);
    const auto stopped = first<event::EscalationStopped>(log);
    ASSERT_NE(stopped, nullptr);
    EXPECT_EQ(stopped->cause, StopCause::Acknowledged);
    EXPECT_TRUE(attempt_ids(log).empty());
}

TEST(HttpGatewayNotifier, UnreachableGatewayIsFailed) {
    MockGateway probe;
    const int port = probe.start("127.0.0.1", 0);
    probe.stop();
    HttpGatewayNotifier notifier("http://127.0.0.1:" + std::to_string(port), "s", std::chrono::milliseconds(500));
    DispatchRequest req{0, Contact{"A", "A", "+1", ChannelPreference::Call, false}, Channel::Call};
    EXPECT_EQ(notifier.notify(req), AttemptOutcome::Failed);
}

TEST(HttpGatewayNotifier, SlowGatewayGivesNoAnswer) {
    MockGateway::Script script;
    script.fallback = {MockGateway::Behavior::Kind::Delay, 800, AttemptOutcome::Delivered};
    MockGateway mock(script);
    ASSERT_GT(mock.start("127.0.0.1", 0), 0);
    HttpGatewayNotifier notifier(mock.base_url(), "s", std::chrono::milliseconds(200));
    DispatchRequest req{0, Contact{"A", "A", "+1", ChannelPreference::Call, false}, Channel::Message};
    EXPECT_FALSE(notifier.notify(req));
    mock.stop();
}

TEST(MockGatewayScript, Parse) {
    const auto s = MockGateway::script_from_json(json::parse(R"({"default": {"behavior": "deliver"},
        "numbers": {"+1": {"behavior": "delay", "delay_ms": 30, "then": "fail"}}})"));
    EXPECT_EQ(s.fallback.kind, MockGateway::Behavior::Kind::Deliver);
    EXPECT_EQ(s.numbers.at("+1").delay_ms, 30);
    EXPECT_EQ(s.numbers.at("+1").then, AttemptOutcome::Failed);
    EXPECT_THROW(MockGateway::script_from_json({{"default", {{"behavior", "shrug"}}}}), InvalidConfig);
}

class HttpApiTest : public ::testing::Test {
protected:
    HttpApiTest() : svc(offline_defaults(), offline(AttemptOutcome::Timeout)), server(svc) {}
    void SetUp() override {
        port = server.start("127.0.0.1", 0);
        ASSERT_GT(port, 0);
    }
    void TearDown() override {
        svc.shutdown();
        server.stop();
    }
    httplib::Client client() { return httplib::Client("127.0.0.1", port); }
    std::string create(const json& body = json::object()) {
        auto res = client().Post("/sessions", body.dump(), "application/json");
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, 201);
        return json::parse(res->body)["id"];
    }

    SessionService svc;
    HttpServer server;
    int port = -1;
};

TEST_F(HttpApiTest, CsvIngestEqualsReplay) {
    const auto id = create();
    const auto trace = golden_trace();
    auto res = client().Post("/sessions/" + id + "/samples", write_trace(trace), "text/csv");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["accepted"], trace.size());
    auto events = client().Get("/sessions/" + id + "/events");
    ASSERT_TRUE(events);
    EXPECT_EQ(events->body, to_json_lines(replay(trace, run_config(AttemptOutcome::Timeout))));
}

TEST_F(HttpApiTest, JsonIngestAndState) {
    const auto id = create();
    json records = json::array();
    for (TimeMs t = 0; t < 5000; t += 1000) records.push_back(json(to_json(row(t))));
    auto res = client().Post("/sessions/" + id + "/samples", json{{"records", records}}.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto st = client().Get("/sessions/" + id + "/state");
    ASSERT_TRUE(st);
    const auto j = json::parse(st->body);
    EXPECT_EQ(j["now_ms"], 4000);
    EXPECT_EQ(st->get_header_value("Access-Control-Allow-Origin"), "*");
    auto list = client().Get("/sessions");
    EXPECT_EQ(json::parse(list->body).size(), 1u);
    EXPECT_EQ(client().Get("/healthz")->status, 200);
}

TEST_F(HttpApiTest, ErrorStatuses) {
    EXPECT_EQ(client().Get("/sessions/nope/state")->status, 404);
    EXPECT_EQ(client().Post("/sessions/nope/ack", "", "application/json")->status, 404);
    auto bad = client().Post("/sessions", R"({"detection": {"ack_window_s": 0}})", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(json::parse(bad->body)["field"], "ack_window_s");
    const auto id = create();
    client().Post("/sessions/" + id + "/samples", write_trace({row(0), row(5000)}), "text/csv");
    auto late = client().Post("/sessions/" + id + "/samples", write_trace({row(1000)}), "text/csv");
    EXPECT_EQ(late->status, 409);
    auto csv = client().Post("/sessions/" + id + "/samples", std::string(kTraceHeader) + "\n6000,x,0,1,70,40,\n",
                             "text/csv");
    EXPECT_EQ(csv->status, 400);
    EXPECT_EQ(json::parse(csv->body)["line"], 2);
    EXPECT_EQ(client().Post("/sessions/" + id + "/samples", "{not json", "application/json")->status, 400);
    EXPECT_EQ(client().Get("/sessions/" + id + "/events?offset=-1")->status, 400);
}

TEST_F(HttpApiTest, NdjsonOffset) {
    const auto id = create();
    svc.ingest(id, golden_trace());
    const auto all = svc.events_since(id, 0);
    auto res = client().Get("/sessions/" + id + "/events?offset=3");
    std::string expected;
    for (std::size_t i = 3; i < all.size(); ++i) expected += all[i] + '\n';
    EXPECT_EQ(res->body, expected);
}

TEST_F(HttpApiTest, TwoSseSubscribersSeeSameSequence) {
    const auto id = create();
    const auto trace = golden_trace();
    const auto expected = replay(trace, run_config(AttemptOutcome::Timeout)).size();
    auto subscribe = [&](std::size_t offset) {
        std::vector<std::string> ids, data;
        std::string buffer;
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        httplib::Headers headers{{"Accept", "text/event-stream"}};
        if (offset) headers.emplace("Last-Event-ID", std::to_string(offset));
        c.Get("/sessions/" + id + "/events", headers, [&](const char* d, std::size_t n) {
            buffer.append(d, n);
            std::size_t pos;
            while ((pos = buffer.find("\n\n")) != std::string::npos) {
                const auto msg = buffer.substr(0, pos);
                buffer.erase(0, pos + 2);
                std::istringstream lines(msg);
                std::string line;
                while (std::getline(lines, line)) {
                    if (line.rfind("id: ", 0) == 0) ids.push_back(line.substr(4));
                    if (line.rfind("data: ", 0) == 0) data.push_back(line.substr(6));
                }
            }
            return data.size() + offset < expected;
        });
        return std::make_pair(ids, data);
    };
    auto a = std::async(std::launch::async, subscribe, 0);
    auto b = std::async(std::launch::async, subscribe, 3);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    for (std::size_t i = 0; i < trace.size(); i += 60) svc.ingest(id, slice(trace, i, std::min(trace.size(), i + 60)));
    const auto [ids_a, data_a] = a.get();
    const auto [ids_b, data_b] = b.get();
    const auto all = svc.events_since(id, 0);
    ASSERT_EQ(data_a.size(), expected);
    EXPECT_EQ(data_a, all);
    EXPECT_EQ(data_b, std::vector<std::string>(all.begin() + 3, all.end()));
    for (std::size_t i = 0; i < ids_a.size(); ++i) EXPECT_EQ(ids_a[i], std::to_string(i + 1));
    EXPECT_EQ(ids_b.front(), "4");
}
