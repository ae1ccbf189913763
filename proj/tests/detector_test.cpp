#include <gtest/gtest.h>

#include "comaguard/detector.hpp"
#include "comaguard/oracle.hpp"
#include "comaguard/replay.hpp"
#include "comaguard/scenario.hpp"
#include "support.hpp"

using namespace comaguard;
using namespace comaguard::testing;

namespace {

EventLog step_all(Detector& d, const std::vector<InputEvent>& inputs) {
    EventLog out;
    for (const auto& in : inputs) {
        auto ev = d.step(in);
        out.insert(out.end(), ev.begin(), ev.end());
    }
    return out;
}

// 10 s of movement, then stillness with flat HR/RH until `still_until`, then an HR ramp of
// `ramp_per_min` bpm/min.
Trace coma_trace(TimeMs end_s, double ramp_per_min = 12.0, TimeMs ramp_from_s = 480) {
    Trace t;
    for (TimeMs s = 0; s < 10; ++s) t.push_back(moving_row(s * 1000, 72.0));
    for (TimeMs s = 10; s <= end_s; ++s) {
        double hr = 70.0 + (s % 2 ? 0.5 : -0.5);
        if (s > ramp_from_s) hr += ramp_per_min * (s - ramp_from_s) / 60.0;
        t.push_back(row(s * 1000, std::min(hr, 140.0), 40.0));
    }
    return t;
}

RunConfig config_with(ContactList contacts = abe(), AttemptOutcome outcome = AttemptOutcome::Failed) {
    RunConfig c;
    c.contacts = std::move(contacts);
    c.gateway.default_outcome = outcome;
    return c;
}

}  // namespace

TEST(Detector, FreshDetectorIsIdle) {
    Detector d(DetectionConfig{}, abe());
    EXPECT_EQ(d.current_kind(), StateKind::Idle);
    EXPECT_TRUE(d.history().empty());
    EXPECT_EQ(d.current_state(), d.current_state());
}

TEST(Detector, InvalidConfig) {
    DetectionConfig c;
    c.ack_window_s = 0;
    try {
        Detector d(c, abe());
        FAIL();
    } catch (const InvalidConfig& e) {
        EXPECT_EQ(e.field(), "ack_window_s");
    }
    DetectionConfig r;
    r.tachycardia_rel_factor = 0.9;
    EXPECT_THROW(Detector(r, abe()), InvalidConfig);
}

TEST(Detector, ActivityStartsSession) {
    Detector d(DetectionConfig{}, abe());
    const auto log = step_all(d, {input::Sample{{0, {0, 0, 0.8}, 70.0, 40.0}}, input::Sample{{1000, {0, 0, 1.2}, 70.0, 40.0}}});
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(std::get<event::StateChanged>(log[0]), (event::StateChanged{1000, StateKind::Idle, StateKind::Active}));
    EXPECT_EQ(d.current_kind(), StateKind::Active);
}

TEST(Detector, RejectsRegressingInput) {
    Detector d(DetectionConfig{}, abe());
    d.step(input::Tick{5000});
    EXPECT_THROW(d.step(input::Tick{4000}), NonMonotonicInput);
    d.step(input::Sample{still(5000)});
    EXPECT_THROW(d.step(input::Sample{still(5000)}), NonMonotonicInput);
    EXPECT_THROW(d.step(input::Sample{{6000, {0, 0, 1}, 400.0, 40.0}}), InvalidRecord);
    EXPECT_EQ(d.history().size(), 1u);
}

TEST(Detector, StillnessLeadsToImmobileThenVigil) {
    const auto log = replay(coma_trace(470), config_with());
    const auto* imm = first<event::StateChanged>(log);
    ASSERT_NE(imm, nullptr);
    std::vector<event::StateChanged> changes;
    for (const auto& e : log) {
        if (auto* s = std::get_if<event::StateChanged>(&e)) changes.push_back(*s);
    }
    ASSERT_EQ(changes.size(), 3u);
    EXPECT_EQ(changes[1].to, StateKind::Immobile);
    // Last moving frame is within the first 10 s; Immobile 300 s later, Vigil a baseline window after that.
    EXPECT_GE(changes[1].t_ms, 300000);
    EXPECT_LE(changes[1].t_ms, 320000);
    EXPECT_EQ(changes[2].to, StateKind::Vigil);
    EXPECT_EQ(changes[2].t_ms, changes[1].t_ms + 120000);
}

TEST(Detector, HeartRateLossEndsImmobility) {
    Trace t = coma_trace(330);
    const TimeMs off = t.back().t_ms;
    for (TimeMs s = 1; s <= 40; ++s) t.push_back(row(off + s * 1000, std::nullopt, std::nullopt));
    const auto log = replay(t, config_with());
    event::StateChanged last;
    for (const auto& e : log) {
        if (auto* s = std::get_if<event::StateChanged>(&e)) last = *s;
    }
    EXPECT_EQ(last.from, StateKind::Immobile);
    EXPECT_EQ(last.to, StateKind::Idle);
    // Newest HR at `off`; NotWorn once it leaves [t - 30 s, t].
    EXPECT_EQ(last.t_ms, off + 31000);
    EXPECT_EQ(count<event::AlarmRaised>(log), 0u);
}

TEST(Detector, HrRampInVigilRaisesAlarm) {
    const auto log = replay(coma_trace(700), config_with());
    ASSERT_EQ(count<event::AlarmRaised>(log), 1u);
    const auto* alarm = first<event::AlarmRaised>(log);
    EXPECT_TRUE(alarm->reasons.contains(DangerReason::TachycardiaTrend));
    EXPECT_TRUE(oracle::verify_events(coma_trace(700), config_with(), log).pass());
}

TEST(Detector, AckWithinWindowPreventsEscalation) {
    auto base = replay(coma_trace(900), config_with());
    const TimeMs raised = first<event::AlarmRaised>(base)->t_ms;
    Trace t = coma_trace(900);
    for (auto& r : t) {
        if (r.t_ms == raised + 30000) r.action = TraceAction::Ack;
    }
    const auto log = replay(t, config_with());
    ASSERT_EQ(count<event::AlarmAcknowledged>(log), 1u);
    EXPECT_EQ(first<event::AlarmAcknowledged>(log)->t_ms, raised + 30000);
    EXPECT_EQ(count<event::EscalationStarted>(log), 0u);
    EXPECT_EQ(count<event::ContactAttempt>(log), 0u);
}

TEST(Detector, EscalationStartsOneAckWindowAfterAlarm) {
    DetectionConfig c;
    Detector d(c, abe());
    const auto alarm_log = replay(coma_trace(700), config_with());
    const TimeMs raised = first<event::AlarmRaised>(alarm_log)->t_ms;
    // Drive the same records by hand, then only ticks.
    Trace t = coma_trace(700);
    OfflineGateway gw;
    Pipeline p(config_with(), gw);
    for (const auto& r : t) {
        if (r.t_ms > raised) break;
        p.feed(r);
    }
    auto ev = p.apply(input::Tick{raised + 59000});
    EXPECT_EQ(count<event::EscalationStarted>(ev), 0u);
    ev = p.apply(input::Tick{raised + 60000});
    ASSERT_GE(ev.size(), 2u);
    EXPECT_EQ(std::get<event::EscalationStarted>(ev[0]).t_ms, raised + 60000);
    EXPECT_EQ(std::get<event::StateChanged>(ev[1]).to, StateKind::Escalating);
}

TEST(Detector, MovementDoesNotCancelAlarm) {
    const auto base = replay(coma_trace(700), config_with());
    const TimeMs raised = first<event::AlarmRaised>(base)->t_ms;
    Trace t;
    for (const auto& r : coma_trace(700)) {
        if (r.t_ms <= raised) t.push_back(r);
    }
    for (TimeMs s = 1; s <= 90; ++s) t.push_back(moving_row(raised + s * 1000, 120.0));
    const auto log = replay(t, config_with());
    EXPECT_EQ(count<event::AlarmAcknowledged>(log), 0u);
    EXPECT_EQ(count<event::EscalationStarted>(log), 1u);
}

TEST(Detector, AckDuringEscalationStopsIt) {
    const auto base = replay(coma_trace(700), config_with(abe(), AttemptOutcome::Timeout));
    const TimeMs raised = first<event::AlarmRaised>(base)->t_ms;
    Trace t = coma_trace(900);
    for (auto& r : t) {
        if (r.t_ms == raised + 100000) r.action = TraceAction::Ack;
    }
    const auto log = replay(t, config_with(abe(), AttemptOutcome::Timeout));
    const auto* stop = first<event::EscalationStopped>(log);
    ASSERT_NE(stop, nullptr);
    EXPECT_EQ(stop->cause, StopCause::Acknowledged);
    EXPECT_EQ(stop->t_ms, raised + 100000);
    // One attempt closed at +91 s (dispatched +60, timed out after 31 s); the next was abandoned.
    EXPECT_EQ(count<event::ContactAttempt>(log), 1u);
    for (const auto& e : log) EXPECT_LE(timestamp_of(e), t.back().t_ms);
}

TEST(Detector, EmptyContactListExhaustsImmediately) {
    const auto log = replay(coma_trace(800), config_with(ContactList{}));
    const auto* stop = first<event::EscalationStopped>(log);
    ASSERT_NE(stop, nullptr);
    EXPECT_EQ(stop->cause, StopCause::Exhausted);
    EXPECT_EQ(stop->t_ms, first<event::EscalationStarted>(log)->t_ms);
    EXPECT_EQ(count<event::ContactAttempt>(log), 0u);
    EXPECT_EQ(std::get<event::StateChanged>(log.back()).to, StateKind::Idle);
}

TEST(Detector, NoAlarmWithoutWear) {
    for (auto kind : {ScenarioKind::HypoglycemicComa, ScenarioKind::RestfulSleep}) {
        auto t = generate_scenario({kind, default_duration_s(kind), 3});
        for (auto& r : t) r.hr_bpm.reset();
        const auto log = replay(t, config_with());
        EXPECT_EQ(count<event::AlarmRaised>(log), 0u);
    }
}

TEST(Detector, WearReminderOnlyInSleepWindowAndRateLimited) {
    RunConfig c = config_with();
    Trace t;
    for (TimeMs s = 0; s <= 4000; s += 1) t.push_back(row(s * 1000, std::nullopt, std::nullopt));
    auto log = replay(t, c);
    // 23:00 session start is inside 22:00-07:00; reminders every 1800 s.
    ASSERT_EQ(count<event::WearReminder>(log), 3u);
    std::vector<TimeMs> at;
    for (const auto& e : log) {
        if (auto* w = std::get_if<event::WearReminder>(&e)) at.push_back(w->t_ms);
    }
    EXPECT_EQ(at[1] - at[0], 1800000);
    EXPECT_EQ(at[2] - at[1], 1800000);

    c.detection.session_start = TimeOfDay::hm(12, 0);
    log = replay(t, c);
    EXPECT_EQ(count<event::WearReminder>(log), 0u);
}

TEST(Detector, CooldownSuppressesReAlarm) {
    RunConfig c = config_with();
    c.detection.immobility_duration_s = 30;
    c.detection.baseline_window_s = 40;
    const auto first_alarm = first<event::AlarmRaised>(replay(coma_trace(700), c));
    ASSERT_NE(first_alarm, nullptr);
    const TimeMs ack = first_alarm->t_ms + 10000;
    // Ack, settle back to 70 bpm, then a second ramp well inside the default cooldown.
    Trace t;
    for (const auto& r : coma_trace(700)) {
        if (r.t_ms > ack) break;
        t.push_back(r);
    }
    t.back().action = TraceAction::Ack;
    for (TimeMs s = 1; s <= 400; ++s) {
        const double hr = 70.0 + (s % 2 ? 0.5 : -0.5) + (s > 120 ? 12.0 * (s - 120) / 60.0 : 0.0);
        t.push_back(row(ack + s * 1000, std::min(hr, 140.0), 40.0));
    }
    auto log = replay(t, c);
    EXPECT_EQ(count<event::AlarmRaised>(log), 1u);
    EXPECT_EQ(count<event::AlarmAcknowledged>(log), 1u);

    c.detection.alarm_cooldown_s = 30;
    log = replay(t, c);
    EXPECT_EQ(count<event::AlarmRaised>(log), 2u);
    EXPECT_TRUE(oracle::verify_events(t, c, log).pass());
}

TEST(Detector, ReArmsAfterExhaustion) {
    Trace t = coma_trace(700);
    RunConfig c = config_with(abe(), AttemptOutcome::Failed);
    c.policy.max_rounds = 1;
    c.detection.alarm_cooldown_s = 1;
    auto log = replay(t, c);
    ASSERT_EQ(first<event::EscalationStopped>(log)->cause, StopCause::Exhausted);
    // A fresh activity, stillness and danger cycle.
    Trace second = t;
    const TimeMs base = t.back().t_ms + 1000;
    for (const auto& r : coma_trace(700)) {
        auto shifted = r;
        shifted.t_ms += base;
        second.push_back(shifted);
    }
    log = replay(second, c);
    EXPECT_EQ(count<event::AlarmRaised>(log), 2u);
    EXPECT_TRUE(oracle::check_safety_ordering(log).empty());
}
