#include <gtest/gtest.h>

#include <random>

#include "comaguard/escalation.hpp"
#include "support.hpp"

using namespace comaguard;
using comaguard::testing::abe;

namespace {

Contact c(std::string id, bool emergency = false, ChannelPreference pref = ChannelPreference::Call) {
    return {id, id, "+1" + id, pref, emergency};
}

std::vector<std::string> ids(const ContactList& list) {
    std::vector<std::string> out;
    for (const auto& x : list) out.push_back(x.id);
    return out;
}

}  // namespace

TEST(ContactList, EmergencyMovesLast) {
    EXPECT_EQ(ids(abe()), (std::vector<std::string>{"A", "B", "E"}));
    EXPECT_EQ(ids(ContactList({c("E", true), c("X"), c("Y")})), (std::vector<std::string>{"X", "Y", "E"}));
}

TEST(ContactList, Invalid) {
    EXPECT_THROW(ContactList({c("E1", true), c("E2", true)}), InvalidConfig);
    EXPECT_THROW(ContactList({c("A"), c("A")}), InvalidConfig);
    Contact no_number = c("A");
    no_number.number.clear();
    EXPECT_THROW(ContactList({no_number}), InvalidConfig);
}

TEST(EscalationPolicy, Validate) {
    EXPECT_NO_THROW(validate(EscalationPolicy{}));
    EXPECT_THROW(validate(EscalationPolicy{0, 3}), InvalidConfig);
    EXPECT_THROW(validate(EscalationPolicy{30, 0}), InvalidConfig);
}

TEST(EscalationRun, BeginsAtFirstContact) {
    EscalationRun run({}, abe(), 0);
    auto t = run.next_attempt(0);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->contact.id, "A");
    EXPECT_EQ(t->channel, Channel::Call);
    EXPECT_EQ(run.round(), 1);
}

TEST(EscalationRun, EmptyListIsExhausted) {
    EscalationRun run({}, ContactList{}, 0);
    EXPECT_TRUE(run.exhausted());
    EXPECT_FALSE(run.next_attempt(0));
}

TEST(EscalationRun, EmergencyOnlyList) {
    EscalationRun run({}, ContactList({c("E", true)}), 0);
    EXPECT_EQ(run.next_attempt(0)->contact.id, "E");
}

TEST(EscalationRun, TimeoutAdvancesAfterStrictlyMoreThanTimeout) {
    EscalationRun run({}, ContactList({c("A"), c("B")}), 0);
    ASSERT_EQ(run.next_attempt(0)->contact.id, "A");
    EXPECT_FALSE(run.next_attempt(30000));
    auto next = run.next_attempt(31000);
    ASSERT_TRUE(next);
    EXPECT_EQ(next->contact.id, "B");
    ASSERT_EQ(run.attempts().size(), 1u);
    EXPECT_EQ(run.attempts()[0], (AttemptRecord{31000, "A", Channel::Call, AttemptOutcome::Timeout}));
}

TEST(EscalationRun, ThreeRoundsOfFailuresGiveNineRecords) {
    EscalationRun run({30, 3}, abe(), 0);
    TimeMs t = 0;
    std::vector<std::string> order;
    while (auto target = run.next_attempt(t)) {
        order.push_back(target->contact.id);
        run.record_outcome(target->contact.id, AttemptOutcome::Failed, t);
        t += 1000;
    }
    EXPECT_TRUE(run.exhausted());
    EXPECT_EQ(run.attempts().size(), 9u);
    EXPECT_EQ(order, (std::vector<std::string>{"A", "B", "E", "A", "B", "E", "A", "B", "E"}));
}

TEST(EscalationRun, RecordOutcomeErrors) {
    EscalationRun run({}, abe(), 0);
    EXPECT_THROW(run.record_outcome("A", AttemptOutcome::Failed, 0), NoAttemptInFlight);
    run.next_attempt(0);
    EXPECT_THROW(run.record_outcome("B", AttemptOutcome::Failed, 0), UnknownContact);
    run.record_outcome("A", AttemptOutcome::Failed, 5);
    EXPECT_EQ(run.next_attempt(5)->contact.id, "B");
}

TEST(EscalationRun, DeliveredAdvancesButDoesNotStop) {
    EscalationRun run({}, abe(), 0);
    run.next_attempt(0);
    run.record_outcome("A", AttemptOutcome::Delivered, 3000);
    EXPECT_FALSE(run.exhausted());
    EXPECT_EQ(run.next_attempt(3000)->contact.id, "B");
}

TEST(EscalationRun, DeliveredThenCancelStopsAttempts) {
    EscalationRun run({}, abe(), 0);
    run.next_attempt(0);
    run.record_outcome("A", AttemptOutcome::Delivered, 3000);
    run.cancel(4000);
    EXPECT_THROW(run.next_attempt(5000), Cancelled);
    EXPECT_EQ(run.attempts().size(), 1u);
}

TEST(EscalationRun, CancelIsIdempotentAndFreezesLog) {
    EscalationRun fresh({}, abe(), 0);
    fresh.cancel(0);
    fresh.cancel(10);
    EXPECT_TRUE(fresh.cancelled());
    EXPECT_EQ(fresh.cancelled_at(), 0);
    EXPECT_TRUE(fresh.attempts().empty());

    EscalationRun mid({}, abe(), 0);
    mid.next_attempt(0);
    mid.record_outcome("A", AttemptOutcome::Failed, 1000);
    mid.next_attempt(1000);
    mid.cancel(2000);
    EXPECT_FALSE(mid.attempt_in_flight());
    EXPECT_EQ(mid.attempts().size(), 1u);
    EXPECT_THROW(mid.record_outcome("B", AttemptOutcome::Failed, 3000), NoAttemptInFlight);
}

TEST(EscalationRun, BothPreferenceFallsBackToMessage) {
    EscalationRun run({30, 1}, ContactList({c("A", false, ChannelPreference::Both), c("B")}), 0);
    auto t = run.next_attempt(0);
    EXPECT_EQ(t->channel, Channel::Call);
    run.record_outcome("A", AttemptOutcome::Failed, 1000);
    t = run.next_attempt(1000);
    EXPECT_EQ(t->contact.id, "A");
    EXPECT_EQ(t->channel, Channel::Message);
    run.record_outcome("A", AttemptOutcome::Delivered, 2000);
    EXPECT_EQ(run.next_attempt(2000)->contact.id, "B");
}

TEST(EscalationRun, MessageOnlyContact) {
    EscalationRun run({}, ContactList({c("A", false, ChannelPreference::Message)}), 0);
    EXPECT_EQ(run.next_attempt(0)->channel, Channel::Message);
}

// Random outcome sequences: contact visits follow the list repeated max_rounds times, and the
// emergency contact never comes before the others in its round.
TEST(EscalationRun, OrderIsPrefixOfRepeatedList) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const std::int64_t rounds = 1 + static_cast<std::int64_t>(rng() % 3);
        const auto pref = static_cast<ChannelPreference>(rng() % 3);
        ContactList list({c("E", true), c("A", false, pref), c("B", false, pref), c("C")});
        EscalationRun run({30, rounds}, list, 0);
        TimeMs t = 0;
        std::vector<std::string> visits;
        std::size_t steps = 0, cut = rng() % 20;
        while (auto target = run.next_attempt(t)) {
            if (visits.empty() || target->channel == Channel::Call || visits.back() != target->contact.id ||
                pref == ChannelPreference::Message) {
                visits.push_back(target->contact.id);
            }
            const auto roll = rng() % 3;
            if (roll == 0) {
                t += 31000;
            } else {
                run.record_outcome(target->contact.id, roll == 1 ? AttemptOutcome::Failed : AttemptOutcome::Delivered, t);
                t += 1000;
            }
            if (++steps == cut) {
                run.cancel(t);
                break;
            }
        }
        std::vector<std::string> expected;
        for (std::int64_t r = 0; r < rounds; ++r) {
            for (const auto& x : list) expected.push_back(x.id);
        }
        ASSERT_LE(visits.size(), expected.size());
        for (std::size_t i = 0; i < visits.size(); ++i) ASSERT_EQ(visits[i], expected[i]) << "trial " << trial;
        for (std::size_t i = 1; i < run.attempts().size(); ++i) {
            EXPECT_LE(run.attempts()[i - 1].t_ms, run.attempts()[i].t_ms);
        }
    }
}
