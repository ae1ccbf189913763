#include <gtest/gtest.h>

#include "comaguard/app_config.hpp"

using namespace comaguard;
using nlohmann::json;

namespace {

std::string field_of(const json& j) {
    try {
        app_config_from_json(j);
    } catch (const InvalidConfig& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST(AppConfig, ExampleLoadsWithDefaults) {
    const auto config = load_app_config(COMAGUARD_EXAMPLE_CONFIG);
    EXPECT_EQ(config.run.detection, DetectionConfig{});
    EXPECT_EQ(config.run.policy, EscalationPolicy{});
    EXPECT_EQ(config.service, ServiceOptions{});
    ASSERT_EQ(config.run.contacts.size(), 3u);
    EXPECT_TRUE(std::prev(config.run.contacts.end())->is_emergency);
}

TEST(AppConfig, EmptyDocumentIsDefaults) {
    const auto config = app_config_from_json(json::object());
    EXPECT_EQ(config.run.detection, DetectionConfig{});
    EXPECT_EQ(config.run.contacts.size(), 0u);
}

TEST(AppConfig, RoundTripsThroughJson) {
    auto config = load_app_config(COMAGUARD_EXAMPLE_CONFIG);
    config.run.detection.ack_window_s = 45;
    config.run.detection.session_start = TimeOfDay::hm(21, 30);
    config.run.gateway.per_contact["bob"] = AttemptOutcome::Delivered;
    const auto back = app_config_from_json(json::parse(to_json(config).dump()));
    EXPECT_EQ(back.run.detection, config.run.detection);
    EXPECT_EQ(back.run.gateway.per_contact, config.run.gateway.per_contact);
    EXPECT_EQ(to_json(back).dump(), to_json(config).dump());
}

TEST(AppConfig, UnknownKeysNameTheField) {
    EXPECT_EQ(field_of({{"bogus", 1}}), "bogus");
    EXPECT_EQ(field_of({{"detection", {{"ack_windw_s", 10}}}}), "ack_windw_s");
}

TEST(AppConfig, InvalidValuesNameTheField) {
    EXPECT_EQ(field_of({{"detection", {{"ack_window_s", 0}}}}), "ack_window_s");
    EXPECT_FALSE(field_of({{"detection", {{"ack_window_s", "sixty"}}}}).empty());
    EXPECT_FALSE(field_of({{"escalation", {{"max_rounds", 0}}}}).empty());
    EXPECT_FALSE(field_of({{"contacts", {{{"id", "a"}, {"number", "+1"}, {"channel", "fax"}}}}}).empty());
}

TEST(AppConfig, MissingFileThrows) {
    EXPECT_THROW(load_app_config("/nonexistent/comaguard.json"), Error);
}

TEST(TimeOfDay, ParseAndFormat) {
    EXPECT_EQ(parse_time_of_day("22:00", "x"), TimeOfDay::hm(22, 0));
    EXPECT_EQ(parse_time_of_day("07:05:30", "x").seconds, 7 * 3600 + 5 * 60 + 30);
    EXPECT_EQ(format_time_of_day(TimeOfDay::hm(7, 5)), "07:05");
    for (const char* bad : {"24:00", "7", "12:60", "ab:cd", ""}) {
        EXPECT_THROW(parse_time_of_day(bad, "x"), InvalidConfig) << bad;
    }
}

TEST(DailyWindow, WrapsMidnight) {
    DailyWindow w;
    EXPECT_TRUE(w.contains(TimeOfDay::hm(23, 0)));
    EXPECT_TRUE(w.contains(TimeOfDay::hm(3, 0)));
    EXPECT_FALSE(w.contains(TimeOfDay::hm(7, 0)));
    EXPECT_TRUE(w.contains(TimeOfDay::hm(22, 0)));
    DailyWindow day{TimeOfDay::hm(9, 0), TimeOfDay::hm(17, 0)};
    EXPECT_TRUE(day.contains(TimeOfDay::hm(12, 0)));
    EXPECT_FALSE(day.contains(TimeOfDay::hm(18, 0)));
}

TEST(DailyWindow, LocalTimeFromSessionStart) {
    DetectionConfig c;
    EXPECT_EQ(local_time_of_day(c, 0), TimeOfDay::hm(23, 0));
    EXPECT_EQ(local_time_of_day(c, 2 * 3600 * 1000), TimeOfDay::hm(1, 0));
}
