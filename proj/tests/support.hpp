#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "comaguard/replay.hpp"

namespace comaguard::testing {

inline SensorSample still(TimeMs t, std::optional<double> hr = 70.0, std::optional<double> rh = 40.0) {
    return {t, {0.0, 0.0, 1.0}, hr, rh};
}

inline TraceRecord row(TimeMs t, std::optional<double> hr = 70.0, std::optional<double> rh = 40.0, double az = 1.0) {
    TraceRecord r;
    r.t_ms = t;
    r.az_g = az;
    r.hr_bpm = hr;
    r.skin_rh = rh;
    return r;
}

/// Alternating |a| of 0.8 and 1.2 g: motion energy 0.2 g.
inline TraceRecord moving_row(TimeMs t, std::optional<double> hr = 80.0) {
    auto r = row(t, hr, 40.0, (t / 1000) % 2 == 0 ? 0.8 : 1.2);
    return r;
}

inline ContactList abe(ChannelPreference pref = ChannelPreference::Call) {
    return ContactList({{"A", "A", "+1001", pref, false},
                        {"E", "Emergency", "+1112", ChannelPreference::Call, true},
                        {"B", "B", "+1002", pref, false}});
}

template <typename T>
std::size_t count(const EventLog& log) {
    std::size_t n = 0;
    for (const auto& e : log) n += std::holds_alternative<T>(e);
    return n;
}

template <typename T>
const T* first(const EventLog& log) {
    for (const auto& e : log) {
        if (const auto* p = std::get_if<T>(&e)) return p;
    }
    return nullptr;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("comaguard-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& name = "") const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace comaguard::testing
