#include "comaguard/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace comaguard::oracle {

namespace {

TimeMs ms(std::int64_t seconds) {
    return seconds * 1000;
}

// First index whose timestamp is > bound.
std::size_t first_after(std::span<const SensorSample> h, TimeMs bound) {
    auto it = std::upper_bound(h.begin(), h.end(), bound,
                               [](TimeMs b, const SensorSample& s) { return b < s.t_ms; });
    return static_cast<std::size_t>(it - h.begin());
}

// First index whose timestamp is >= bound.
std::size_t first_at_or_after(std::span<const SensorSample> h, TimeMs bound) {
    auto it = std::lower_bound(h.begin(), h.end(), bound,
                               [](const SensorSample& s, TimeMs b) { return s.t_ms < b; });
    return static_cast<std::size_t>(it - h.begin());
}

double sorted_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

bool naive_worn(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config) {
    const TimeMs lo = t - ms(config.hr_absence_timeout_s);
    for (const auto& s : history) {
        if (s.hr_bpm && s.t_ms >= lo && s.t_ms <= t) return true;
    }
    return false;
}

FeatureFrame naive_frame(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config) {
    const std::size_t end = first_after(history, t);
    const auto upto = history.first(end);

    FeatureFrame f;
    f.t_ms = t;

    // Activity window (t - W, t].
    const std::size_t a0 = first_after(upto, t - ms(config.activity_window_s));
    const std::size_t n = upto.size() - a0;
    if (n >= 2) {
        double sum = 0.0;
        for (std::size_t i = a0; i < upto.size(); ++i) sum += upto[i].accel.norm();
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = a0; i < upto.size(); ++i) {
            const double d = upto[i].accel.norm() - mean;
            ss += d * d;
        }
        f.motion_energy_g = std::sqrt(ss / static_cast<double>(n));
    }
    f.moving = f.motion_energy_g > config.motion_threshold_g;

    // Freshness [t - timeout, t].
    const std::size_t fresh = first_at_or_after(upto, t - ms(config.hr_absence_timeout_s));
    for (std::size_t i = upto.size(); i-- > fresh;) {
        if (!f.hr_now && upto[i].hr_bpm) f.hr_now = upto[i].hr_bpm;
        if (!f.rh_now && upto[i].skin_rh) f.rh_now = upto[i].skin_rh;
    }
    f.worn = naive_worn(upto, t, config);

    // Trend window (t - W, t].
    std::vector<std::pair<TimeMs, double>> pts;
    for (std::size_t i = first_after(upto, t - ms(config.hr_trend_window_s)); i < upto.size(); ++i) {
        if (upto[i].hr_bpm) pts.emplace_back(upto[i].t_ms, *upto[i].hr_bpm);
    }
    const auto need = static_cast<std::size_t>(std::max<std::int64_t>(config.min_slope_samples, 2));
    if (pts.size() >= need && pts.back().first - pts.front().first >= ms(config.hr_trend_window_s) / 2) {
        const TimeMs t0 = pts.front().first;
        const double count = static_cast<double>(pts.size());
        double sx = 0.0, sy = 0.0;
        for (const auto& [pt, bpm] : pts) {
            sx += static_cast<double>(pt - t0) / 60000.0;
            sy += bpm;
        }
        const double xbar = sx / count;
        const double ybar = sy / count;
        double sxy = 0.0, sxx = 0.0;
        for (const auto& [pt, bpm] : pts) {
            const double dx = static_cast<double>(pt - t0) / 60000.0 - xbar;
            sxy += dx * (bpm - ybar);
            sxx += dx * dx;
        }
        f.hr_slope_bpm_per_min = sxy / sxx;
    }
    return f;
}

Baselines naive_baselines(std::span<const SensorSample> history, TimeMs t, const DetectionConfig& config) {
    std::vector<double> hr, rh;
    for (const auto& s : history) {
        if (s.t_ms <= t - ms(config.baseline_window_s) || s.t_ms > t) continue;
        if (s.hr_bpm) hr.push_back(*s.hr_bpm);
        if (s.skin_rh) rh.push_back(*s.skin_rh);
    }
    Baselines b;
    const auto need = static_cast<std::size_t>(config.min_baseline_samples);
    if (hr.size() >= need) {
        b.hr_baseline_bpm = sorted_median(hr);
        b.established_at_ms = t;
        if (rh.size() >= need) b.rh_baseline_pct = sorted_median(rh);
    }
    return b;
}

namespace {

/// The flowchart written out long-hand over naive features.
class NaiveMachine {
public:
    explicit NaiveMachine(const RunConfig& config) : cfg_(config), det_(config.detection) {}

    void sample(const SensorSample& s) {
        history_.push_back(s);
        on_input(s.t_ms, true, false, nullptr);
    }
    void tick(TimeMs t) { on_input(t, false, false, nullptr); }
    void ack(TimeMs t) { on_input(t, false, true, nullptr); }

    /// Offline gateway answers for freshly started attempts, at the current time.
    void answer_pending(TimeMs t) {
        while (inflight_ && !inflight_->asked) {
            inflight_->asked = true;
            const auto outcome = cfg_.gateway.outcome_for(cfg_.contacts[inflight_->idx].id);
            if (!outcome) return;
            const input::AttemptResult r{t, cfg_.contacts[inflight_->idx].id, *outcome};
            on_input(t, false, false, &r);
        }
    }

    EventLog log;

private:
    struct Inflight {
        std::size_t idx;
        Channel channel;
        TimeMs started;
        bool asked;
    };

    void go(StateKind to, TimeMs t) {
        log.push_back(event::StateChanged{t, state_, to});
        state_ = to;
    }

    bool worn(TimeMs t) const { return naive_worn(history_, t, det_); }

    void close_attempt(AttemptOutcome outcome, TimeMs t) {
        const Contact& c = cfg_.contacts[inflight_->idx];
        log.push_back(event::ContactAttempt{t, c.id, inflight_->channel, outcome});
        const bool retry_by_message = c.channel_preference == ChannelPreference::Both &&
                                      inflight_->channel == Channel::Call && outcome != AttemptOutcome::Delivered;
        inflight_.reset();
        if (retry_by_message) {
            fallback_ = true;
            return;
        }
        fallback_ = false;
        if (++pos_ == cfg_.contacts.size()) {
            pos_ = 0;
            ++round_;
        }
    }

    void drive(TimeMs t) {
        if (inflight_ && t - inflight_->started > ms(cfg_.policy.per_contact_timeout_s)) {
            close_attempt(AttemptOutcome::Timeout, t);
        }
        if (inflight_) return;
        if (cfg_.contacts.empty() || round_ > cfg_.policy.max_rounds) {
            log.push_back(event::EscalationStopped{t, StopCause::Exhausted});
            go(StateKind::Idle, t);
            return;
        }
        const Contact& c = cfg_.contacts[pos_];
        Channel ch = c.channel_preference == ChannelPreference::Message ? Channel::Message : Channel::Call;
        if (fallback_) ch = Channel::Message;
        inflight_ = Inflight{pos_, ch, t, false};
    }

    void on_input(TimeMs t, bool is_sample, bool is_ack, const input::AttemptResult* result) {
        const FeatureFrame frame = is_sample ? naive_frame(history_, t, det_) : FeatureFrame{};
        const bool moving = is_sample && frame.moving;

        switch (state_) {
            case StateKind::Idle:
                if (moving) {
                    active_since_ = t;
                    go(StateKind::Active, t);
                }
                break;
            case StateKind::Active:
                if (moving) {
                    active_since_ = t;
                } else if (t - active_since_ >= ms(det_.immobility_duration_s)) {
                    immobile_at_ = t;
                    go(StateKind::Immobile, t);
                }
                break;
            case StateKind::Immobile:
                if (moving) {
                    active_since_ = t;
                    go(StateKind::Active, t);
                } else if (!worn(t)) {
                    go(StateKind::Idle, t);
                } else if (t - immobile_at_ >= ms(det_.baseline_window_s)) {
                    const Baselines b = naive_baselines(history_, t, det_);
                    if (b.hr_baseline_bpm) {
                        baselines_ = b;
                        go(StateKind::Vigil, t);
                    }
                }
                break;
            case StateKind::Vigil:
                if (moving) {
                    active_since_ = t;
                    go(StateKind::Active, t);
                } else if (!worn(t)) {
                    go(StateKind::Idle, t);
                } else if (is_sample) {
                    DangerSet d;
                    const double floor_bpm =
                        std::max(det_.tachycardia_abs_bpm, det_.tachycardia_rel_factor * *baselines_.hr_baseline_bpm);
                    if (frame.hr_slope_bpm_per_min && frame.hr_now &&
                        *frame.hr_slope_bpm_per_min >= det_.hr_slope_min_bpm_per_min && *frame.hr_now >= floor_bpm) {
                        d.insert(DangerReason::TachycardiaTrend);
                    }
                    if (frame.rh_now && baselines_.rh_baseline_pct &&
                        *frame.rh_now - *baselines_.rh_baseline_pct >= det_.moisture_rise_pct) {
                        d.insert(DangerReason::MoistureRise);
                    }
                    const bool cooling = last_ack_ && t - *last_ack_ < ms(det_.alarm_cooldown_s);
                    if (!d.empty() && !cooling) {
                        alarm_at_ = t;
                        log.push_back(event::AlarmRaised{t, d});
                        go(StateKind::LocalAlarm, t);
                    }
                }
                break;
            case StateKind::LocalAlarm:
                if (t - alarm_at_ < ms(det_.ack_window_s)) {
                    if (is_ack) {
                        last_ack_ = t;
                        log.push_back(event::AlarmAcknowledged{t});
                        active_since_ = t;
                        go(StateKind::Active, t);
                    }
                    break;
                }
                log.push_back(event::EscalationStarted{t});
                go(StateKind::Escalating, t);
                pos_ = 0;
                round_ = 1;
                fallback_ = false;
                inflight_.reset();
                [[fallthrough]];
            case StateKind::Escalating:
                if (is_ack) {
                    inflight_.reset();
                    last_ack_ = t;
                    log.push_back(event::EscalationStopped{t, StopCause::Acknowledged});
                    active_since_ = t;
                    go(StateKind::Active, t);
                    break;
                }
                if (result && inflight_ && cfg_.contacts[inflight_->idx].id == result->contact_id) {
                    close_attempt(result->outcome, t);
                }
                drive(t);
                break;
        }

        if (state_ == StateKind::Idle && det_.sleep_window.contains(local_time_of_day(det_, t)) && !worn(t) &&
            (!last_reminder_ || t - *last_reminder_ >= ms(det_.reminder_interval_s))) {
            last_reminder_ = t;
            log.push_back(event::WearReminder{t});
        }
    }

    const RunConfig& cfg_;
    const DetectionConfig& det_;
    std::vector<SensorSample> history_;
    StateKind state_ = StateKind::Idle;
    TimeMs active_since_ = 0;
    TimeMs immobile_at_ = 0;
    TimeMs alarm_at_ = 0;
    Baselines baselines_;
    std::optional<TimeMs> last_ack_;
    std::optional<TimeMs> last_reminder_;
    std::size_t pos_ = 0;
    std::int64_t round_ = 1;
    bool fallback_ = false;
    std::optional<Inflight> inflight_;
};

std::string describe(const OutputEvent& e) {
    return to_json_line(e);
}

OutputEvent without_time(OutputEvent e) {
    std::visit([](auto& ev) { ev.t_ms = 0; }, e);
    return e;
}

}  // namespace

EventLog naive_event_log(const Trace& trace, const RunConfig& config, std::int64_t tick_period_s) {
    NaiveMachine m(config);
    const TimeMs period = ms(tick_period_s);
    std::optional<TimeMs> last;
    for (const auto& r : trace) {
        if (last) {
            // Aligned ticks strictly between consecutive records.
            for (TimeMs k = *last / period + 1; k * period < r.t_ms; ++k) {
                m.tick(k * period);
                m.answer_pending(k * period);
            }
        }
        m.sample(r.sample());
        m.answer_pending(r.t_ms);
        if (r.is_ack()) {
            m.ack(r.t_ms);
            m.answer_pending(r.t_ms);
        }
        last = r.t_ms;
    }
    return std::move(m.log);
}

std::string_view to_string(DivergenceKind k) noexcept {
    switch (k) {
        case DivergenceKind::Ordering: return "ordering";
        case DivergenceKind::Timing: return "timing";
        case DivergenceKind::Mismatch: return "mismatch";
        case DivergenceKind::Missing: return "missing";
        case DivergenceKind::Extra: return "extra";
    }
    return "mismatch";
}

std::vector<Divergence> check_safety_ordering(const EventLog& log) {
    std::vector<Divergence> out;
    bool alarm_open = false;
    bool escalating = false;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log[i];
        if (i > 0 && timestamp_of(e) < timestamp_of(log[i - 1])) {
            out.push_back({DivergenceKind::Ordering, i, "timestamp decreases: " + describe(e)});
        }
        if (std::holds_alternative<event::AlarmRaised>(e)) {
            alarm_open = true;
            escalating = false;
        } else if (std::holds_alternative<event::AlarmAcknowledged>(e)) {
            alarm_open = false;
        } else if (std::holds_alternative<event::EscalationStarted>(e)) {
            if (!alarm_open) out.push_back({DivergenceKind::Ordering, i, "escalation without alarm: " + describe(e)});
            escalating = true;
        } else if (std::holds_alternative<event::ContactAttempt>(e)) {
            if (!escalating || !alarm_open) {
                out.push_back({DivergenceKind::Ordering, i, "contact attempt outside escalation: " + describe(e)});
            }
        } else if (std::holds_alternative<event::EscalationStopped>(e)) {
            escalating = false;
            alarm_open = false;
        }
    }
    return out;
}

VerifyResult verify_events(const Trace& trace, const RunConfig& config, const EventLog& log,
                           std::int64_t tick_period_s) {
    VerifyResult result;
    result.divergences = check_safety_ordering(log);

    const EventLog expected = naive_event_log(trace, config, tick_period_s);
    const std::size_t common = std::min(expected.size(), log.size());
    for (std::size_t i = 0; i < common; ++i) {
        if (log[i] == expected[i]) continue;
        const bool same_but_time = without_time(log[i]) == without_time(expected[i]);
        result.divergences.push_back({same_but_time ? DivergenceKind::Timing : DivergenceKind::Mismatch, i,
                                      "expected " + describe(expected[i]) + ", got " + describe(log[i])});
        return result;
    }
    if (expected.size() > log.size()) {
        result.divergences.push_back(
            {DivergenceKind::Missing, log.size(), "log ends early; next expected " + describe(expected[log.size()])});
    } else if (log.size() > expected.size()) {
        result.divergences.push_back(
            {DivergenceKind::Extra, expected.size(), "unexpected trailing event " + describe(log[expected.size()])});
    }
    return result;
}

std::vector<FeatureMismatch> verify_features(const Trace& trace, const DetectionConfig& config, double tolerance) {
    std::vector<FeatureMismatch> out;
    features::FeatureTracker tracker(config);
    std::vector<SensorSample> history;
    history.reserve(trace.size());

    const auto scalar = [&](TimeMs t, const char* field, const std::optional<double>& a,
                            const std::optional<double>& b, double tol) {
        if (a.has_value() != b.has_value()) {
            out.push_back({t, field, "presence differs"});
        } else if (a && std::fabs(*a - *b) > tol) {
            std::ostringstream ss;
            ss.precision(17);
            ss << "streaming " << *a << " vs naive " << *b;
            out.push_back({t, field, ss.str()});
        }
    };

    for (const auto& r : trace) {
        const SensorSample s = r.sample();
        history.push_back(s);
        const FeatureFrame got = tracker.push(s);
        const FeatureFrame want = naive_frame(history, s.t_ms, config);
        scalar(s.t_ms, "motion_energy_g", got.motion_energy_g, want.motion_energy_g, tolerance);
        if (got.moving != want.moving) out.push_back({s.t_ms, "moving", "boolean differs"});
        if (got.worn != want.worn) out.push_back({s.t_ms, "worn", "boolean differs"});
        scalar(s.t_ms, "hr_now", got.hr_now, want.hr_now, 0.0);
        scalar(s.t_ms, "rh_now", got.rh_now, want.rh_now, 0.0);
        scalar(s.t_ms, "hr_slope_bpm_per_min", got.hr_slope_bpm_per_min, want.hr_slope_bpm_per_min, tolerance);

        const Baselines bg = tracker.baselines_at(s.t_ms);
        const Baselines bw = naive_baselines(history, s.t_ms, config);
        scalar(s.t_ms, "hr_baseline_bpm", bg.hr_baseline_bpm, bw.hr_baseline_bpm, tolerance);
        scalar(s.t_ms, "rh_baseline_pct", bg.rh_baseline_pct, bw.rh_baseline_pct, tolerance);
    }
    return out;
}

}  // namespace comaguard::oracle
