// Training protocol: gap-rate speed calibration, pace computation with the
// platform cap, and the alternating interval schedule with pre-change cues.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pacerbot/common.hpp"
#include "pacerbot/perception.hpp"

namespace pacerbot {

struct CalibrationConfig {
    double initial_speed = 1.5;  // m/s, fixed starting pace
    double u_min = 0.5;          // m/s, commanded-speed clamp
    double u_max = 2.5;
    double gain = 0.05;          // speed decrement per (m of gap change / dt)
    double deadband = 0.05;      // m of gap change ignored as noise
    double duration = 30.0;      // s
    double meas_period = 0.5;    // s between range measurements

    void validate() const {
        if (!(gain > 0.0)) throw ConfigError("calibration: gain must be > 0");
        if (deadband < 0.0) throw ConfigError("calibration: deadband must be >= 0");
        if (!(u_min > 0.0) || !(u_max > u_min)) throw ConfigError("calibration: need 0 < u_min < u_max");
        if (!(duration > 0.0)) throw ConfigError("calibration: duration must be > 0");
        if (!(meas_period > 0.0)) throw ConfigError("calibration: meas_period must be > 0");
        if (initial_speed < u_min || initial_speed > u_max)
            throw ConfigError("calibration: initial_speed outside [u_min, u_max]");
    }
};

struct CalibrationState {
    double current_speed = 1.5;  // m/s
    std::optional<double> prev_distance;  // m
    std::vector<std::pair<double, double>> speed_history;  // (t, commanded speed)
    double duration = 0.0;  // s elapsed
};

/// One calibration tick: a widening gap slows the robot, a narrowing one
/// speeds it up, changes inside the deadband are ignored, and an absent
/// measurement leaves the speed untouched. The commanded speed is recorded
/// every step.
inline CalibrationState calibration_step(const CalibrationState& cal, const RunnerMeasurement& meas,
                                         double dt, double gain, double deadband,
                                         double u_min = 0.5, double u_max = 2.5) {
    if (!(dt > 0.0)) throw std::invalid_argument("calibration_step: dt must be > 0");
    if (!(gain > 0.0)) throw std::invalid_argument("calibration_step: gain must be > 0");

    CalibrationState next = cal;
    if (meas.distance) {
        if (cal.prev_distance) {
            const double delta = *meas.distance - *cal.prev_distance;
            if (std::fabs(delta) > deadband)
                next.current_speed = clamp(cal.current_speed - gain * delta / dt, u_min, u_max);
        }
        next.prev_distance = *meas.distance;
    }
    next.duration = cal.duration + dt;
    next.speed_history.emplace_back(next.duration, next.current_speed);
    return next;
}

/// Time-weighted mean commanded speed over the final 80% of the session
/// (initial transient discarded). Each history entry holds over the step
/// that ends at its timestamp.
inline double finalize_calibration(const CalibrationState& cal) {
    if (cal.duration < 10.0)
        throw CalibrationError("calibration session shorter than 10 s");
    const double cut = 0.2 * cal.duration;
    double weighted = 0.0, total = 0.0;
    double prev_t = 0.0;
    for (const auto& [t, u] : cal.speed_history) {
        const double lo = std::max(prev_t, cut);
        if (t > lo) {
            weighted += u * (t - lo);
            total += t - lo;
        }
        prev_t = t;
    }
    if (!(total > 0.0)) throw CalibrationError("calibration history empty past the transient window");
    return weighted / total;
}

struct PaceProfile {
    double u_bar = 0.0;   // m/s, calibrated comfortable pace
    double u_slow = 0.0;  // m/s, recovery pace
    double u_fast = 0.0;  // m/s, challenge pace
    double delta_u = 0.5; // m/s
    double cap = 2.5;     // m/s platform cap on the fast pace
};

/// Recovery and challenge paces from the calibrated pace. The fast pace is
/// capped; a slow pace under u_floor rejects the session.
inline PaceProfile compute_paces(double u_bar, double delta_u = 0.5, double cap = 2.5,
                                 double u_floor = 0.5) {
    PaceProfile p;
    p.u_bar = u_bar;
    p.delta_u = delta_u;
    p.cap = cap;
    p.u_slow = u_bar - delta_u;
    p.u_fast = std::min(u_bar + delta_u, cap);
    if (p.u_slow < u_floor)
        throw CalibrationError("pace too slow: recovery pace " + std::to_string(p.u_slow) +
                               " m/s is below the floor");
    return p;
}

struct IntervalSchedule {
    enum class Label { Slow, Fast };
    struct Segment {
        Label label = Label::Slow;
        double duration = 30.0;  // s
    };
    std::vector<Segment> segments;
    double cue_lead = 3.0;  // s before each transition

    double total_duration() const {
        double sum = 0.0;
        for (const auto& seg : segments) sum += seg.duration;
        return sum;
    }
    void validate() const {
        if (segments.empty()) throw ConfigError("schedule: no segments");
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (!(segments[i].duration > 0.0)) throw ConfigError("schedule: segment duration must be > 0");
            if (i > 0 && segments[i].label == segments[i - 1].label)
                throw ConfigError("schedule: labels must alternate");
        }
        if (cue_lead < 0.0) throw ConfigError("schedule: cue_lead must be >= 0");
    }
};

inline const char* label_name(IntervalSchedule::Label l) {
    return l == IntervalSchedule::Label::Slow ? "slow" : "fast";
}

inline IntervalSchedule make_alternating_schedule(int segments, double segment_duration,
                                                  bool slow_first, double cue_lead) {
    IntervalSchedule sched;
    sched.cue_lead = cue_lead;
    for (int i = 0; i < segments; ++i) {
        const bool slow = slow_first ? (i % 2 == 0) : (i % 2 == 1);
        sched.segments.push_back({slow ? IntervalSchedule::Label::Slow : IntervalSchedule::Label::Fast,
                                  segment_duration});
    }
    return sched;
}

inline double pace_for(IntervalSchedule::Label label, const PaceProfile& profile) {
    return label == IntervalSchedule::Label::Slow ? profile.u_slow : profile.u_fast;
}

struct CueEvent {
    std::size_t upcoming_segment = 0;
    IntervalSchedule::Label upcoming_label = IntervalSchedule::Label::Slow;
    double upcoming_speed = 0.0;  // m/s
    double at_time = 0.0;         // s, when the cue fired
};

// Per-session cue bookkeeping so each transition is announced exactly once.
struct ScheduleCursor {
    std::size_t next_cue = 1;  // index of the next segment to announce
};

struct ScheduleQuery {
    double target_speed = 0.0;
    std::size_t segment_index = 0;
    IntervalSchedule::Label label = IntervalSchedule::Label::Slow;
    std::optional<CueEvent> cue;
    bool complete = false;
};

/// Active target speed at session time t, plus the one-shot pre-transition
/// cue when t has entered a cue window the cursor has not announced yet.
/// Past the end of the schedule, reports completion with a stop target.
inline ScheduleQuery schedule_target(const IntervalSchedule& sched, const PaceProfile& profile,
                                     double t, ScheduleCursor& cursor) {
    ScheduleQuery q;
    double boundary = 0.0;
    std::size_t index = sched.segments.size();
    for (std::size_t i = 0; i < sched.segments.size(); ++i) {
        boundary += sched.segments[i].duration;
        if (t < boundary) {
            index = i;
            break;
        }
    }
    if (index == sched.segments.size()) {
        q.complete = true;
        q.segment_index = sched.segments.empty() ? 0 : sched.segments.size() - 1;
        q.target_speed = 0.0;
        return q;
    }
    q.segment_index = index;
    q.label = sched.segments[index].label;
    q.target_speed = pace_for(q.label, profile);

    if (cursor.next_cue < sched.segments.size()) {
        double cue_boundary = 0.0;
        for (std::size_t i = 0; i < cursor.next_cue; ++i) cue_boundary += sched.segments[i].duration;
        if (t >= cue_boundary - sched.cue_lead) {
            CueEvent cue;
            cue.upcoming_segment = cursor.next_cue;
            cue.upcoming_label = sched.segments[cursor.next_cue].label;
            cue.upcoming_speed = pace_for(cue.upcoming_label, profile);
            cue.at_time = t;
            q.cue = cue;
            ++cursor.next_cue;
        }
    }
    return q;
}

}  // namespace pacerbot
