// Navigation policy: smoothed line observations -> PID yaw command, plus
// the target-speed passthrough into a velocity command.
#pragma once

#include <cmath>
#include <optional>

#include "pacerbot/common.hpp"
#include "pacerbot/perception.hpp"
#include "pacerbot/plant.hpp"

namespace pacerbot {

struct NavState {
    double ema_offset = 0.0;  // m
    double ema_angle = 0.0;   // rad
    int frames_since_detection = 0;
    double integral_term = 0.0;  // m*s
    double last_error = 0.0;     // m
};

struct NavGains {
    double kp = 1.2;  // rad/s per meter of error
    double ki = 0.0;
    double kd = 0.4;
    double lookahead = 1.0;     // m, weight of the heading-alignment term
    double smoothing_alpha = 0.3;
    int max_missed_frames = 15;
    double yaw_rate_limit = 1.5;   // rad/s, matches the plant limit
    double integral_limit = 2.0;   // m*s anti-windup clamp

    void validate() const {
        if (!(smoothing_alpha > 0.0) || smoothing_alpha > 1.0)
            throw ConfigError("nav: smoothing_alpha must be in (0, 1]");
        if (max_missed_frames < 1) throw ConfigError("nav: max_missed_frames must be >= 1");
        if (!(yaw_rate_limit > 0.0)) throw ConfigError("nav: yaw_rate_limit must be > 0");
    }
};

/// Exponential smoothing of the selected line. A missed frame holds the
/// previous estimate and bumps the miss counter.
inline NavState smooth_observation(const NavState& nav, const std::optional<LineCandidate>& candidate,
                                   double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("smooth_observation: alpha in (0, 1]");
    NavState next = nav;
    if (candidate) {
        next.ema_offset = alpha * candidate->offset_m + (1.0 - alpha) * nav.ema_offset;
        next.ema_angle = alpha * candidate->angle_from_vertical + (1.0 - alpha) * nav.ema_angle;
        next.frames_since_detection = 0;
    } else {
        next.frames_since_detection = nav.frames_since_detection + 1;
    }
    return next;
}

struct HeadingDecision {
    double yaw_rate = 0.0;
    bool lost_line = false;
};

/// PID on the combined error e = offset + lookahead * tan(angle). Positive
/// error means the robot is left of (or pointing left of) the line, so the
/// command steers right (negative yaw). After max_missed_frames consecutive
/// misses the command is zeroed and the lost-line flag raised for the
/// supervisor to abort on.
inline HeadingDecision heading_command(NavState& nav, const NavGains& gains, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("heading_command: dt must be > 0");
    if (nav.frames_since_detection > gains.max_missed_frames) return {0.0, true};

    const double angle = clamp(nav.ema_angle, -1.4, 1.4);
    const double error = nav.ema_offset + gains.lookahead * std::tan(angle);
    nav.integral_term = clamp(nav.integral_term + error * dt, -gains.integral_limit, gains.integral_limit);
    const double derivative = (error - nav.last_error) / dt;
    nav.last_error = error;

    const double raw = -(gains.kp * error + gains.ki * nav.integral_term + gains.kd * derivative);
    return {clamp(raw, -gains.yaw_rate_limit, gains.yaw_rate_limit), false};
}

struct VelocityDecision {
    VelocityCommand command;
    bool speed_clamped = false;
};

/// Wraps the scheduled target speed and yaw command into the plant command.
inline VelocityDecision velocity_command(double target_speed, double yaw_rate) {
    VelocityDecision out;
    out.command.yaw_rate = yaw_rate;
    out.command.lateral = 0.0;
    if (target_speed < 0.0 || target_speed > kForwardSpeedMax) {
        out.command.forward = clamp(target_speed, 0.0, kForwardSpeedMax);
        out.speed_clamped = true;
    } else {
        out.command.forward = target_speed;
    }
    return out;
}

}  // namespace pacerbot
