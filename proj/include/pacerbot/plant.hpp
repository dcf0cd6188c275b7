// Kinematic unicycle plant with first-order speed lag and per-step speed
// noise. Stands in for the low-level joint controller: it takes velocity
// commands and produces the pose the real robot would reach.
#pragma once

#include <cstdint>
#include <cmath>

#include "pacerbot/common.hpp"
#include "pacerbot/rng.hpp"
#include "pacerbot/track.hpp"

namespace pacerbot {

// Hardware forward-speed ceiling of the platform.
inline constexpr double kForwardSpeedMax = 2.6;

struct RobotState {
    double x = 0.0;      // m, world frame
    double y = 0.0;      // m
    double theta = 0.0;  // rad, heading, (-pi, pi]
    double speed = 0.0;  // m/s, actual forward speed
    double t = 0.0;      // s

    Vec2 position() const { return {x, y}; }
};

struct VelocityCommand {
    double forward = 0.0;   // m/s, [0, 2.6]
    double lateral = 0.0;   // m/s, reserved; zero in all pacing behaviors
    double yaw_rate = 0.0;  // rad/s
};

struct PlantNoiseParams {
    double speed_response_time = 0.4;  // s, first-order lag constant
    double speed_noise_std = 0.105;    // m/s per step at dt = 0.1
    double yaw_rate_limit = 1.5;       // rad/s
    std::uint64_t seed = 0;

    void validate() const {
        if (!(speed_response_time > 0.0)) throw ConfigError("plant: speed_response_time must be > 0");
        if (speed_noise_std < 0.0) throw ConfigError("plant: speed_noise_std must be >= 0");
        if (!(yaw_rate_limit > 0.0)) throw ConfigError("plant: yaw_rate_limit must be > 0");
    }

    double speed_hard_max() const { return kForwardSpeedMax + 4.0 * speed_noise_std; }
};

struct PlantStep {
    RobotState state;
    bool command_clamped = false;
};

/// Advances the plant one tick. Actual speed relaxes toward the commanded
/// forward speed with the configured lag, then picks up Gaussian noise;
/// heading integrates the (limited) yaw rate; position integrates speed
/// along the midpoint heading. Deterministic for a fixed rng sequence.
inline PlantStep step_plant(const RobotState& state, const VelocityCommand& cmd, double dt,
                            const PlantNoiseParams& noise, Rng& rng) {
    if (!(dt > 0.0) || dt > 0.5) throw std::invalid_argument("step_plant: dt must be in (0, 0.5]");

    PlantStep out;
    double target = cmd.forward;
    if (target < 0.0 || target > kForwardSpeedMax) {
        target = clamp(target, 0.0, kForwardSpeedMax);
        out.command_clamped = true;
    }

    RobotState next = state;
    const double decay = std::exp(-dt / noise.speed_response_time);
    double speed = target + (state.speed - target) * decay;
    if (noise.speed_noise_std > 0.0) speed += rng.gaussian() * noise.speed_noise_std;
    next.speed = clamp(speed, 0.0, noise.speed_hard_max());

    const double yaw = clamp(cmd.yaw_rate, -noise.yaw_rate_limit, noise.yaw_rate_limit);
    const double mid_theta = state.theta + 0.5 * yaw * dt;
    next.x = state.x + next.speed * dt * std::cos(mid_theta);
    next.y = state.y + next.speed * dt * std::sin(mid_theta);
    next.theta = normalize_angle(state.theta + yaw * dt);
    next.t = state.t + dt;
    out.state = next;
    return out;
}

/// Signed lateral offset of the robot from the followed lane line.
inline double lateral_offset(const RobotState& state, const TrackModel& track) {
    return signed_lateral_offset(state.position(), track);
}

}  // namespace pacerbot
