// Simulated runner behavior for the three study conditions. Runners move in
// one dimension along the track line; only their speed dynamics differ.
//
//  - FollowRobot: pursues the pacing robot. While the robot leads it
//    regulates the following gap around preferred_gap and so matches the
//    robot's speed at steady state. During calibration the human leads:
//    the runner holds its natural pace (with a weak crowding tendency and a
//    no-passing constraint), which is the signal the calibration law reads.
//  - WearableFeedback: glances at a wrist display every few seconds and
//    overcorrects toward the announced target based on a stale, quantized
//    speed readout.
//  - Control: no feedback; mean-reverts to a remembered target that is
//    re-anchored with error at every proctor announcement and drifts
//    in between.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>

#include "pacerbot/common.hpp"
#include "pacerbot/rng.hpp"

namespace pacerbot {

inline constexpr double kRunnerSpeedMax = 4.0;

enum class RunnerModel { FollowRobot, WearableFeedback, Control };

inline const char* runner_model_name(RunnerModel m) {
    switch (m) {
        case RunnerModel::FollowRobot: return "robot";
        case RunnerModel::WearableFeedback: return "wearable";
        case RunnerModel::Control: return "control";
    }
    return "?";
}

struct RunnerModelParams {
    RunnerModel model = RunnerModel::FollowRobot;
    double reaction_delay = 0.4;   // s, visual reaction to the robot
    double noise_std = 0.18;       // m/s per sqrt(s), speed diffusion
    double pursuit_tau = 0.5;      // s, first-order speed response
    double gap_gain = 0.3;         // 1/s, pursuit correction per m of gap error
    double crowd_gain = 0.03;      // 1/s, calibration-phase crowding tendency
    double min_gap = 0.5;          // m, never passes closer than this
    double capability_headroom = 0.8;  // m/s above natural pace the runner can hold
    double correction_gain = 1.4;  // wearable overcorrection factor
    double display_latency = 1.0;  // s, staleness of the wrist readout
    double display_quantum = 0.1;  // m/s display resolution
    double glance_period = 6.0;    // s between wearable glances
    double drift_rate = 0.01;      // m/s per sqrt(s), pace-memory random walk
    double memory_std = 0.4;       // m/s, error re-anchoring the remembered pace
    double mean_reversion = 1.0;   // 1/s, pull toward the remembered/set pace
    std::uint64_t seed = 0;

    void validate() const {
        if (reaction_delay < 0.0 || display_latency < 0.0 || glance_period < 0.0)
            throw ConfigError("runner: time constants must be >= 0");
        if (!(pursuit_tau > 0.0)) throw ConfigError("runner: pursuit_tau must be > 0");
        if (noise_std < 0.0 || memory_std < 0.0 || drift_rate < 0.0)
            throw ConfigError("runner: noise parameters must be >= 0");
    }
};

struct RunnerState {
    double arc_pos = 0.0;        // m along the track line
    double speed = 0.0;          // m/s, [0, 4]
    double preferred_gap = 2.5;  // m behind the robot
    double natural_pace = 1.7;   // m/s
    double remembered_target = 0.0;  // m/s, Control condition pace memory
    double glance_setpoint = 0.0;    // m/s, wearable between-glance target
    double time_since_glance = 1e9;  // s
    // Delayed observation buffer: (gap, robot speed or own speed) samples.
    std::deque<std::array<double, 2>> delay_buffer;
};

struct RunnerObservation {
    // FollowRobot
    std::optional<double> robot_gap;    // m, robot arc position minus runner's
    std::optional<double> robot_speed;  // m/s, visually apparent pace
    bool robot_leads = true;            // false during the calibration phase
    // WearableFeedback / Control
    std::optional<double> announced_target;  // m/s
    bool interval_announcement = false;      // proctor cue at a transition
};

namespace detail {

inline double delayed_lookup(std::deque<std::array<double, 2>>& buf, std::array<double, 2> now,
                             double delay, double dt, int slot) {
    buf.push_back(now);
    const std::size_t steps = static_cast<std::size_t>(std::lround(delay / dt));
    while (buf.size() > steps + 1) buf.pop_front();
    return buf.front()[static_cast<std::size_t>(slot)];
}

}  // namespace detail

/// Advances one runner tick under the given condition model.
inline RunnerState runner_step(const RunnerState& state, const RunnerModelParams& params,
                               const RunnerObservation& obs, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("runner_step: dt must be > 0");
    RunnerState next = state;
    const double noise = params.noise_std > 0.0 ? rng.gaussian() * params.noise_std * std::sqrt(dt) : 0.0;

    switch (params.model) {
        case RunnerModel::FollowRobot: {
            const double gap_now = obs.robot_gap.value_or(state.preferred_gap);
            const double robot_speed_now = obs.robot_speed.value_or(state.speed);
            const double gap = detail::delayed_lookup(next.delay_buffer, {gap_now, robot_speed_now},
                                                      params.reaction_delay, dt, 0);
            const double robot_speed = next.delay_buffer.front()[1];
            double desired;
            if (obs.robot_leads) {
                desired = robot_speed + params.gap_gain * (gap - state.preferred_gap);
            } else {
                // Human leads: run the comfortable pace, edge closer when the
                // robot dawdles, but never run it down.
                desired = state.natural_pace + params.crowd_gain * (gap - state.preferred_gap);
                if (gap < params.min_gap) desired = std::min(desired, robot_speed);
            }
            const double vmax = std::min(kRunnerSpeedMax, state.natural_pace + params.capability_headroom);
            desired = clamp(desired, 0.0, vmax);
            next.speed += (dt / params.pursuit_tau) * (desired - state.speed) + noise;
            break;
        }
        case RunnerModel::WearableFeedback: {
            const double displayed_raw = detail::delayed_lookup(next.delay_buffer, {state.speed, 0.0},
                                                                params.display_latency, dt, 0);
            const double displayed =
                std::round(displayed_raw / params.display_quantum) * params.display_quantum;
            const double target = obs.announced_target.value_or(state.remembered_target);
            next.remembered_target = target;
            next.time_since_glance = state.time_since_glance + dt;
            if (next.time_since_glance >= params.glance_period || obs.interval_announcement) {
                next.glance_setpoint = state.speed + params.correction_gain * (target - displayed);
                next.time_since_glance = 0.0;
            }
            next.speed += dt * params.mean_reversion * (next.glance_setpoint - state.speed) + noise;
            break;
        }
        case RunnerModel::Control: {
            next.remembered_target = state.remembered_target;
            if (obs.interval_announcement && obs.announced_target) {
                // The proctor calls the change; the felt pace is off by a
                // per-interval memory error.
                next.remembered_target =
                    *obs.announced_target + rng.gaussian() * params.memory_std;
            }
            if (params.drift_rate > 0.0)
                next.remembered_target += rng.gaussian() * params.drift_rate * std::sqrt(dt);
            next.speed += dt * params.mean_reversion * (next.remembered_target - state.speed) + noise;
            break;
        }
    }

    next.speed = clamp(next.speed, 0.0, kRunnerSpeedMax);
    next.arc_pos = state.arc_pos + next.speed * dt;
    return next;
}

struct Participant {
    int id = 0;
    double natural_pace = 1.7;   // m/s
    double noise_scale = 1.0;    // per-participant wobble multiplier
    double memory_scale = 1.0;   // per-participant pace-memory multiplier
    std::array<RunnerModel, 3> condition_order{RunnerModel::FollowRobot, RunnerModel::WearableFeedback,
                                               RunnerModel::Control};
    std::uint64_t seed = 0;
};

struct PopulationConfig {
    double pace_min = 1.2;  // m/s
    double pace_max = 2.2;
    double noise_scale_min = 0.8;
    double noise_scale_max = 1.25;

    void validate() const {
        if (!(pace_min > 0.0) || !(pace_max > pace_min))
            throw ConfigError("population: need 0 < pace_min < pace_max");
        if (!(noise_scale_min > 0.0) || !(noise_scale_max >= noise_scale_min))
            throw ConfigError("population: bad noise scale bounds");
    }
};

/// Draws one study participant: natural pace, per-participant noise
/// scalings, and a randomized condition order. The same seed reproduces the
/// same participant across all three conditions (within-subjects design).
inline Participant spawn_participant(int id, std::uint64_t seed, const PopulationConfig& cfg) {
    Rng rng(seed);
    Participant p;
    p.id = id;
    p.seed = seed;
    p.natural_pace = rng.uniform(cfg.pace_min, cfg.pace_max);
    p.noise_scale = rng.uniform(cfg.noise_scale_min, cfg.noise_scale_max);
    p.memory_scale = rng.uniform(cfg.noise_scale_min, cfg.noise_scale_max);
    p.condition_order = {RunnerModel::FollowRobot, RunnerModel::WearableFeedback, RunnerModel::Control};
    rng.shuffle(p.condition_order.data(), p.condition_order.size());
    return p;
}

}  // namespace pacerbot
