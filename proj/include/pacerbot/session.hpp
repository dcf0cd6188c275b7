// Closed-loop scenarios.
//
// Two loop flavors share the same plant speed law:
//  - TrackFollowSim: full 2-D perception -> nav -> plant loop on the track,
//    used by the lap verification and single-session commands.
//  - PacingWorld1D: arc-length robot + runner dynamics with the range
//    sensor and GPS, used by calibration, study and extended scenarios
//    (runner metrics do not depend on the robot's centimeter-level lateral
//    wobble, and the study ensembles need the speed).
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pacerbot/config.hpp"
#include "pacerbot/nav.hpp"
#include "pacerbot/perception.hpp"
#include "pacerbot/plant.hpp"
#include "pacerbot/protocol.hpp"
#include "pacerbot/rng.hpp"
#include "pacerbot/runner.hpp"
#include "pacerbot/stats.hpp"
#include "pacerbot/telemetry.hpp"
#include "pacerbot/track.hpp"

namespace pacerbot {

// ---------------------------------------------------------------------------
// 2-D line-following loop

struct ControlTick {
    double t = 0.0;
    double x = 0.0, y = 0.0;
    double speed = 0.0;         // m/s actual
    double target = 0.0;        // m/s commanded
    double offset_true = 0.0;   // m, ground-truth lateral offset
    double ema_offset = 0.0;    // m, controller's smoothed estimate
    double ema_angle = 0.0;     // rad
    double yaw_rate = 0.0;      // rad/s commanded
    bool detected = false;
};

class TrackFollowSim {
public:
    TrackFollowSim(const ExperimentConfig& cfg, std::uint64_t seed, double start_arc = 0.0,
                   double start_speed = 0.0)
        : cfg_(cfg),
          rng_plant_(split_seed(seed, "plant")),
          rng_render_(split_seed(seed, "render")),
          rng_frames_(split_seed(seed, "frames")) {
        const TrackPose pose = track_point(start_arc, cfg.track);
        robot_.x = pose.position.x;
        robot_.y = pose.position.y;
        robot_.theta = pose.heading;
        robot_.speed = start_speed;
        s_prev_ = nearest_arc_length(robot_.position(), cfg.track);
        plant_ = cfg.plant;
    }

    ControlTick tick(double target_speed) {
        const double dt = cfg_.sim.dt;
        std::optional<LineCandidate> cand;
        bool frame_ok = !(cfg_.sim.frame_dropout > 0.0 && rng_frames_.bernoulli(cfg_.sim.frame_dropout));
        if (frame_ok) {
            render_ground_patch_into(img_, robot_, cfg_.track, cfg_.render, rng_render_);
            cand = select_line(detect_lines(img_, cfg_.detect, scratch_), cfg_.select);
        }
        nav_ = smooth_observation(nav_, cand, cfg_.nav.smoothing_alpha);
        const HeadingDecision hd = heading_command(nav_, cfg_.nav, dt);
        if (hd.lost_line) lost_ = true;
        const VelocityDecision vd = velocity_command(target_speed, hd.yaw_rate);
        robot_ = step_plant(robot_, vd.command, dt, plant_, rng_plant_).state;

        const double P = cfg_.track.perimeter();
        double s_now = nearest_arc_length(robot_.position(), cfg_.track);
        double ds = s_now - s_prev_;
        if (ds < -P / 2.0) ds += P;
        if (ds > P / 2.0) ds -= P;
        progress_ += ds;
        s_prev_ = s_now;

        ControlTick rec;
        rec.t = robot_.t;
        rec.x = robot_.x;
        rec.y = robot_.y;
        rec.speed = robot_.speed;
        rec.target = target_speed;
        rec.offset_true = lateral_offset(robot_, cfg_.track);
        rec.ema_offset = nav_.ema_offset;
        rec.ema_angle = nav_.ema_angle;
        rec.yaw_rate = hd.yaw_rate;
        rec.detected = cand.has_value();
        return rec;
    }

    const RobotState& robot() const { return robot_; }
    const GroundImage& last_frame() const { return img_; }
    double arc_progress() const { return progress_; }
    bool lost_line() const { return lost_; }

private:
    ExperimentConfig cfg_;
    PlantNoiseParams plant_;
    RobotState robot_;
    NavState nav_;
    GroundImage img_;
    DetectScratch scratch_;
    Rng rng_plant_, rng_render_, rng_frames_;
    double s_prev_ = 0.0;
    double progress_ = 0.0;
    bool lost_ = false;
};

struct SpeedTrialResult {
    double target = 0.0;
    double mean_speed = 0.0;
    double abs_error = 0.0;  // |mean_speed - target|
    double variance = 0.0;   // within-run, unbiased
    std::vector<ControlTick> ticks;  // measured window only
};

/// Robot-alone speed verification: warm up to pace, then measure the actual
/// speed for `measure_s`. Aborts the run on a lost line.
inline SpeedTrialResult run_speed_trial(const ExperimentConfig& cfg, double target,
                                        std::uint64_t seed, double warmup_s = 5.0,
                                        double measure_s = 30.0) {
    TrackFollowSim sim(cfg, seed);
    const double dt = cfg.sim.dt;
    const long warm = std::lround(warmup_s / dt);
    const long meas = std::lround(measure_s / dt);
    SpeedTrialResult out;
    out.target = target;
    out.ticks.reserve(static_cast<std::size_t>(meas));
    double sum = 0.0;
    for (long i = 0; i < warm + meas; ++i) {
        ControlTick rec = sim.tick(target);
        if (sim.lost_line()) throw SessionAbort("lost the line during a speed trial");
        if (i >= warm) {
            sum += rec.speed;
            out.ticks.push_back(rec);
        }
    }
    const double n = static_cast<double>(meas);
    out.mean_speed = sum / n;
    out.abs_error = std::fabs(out.mean_speed - target);
    double ss = 0.0;
    for (const auto& r : out.ticks) ss += (r.speed - out.mean_speed) * (r.speed - out.mean_speed);
    out.variance = ss / (n - 1.0);
    return out;
}

struct LapResult {
    double target = 0.0;
    std::size_t tick_count = 0;
    std::size_t ticks_within_015 = 0;
    double max_abs_offset = 0.0;
    double duration = 0.0;  // s
    std::vector<ControlTick> ticks;
};

/// One full lap of the followed line at a constant target pace.
inline LapResult run_follow_lap(const ExperimentConfig& cfg, double target, std::uint64_t seed,
                                bool keep_ticks = false) {
    TrackFollowSim sim(cfg, seed, 0.0, target);
    const double P = cfg.track.perimeter();
    LapResult out;
    out.target = target;
    const long max_ticks = std::lround(4.0 * P / std::max(target, 0.2) / cfg.sim.dt);
    for (long i = 0; i < max_ticks && sim.arc_progress() < P; ++i) {
        ControlTick rec = sim.tick(target);
        if (sim.lost_line()) throw SessionAbort("lost the line during a lap");
        ++out.tick_count;
        const double a = std::fabs(rec.offset_true);
        if (a <= 0.15) ++out.ticks_within_015;
        if (a > out.max_abs_offset) out.max_abs_offset = a;
        out.duration = rec.t;
        if (keep_ticks) out.ticks.push_back(rec);
    }
    if (sim.arc_progress() < P) throw SessionAbort("lap did not complete within the tick budget");
    return out;
}

// ---------------------------------------------------------------------------
// 1-D pacing world

// Arc-length robot: same speed law as the 2-D plant, position reduced to
// distance along the followed line.
struct ArcPlant {
    double arc = 0.0;    // m
    double speed = 0.0;  // m/s
    double t = 0.0;      // s

    void step(double target, double dt, const PlantNoiseParams& p, Rng& rng) {
        const double decay = std::exp(-dt / p.speed_response_time);
        double s = clamp(target, 0.0, kForwardSpeedMax);
        s = s + (speed - s) * decay;
        if (p.speed_noise_std > 0.0) s += rng.gaussian() * p.speed_noise_std;
        speed = clamp(s, 0.0, p.speed_hard_max());
        arc += speed * dt;
        t += dt;
    }
};

struct CalibrationTick {
    double t = 0.0;
    double commanded = 0.0;    // m/s, calibration speed
    double robot_speed = 0.0;  // m/s actual
    double runner_speed = 0.0;
    double gap = 0.0;          // m
    std::optional<double> measured;  // m, range sample if one arrived
};

struct CalibrationOutcome {
    CalibrationState state;
    double u_bar = 0.0;
    std::vector<CalibrationTick> ticks;
};

struct PhaseBoundaries {
    double calibration_end = 0.0;  // 0 when the session has no calibration phase
    double schedule_start = 0.0;
    double schedule_end = 0.0;
};

struct SessionOutcome {
    TelemetryLog telemetry;            // runner GPS over the whole session
    IntervalSchedule schedule;
    PaceProfile profile;
    PhaseBoundaries phases;
    std::vector<CueEvent> cues;
    MetricsReport metrics;
    std::vector<CalibrationTick> calibration_ticks;
    double u_bar = 0.0;
    double final_runner_arc = 0.0;
    double final_robot_arc = 0.0;
};

class PacingWorld1D {
public:
    PacingWorld1D(const ExperimentConfig& cfg, double natural_pace, std::uint64_t seed)
        : cfg_(cfg),
          rng_plant_(split_seed(seed, "plant")),
          rng_sensor_(split_seed(seed, "sensor")),
          rng_runner_(split_seed(seed, "runner")),
          rng_gps_(split_seed(seed, "gps")) {
        runner_.natural_pace = natural_pace;
        runner_.preferred_gap = cfg.runner.preferred_gap;
        runner_.arc_pos = -cfg.runner.preferred_gap;
        runner_.speed = 0.0;
        telemetry_.rate_hz = cfg.gps.rate_hz;
        telemetry_.position_noise_std = cfg.gps.noise_std;
        gps_every_ = std::max<long>(1, std::lround(1.0 / (cfg.gps.rate_hz * cfg.sim.dt)));
    }

    /// Gap-rate calibration phase: the runner leads at its natural pace, the
    /// robot converges onto it.
    CalibrationOutcome run_calibration(const RunnerModelParams& follow_params) {
        const double dt = cfg_.sim.dt;
        const long n = std::lround(cfg_.calibration.duration / dt);
        const long meas_every = std::max<long>(1, std::lround(cfg_.calibration.meas_period / dt));

        CalibrationOutcome out;
        CalibrationState cal;
        cal.current_speed = cfg_.calibration.initial_speed;
        runner_.speed = runner_.natural_pace;  // the runner sets off at their own pace

        for (long i = 0; i < n; ++i) {
            maybe_log_gps();
            const double gap = robot_.arc - runner_.arc_pos;
            RunnerObservation obs;
            obs.robot_gap = gap;
            obs.robot_speed = robot_.speed;
            obs.robot_leads = false;
            robot_.step(cal.current_speed, dt, cfg_.plant, rng_plant_);
            runner_ = runner_step(runner_, follow_params, obs, dt, rng_runner_);
            ++ticks_;

            RunnerMeasurement meas;
            meas.t = robot_.t;
            if ((i + 1) % meas_every == 0) {
                RobotState rs;
                const TrackPose rp = track_point(robot_.arc, cfg_.track);
                rs.x = rp.position.x;
                rs.y = rp.position.y;
                rs.t = robot_.t;
                meas = measure_runner(rs, track_point(runner_.arc_pos, cfg_.track).position,
                                      cfg_.runner_sensor, rng_sensor_);
            }
            cal = calibration_step(cal, meas, dt, cfg_.calibration.gain, cfg_.calibration.deadband,
                                   cfg_.calibration.u_min, cfg_.calibration.u_max);

            CalibrationTick rec;
            rec.t = robot_.t;
            rec.commanded = cal.current_speed;
            rec.robot_speed = robot_.speed;
            rec.runner_speed = runner_.speed;
            rec.gap = robot_.arc - runner_.arc_pos;
            rec.measured = meas.distance;
            out.ticks.push_back(rec);
        }
        out.state = cal;
        out.u_bar = finalize_calibration(cal);
        return out;
    }

    /// Standstill between phases; both parties idle.
    void run_standstill(double duration, const RunnerModelParams& params) {
        const double dt = cfg_.sim.dt;
        const long n = std::lround(duration / dt);
        for (long i = 0; i < n; ++i) {
            maybe_log_gps();
            RunnerObservation obs;
            if (params.model == RunnerModel::FollowRobot) {
                obs.robot_gap = robot_.arc - runner_.arc_pos;
                obs.robot_speed = robot_.speed;
                obs.robot_leads = true;
            } else {
                obs.announced_target = 0.0;
            }
            robot_.step(0.0, dt, cfg_.plant, rng_plant_);
            runner_ = runner_step(runner_, params, obs, dt, rng_runner_);
            ++ticks_;
        }
    }

    /// The interval exercise. With FollowRobot the robot leads at the
    /// scheduled paces; the other conditions run target-informed without a
    /// robot (it stands still).
    std::vector<CueEvent> run_training(const IntervalSchedule& sched, const PaceProfile& profile,
                                       const RunnerModelParams& params) {
        const double dt = cfg_.sim.dt;
        const long n = std::lround(sched.total_duration() / dt);
        ScheduleCursor cursor;
        std::vector<CueEvent> cues;
        std::size_t prev_segment = 0;

        for (long i = 0; i < n; ++i) {
            maybe_log_gps();
            const double t_rel = static_cast<double>(i) * dt;
            const ScheduleQuery q = schedule_target(sched, profile, t_rel, cursor);
            if (q.complete) break;
            if (q.cue) cues.push_back(*q.cue);

            RunnerObservation obs;
            double robot_target = 0.0;
            if (params.model == RunnerModel::FollowRobot) {
                robot_target = q.target_speed;
                obs.robot_gap = robot_.arc - runner_.arc_pos;
                obs.robot_speed = robot_.speed;
                obs.robot_leads = true;
            } else {
                obs.announced_target = q.target_speed;
                obs.interval_announcement = (i == 0) || (q.segment_index != prev_segment);
            }
            prev_segment = q.segment_index;

            robot_.step(robot_target, dt, cfg_.plant, rng_plant_);
            runner_ = runner_step(runner_, params, obs, dt, rng_runner_);
            ++ticks_;
        }
        maybe_log_gps(true);
        return cues;
    }

    const TelemetryLog& telemetry() const { return telemetry_; }
    const RunnerState& runner() const { return runner_; }
    const ArcPlant& robot() const { return robot_; }
    double now() const { return robot_.t; }

private:
    void maybe_log_gps(bool final_sample = false) {
        if (ticks_ % gps_every_ != 0 && !final_sample) return;
        const double t = static_cast<double>(gps_count_) / cfg_.gps.rate_hz;
        if (final_sample && ticks_ % gps_every_ != 0) return;
        telemetry_.append(log_gps(track_point(runner_.arc_pos, cfg_.track).position, t, cfg_.gps,
                                  rng_gps_));
        ++gps_count_;
    }

    ExperimentConfig cfg_;
    ArcPlant robot_;
    RunnerState runner_;
    TelemetryLog telemetry_;
    Rng rng_plant_, rng_sensor_, rng_runner_, rng_gps_;
    long ticks_ = 0;
    long gps_every_ = 10;
    long gps_count_ = 0;
};

/// One complete 1-D session. If `profile_in` is set, the calibration phase
/// is skipped (study sessions reuse the participant's single calibration);
/// otherwise the session starts with one and derives the paces itself.
inline SessionOutcome run_session_1d(const ExperimentConfig& cfg, double natural_pace,
                                     double noise_scale, double memory_scale, RunnerModel model,
                                     const IntervalSchedule& sched, std::uint64_t seed,
                                     const std::optional<PaceProfile>& profile_in) {
    SessionOutcome out;
    out.schedule = sched;
    PacingWorld1D world(cfg, natural_pace, seed);

    const RunnerModelParams params =
        make_model_params(cfg.runner, model, noise_scale, memory_scale, seed);

    if (profile_in) {
        out.profile = *profile_in;
        out.u_bar = profile_in->u_bar;
    } else {
        const RunnerModelParams follow =
            make_model_params(cfg.runner, RunnerModel::FollowRobot, noise_scale, memory_scale, seed);
        CalibrationOutcome cal = world.run_calibration(follow);
        out.calibration_ticks = std::move(cal.ticks);
        out.u_bar = cal.u_bar;
        out.profile = compute_paces(cal.u_bar, cfg.paces.delta_u, cfg.paces.cap, cfg.paces.u_floor);
        out.phases.calibration_end = world.now();
    }

    world.run_standstill(cfg.schedule.pre_start_pause, params);
    out.phases.schedule_start = world.now();
    out.cues = world.run_training(sched, out.profile, params);
    out.phases.schedule_end = world.now();

    out.telemetry = world.telemetry();
    out.metrics = session_summary(out.telemetry, sched, out.profile, out.phases.schedule_start,
                                  cfg.metrics);
    out.final_runner_arc = world.runner().arc_pos;
    out.final_robot_arc = world.robot().arc;
    return out;
}

// ---------------------------------------------------------------------------
// Study and extended protocols

struct ParticipantResult {
    Participant participant;
    double u_bar = 0.0;
    PaceProfile profile;
    // Indexed canonically: [0] robot, [1] wearable, [2] control.
    std::array<SessionOutcome, 3> sessions;
};

struct StudyResult {
    std::vector<ParticipantResult> participants;
    std::vector<std::vector<double>> error_matrix;     // subjects x {robot, wearable, control}
    std::vector<std::vector<double>> variance_matrix;
    RmAnovaResult anova_error;
    RmAnovaResult anova_variance;
    std::array<double, 3> error_mean{}, error_se{}, variance_mean{}, variance_se{};
};

inline constexpr std::array<RunnerModel, 3> kConditionOrder{
    RunnerModel::FollowRobot, RunnerModel::WearableFeedback, RunnerModel::Control};

inline std::size_t condition_index(RunnerModel m) {
    switch (m) {
        case RunnerModel::FollowRobot: return 0;
        case RunnerModel::WearableFeedback: return 1;
        case RunnerModel::Control: return 2;
    }
    return 0;
}

/// The within-subjects study: per participant one robot-led calibration,
/// then one session per condition in the participant's randomized order.
inline StudyResult run_study(const ExperimentConfig& cfg, std::uint64_t master_seed) {
    StudyResult out;
    const IntervalSchedule sched =
        make_alternating_schedule(cfg.schedule.intervals, cfg.schedule.interval_duration,
                                  cfg.schedule.slow_first, cfg.schedule.cue_lead);
    sched.validate();

    for (int pi = 0; pi < cfg.study.participants; ++pi) {
        ParticipantResult pr;
        const std::uint64_t pseed = split_seed(master_seed, "participant", static_cast<std::uint64_t>(pi));
        pr.participant = spawn_participant(pi, pseed, cfg.runner.population);

        // Calibration happens once, with the robot, before the conditions.
        {
            PacingWorld1D world(cfg, pr.participant.natural_pace, split_seed(pseed, "calibration"));
            const RunnerModelParams follow =
                make_model_params(cfg.runner, RunnerModel::FollowRobot, pr.participant.noise_scale,
                                  pr.participant.memory_scale, pseed);
            CalibrationOutcome cal = world.run_calibration(follow);
            pr.u_bar = cal.u_bar;
            pr.profile = compute_paces(cal.u_bar, cfg.paces.delta_u, cfg.paces.cap, cfg.paces.u_floor);
        }

        for (std::size_t oi = 0; oi < pr.participant.condition_order.size(); ++oi) {
            const RunnerModel model = pr.participant.condition_order[oi];
            const std::uint64_t session_seed =
                split_seed(master_seed, "session", static_cast<std::uint64_t>(pi),
                           static_cast<std::uint64_t>(condition_index(model)));
            SessionOutcome so =
                run_session_1d(cfg, pr.participant.natural_pace, pr.participant.noise_scale,
                               pr.participant.memory_scale, model, sched, session_seed, pr.profile);
            pr.sessions[condition_index(model)] = std::move(so);
        }
        out.participants.push_back(std::move(pr));
    }

    const std::size_t n = out.participants.size();
    out.error_matrix.assign(n, std::vector<double>(3, 0.0));
    out.variance_matrix.assign(n, std::vector<double>(3, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            out.error_matrix[i][c] = out.participants[i].sessions[c].metrics.overall_error;
            out.variance_matrix[i][c] = out.participants[i].sessions[c].metrics.overall_variance;
        }
    }
    out.anova_error = rm_anova(out.error_matrix);
    out.anova_variance = rm_anova(out.variance_matrix);

    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += out.error_matrix[i][c];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = out.error_matrix[i][c] - mean;
            ss += d * d;
        }
        out.error_mean[c] = mean;
        out.error_se[c] = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));

        mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += out.variance_matrix[i][c];
        mean /= static_cast<double>(n);
        ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = out.variance_matrix[i][c] - mean;
            ss += d * d;
        }
        out.variance_mean[c] = mean;
        out.variance_se[c] = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));
    }
    return out;
}

struct ExtendedResult {
    struct Session {
        int index = 0;
        double natural_pace = 0.0;
        SessionOutcome outcome;
    };
    std::vector<Session> sessions;
    double total_distance = 0.0;  // m
    double total_duration = 0.0;  // s
    double max_fast_pace = 0.0;   // m/s, highest commanded challenge pace
};

/// The multi-session protocol: every session re-calibrates (comfort drifts
/// between days) and runs long alternating intervals.
inline ExtendedResult run_extended(const ExperimentConfig& cfg, std::uint64_t master_seed) {
    ExtendedResult out;
    const IntervalSchedule sched =
        make_alternating_schedule(cfg.extended.segments, cfg.extended.interval_duration,
                                  cfg.schedule.slow_first, cfg.schedule.cue_lead);
    sched.validate();

    Rng drift_rng(split_seed(master_seed, "extended-drift"));
    for (int si = 0; si < cfg.extended.sessions; ++si) {
        ExtendedResult::Session s;
        s.index = si;
        const double lo = cfg.paces.u_floor + cfg.paces.delta_u + 0.1;
        s.natural_pace = clamp(cfg.extended.natural_pace +
                                   drift_rng.gaussian() * cfg.extended.pace_drift_std,
                               lo, cfg.calibration.u_max - 0.1);
        const std::uint64_t seed = split_seed(master_seed, "extended", static_cast<std::uint64_t>(si));
        s.outcome = run_session_1d(cfg, s.natural_pace, 1.0, 1.0, RunnerModel::FollowRobot, sched,
                                   seed, std::nullopt);
        out.total_distance += s.outcome.metrics.distance_total;
        out.total_duration += s.outcome.metrics.duration_total;
        if (s.outcome.profile.u_fast > out.max_fast_pace) out.max_fast_pace = s.outcome.profile.u_fast;
        out.sessions.push_back(std::move(s));
    }
    return out;
}

}  // namespace pacerbot
