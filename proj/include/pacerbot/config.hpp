// Experiment configuration: one hierarchical document covering every
// module's tunables, JSON-serializable with strict unknown-key rejection
// and dotted-path command-line overrides.
#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "pacerbot/common.hpp"
#include "pacerbot/csv.hpp"
#include "pacerbot/nav.hpp"
#include "pacerbot/perception.hpp"
#include "pacerbot/plant.hpp"
#include "pacerbot/protocol.hpp"
#include "pacerbot/runner.hpp"
#include "pacerbot/telemetry.hpp"
#include "pacerbot/track.hpp"

namespace pacerbot {

using json = nlohmann::json;

struct ScheduleConfig {
    int intervals = 4;
    double interval_duration = 30.0;  // s
    bool slow_first = true;
    double cue_lead = 3.0;       // s
    double pre_start_pause = 10.0;  // s standstill between calibration and training

    void validate() const {
        if (intervals < 1) throw ConfigError("schedule: intervals must be >= 1");
        if (!(interval_duration > 0.0)) throw ConfigError("schedule: interval_duration must be > 0");
        if (cue_lead < 0.0 || pre_start_pause < 0.0)
            throw ConfigError("schedule: cue_lead and pre_start_pause must be >= 0");
    }
};

struct ExtendedConfig {
    int sessions = 5;
    int segments = 7;
    double interval_duration = 180.0;  // s
    double natural_pace = 1.85;        // m/s, the extended-protocol participant
    double pace_drift_std = 0.15;      // m/s session-to-session comfort drift

    void validate() const {
        if (sessions < 1 || segments < 1) throw ConfigError("extended: sessions/segments must be >= 1");
        if (!(interval_duration > 0.0)) throw ConfigError("extended: interval_duration must be > 0");
        if (pace_drift_std < 0.0) throw ConfigError("extended: pace_drift_std must be >= 0");
    }
};

struct PaceRules {
    double delta_u = 0.5;  // m/s added/subtracted around the calibrated pace
    double cap = 2.5;      // m/s fast-pace cap
    double u_floor = 0.5;  // m/s minimum acceptable recovery pace

    void validate() const {
        if (!(delta_u > 0.0)) throw ConfigError("paces: delta_u must be > 0");
        if (!(cap > 0.0) || !(u_floor > 0.0)) throw ConfigError("paces: cap and u_floor must be > 0");
    }
};

struct RunnerConfig {
    double preferred_gap = 2.5;  // m behind the robot
    double reaction_delay = 0.4;
    double pursuit_tau = 0.5;
    double gap_gain = 0.3;
    double crowd_gain = 0.03;
    double min_gap = 0.5;
    double capability_headroom = 0.8;
    double follow_noise_std = 0.18;
    double wearable_noise_std = 0.3;
    double correction_gain = 1.4;
    double display_latency = 1.0;
    double display_quantum = 0.1;
    double glance_period = 6.0;
    double control_noise_std = 0.3;
    double drift_rate = 0.01;
    double memory_std = 0.4;
    double mean_reversion = 1.0;
    PopulationConfig population;

    void validate() const {
        if (!(preferred_gap > 0.0)) throw ConfigError("runner: preferred_gap must be > 0");
        if (!(pursuit_tau > 0.0)) throw ConfigError("runner: pursuit_tau must be > 0");
        if (follow_noise_std < 0.0 || wearable_noise_std < 0.0 || control_noise_std < 0.0)
            throw ConfigError("runner: noise stds must be >= 0");
        population.validate();
    }
};

struct StudyConfig {
    int participants = 10;

    void validate() const {
        if (participants < 2) throw ConfigError("study: participants must be >= 2");
    }
};

struct SimConfig {
    double dt = 0.1;           // s, simulation tick
    double frame_dropout = 0.10;  // probability a camera frame yields no detection

    void validate() const {
        if (!(dt > 0.0) || dt > 0.5) throw ConfigError("sim: dt must be in (0, 0.5]");
        if (frame_dropout < 0.0 || frame_dropout >= 1.0)
            throw ConfigError("sim: frame_dropout must be in [0, 1)");
    }
};

struct ExperimentConfig {
    TrackModel track;
    PlantNoiseParams plant;
    RenderConfig render;
    DetectConfig detect;
    SelectWeights select;
    RunnerSensorConfig runner_sensor;
    NavGains nav;
    CalibrationConfig calibration;
    ScheduleConfig schedule;
    ExtendedConfig extended;
    PaceRules paces;
    RunnerConfig runner;
    GpsConfig gps;
    MetricsConfig metrics;
    StudyConfig study;
    SimConfig sim;
    std::uint64_t master_seed = 42;
    std::string output_dir = "runs";

    void validate() const {
        track.validate();
        plant.validate();
        render.validate();
        detect.validate();
        runner_sensor.validate();
        nav.validate();
        calibration.validate();
        schedule.validate();
        extended.validate();
        paces.validate();
        runner.validate();
        gps.validate();
        metrics.validate();
        study.validate();
        sim.validate();
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    }
};

namespace detail {

// Reads fields out of a JSON object, remembering which keys were consumed so
// anything left over can be rejected with its full dotted path.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        known_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;  // missing keys keep their defaults
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key) {
        known_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!known_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["track"] = {{"straight_length", c.track.straight_length},
                  {"turn_radius", c.track.turn_radius},
                  {"lane_width", c.track.lane_width},
                  {"line_width", c.track.line_width},
                  {"lane_index", c.track.lane_index}};
    j["plant"] = {{"speed_response_time", c.plant.speed_response_time},
                  {"speed_noise_std", c.plant.speed_noise_std},
                  {"yaw_rate_limit", c.plant.yaw_rate_limit}};
    j["render"] = {{"patch_width", c.render.patch_width},
                   {"patch_ahead", c.render.patch_ahead},
                   {"resolution", c.render.resolution},
                   {"line_brightness", c.render.line_brightness},
                   {"background_brightness", c.render.background_brightness},
                   {"pixel_noise_std", c.render.pixel_noise_std},
                   {"neighbor_lines", c.render.neighbor_lines},
                   {"occlusion_count", c.render.occlusion_count},
                   {"occlusion_size_px", c.render.occlusion_size_px}};
    j["detect"] = {{"threshold_window", c.detect.threshold_window},
                   {"threshold_offset", c.detect.threshold_offset},
                   {"min_component_size", c.detect.min_component_size}};
    j["select"] = {{"center_weight", c.select.center_weight},
                   {"vertical_weight", c.select.vertical_weight}};
    j["runner_sensor"] = {{"noise_std", c.runner_sensor.noise_std},
                          {"drop_probability", c.runner_sensor.drop_probability},
                          {"max_range", c.runner_sensor.max_range}};
    j["nav"] = {{"kp", c.nav.kp},
                {"ki", c.nav.ki},
                {"kd", c.nav.kd},
                {"lookahead", c.nav.lookahead},
                {"smoothing_alpha", c.nav.smoothing_alpha},
                {"max_missed_frames", c.nav.max_missed_frames},
                {"yaw_rate_limit", c.nav.yaw_rate_limit},
                {"integral_limit", c.nav.integral_limit}};
    j["calibration"] = {{"initial_speed", c.calibration.initial_speed},
                        {"u_min", c.calibration.u_min},
                        {"u_max", c.calibration.u_max},
                        {"gain", c.calibration.gain},
                        {"deadband", c.calibration.deadband},
                        {"duration", c.calibration.duration},
                        {"meas_period", c.calibration.meas_period}};
    j["schedule"] = {{"intervals", c.schedule.intervals},
                     {"interval_duration", c.schedule.interval_duration},
                     {"slow_first", c.schedule.slow_first},
                     {"cue_lead", c.schedule.cue_lead},
                     {"pre_start_pause", c.schedule.pre_start_pause}};
    j["extended"] = {{"sessions", c.extended.sessions},
                     {"segments", c.extended.segments},
                     {"interval_duration", c.extended.interval_duration},
                     {"natural_pace", c.extended.natural_pace},
                     {"pace_drift_std", c.extended.pace_drift_std}};
    j["paces"] = {{"delta_u", c.paces.delta_u}, {"cap", c.paces.cap}, {"u_floor", c.paces.u_floor}};
    j["runner"] = {{"preferred_gap", c.runner.preferred_gap},
                   {"reaction_delay", c.runner.reaction_delay},
                   {"pursuit_tau", c.runner.pursuit_tau},
                   {"gap_gain", c.runner.gap_gain},
                   {"crowd_gain", c.runner.crowd_gain},
                   {"min_gap", c.runner.min_gap},
                   {"capability_headroom", c.runner.capability_headroom},
                   {"follow_noise_std", c.runner.follow_noise_std},
                   {"wearable_noise_std", c.runner.wearable_noise_std},
                   {"correction_gain", c.runner.correction_gain},
                   {"display_latency", c.runner.display_latency},
                   {"display_quantum", c.runner.display_quantum},
                   {"glance_period", c.runner.glance_period},
                   {"control_noise_std", c.runner.control_noise_std},
                   {"drift_rate", c.runner.drift_rate},
                   {"memory_std", c.runner.memory_std},
                   {"mean_reversion", c.runner.mean_reversion},
                   {"population",
                    {{"pace_min", c.runner.population.pace_min},
                     {"pace_max", c.runner.population.pace_max},
                     {"noise_scale_min", c.runner.population.noise_scale_min},
                     {"noise_scale_max", c.runner.population.noise_scale_max}}}};
    j["gps"] = {{"rate_hz", c.gps.rate_hz}, {"noise_std", c.gps.noise_std}};
    j["metrics"] = {{"guard_band", c.metrics.guard_band},
                    {"speed_window", c.metrics.speed_window},
                    {"distance_window", c.metrics.distance_window}};
    j["study"] = {{"participants", c.study.participants}};
    j["sim"] = {{"dt", c.sim.dt}, {"frame_dropout", c.sim.frame_dropout}};
    j["master_seed"] = c.master_seed;
    j["output_dir"] = c.output_dir;
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    detail::StrictObject root(j, "config");

    if (const json* t = root.child("track")) {
        detail::StrictObject o(*t, "track");
        o.get("straight_length", c.track.straight_length);
        o.get("turn_radius", c.track.turn_radius);
        o.get("lane_width", c.track.lane_width);
        o.get("line_width", c.track.line_width);
        o.get("lane_index", c.track.lane_index);
        o.finish();
    }
    if (const json* t = root.child("plant")) {
        detail::StrictObject o(*t, "plant");
        o.get("speed_response_time", c.plant.speed_response_time);
        o.get("speed_noise_std", c.plant.speed_noise_std);
        o.get("yaw_rate_limit", c.plant.yaw_rate_limit);
        o.finish();
    }
    if (const json* t = root.child("render")) {
        detail::StrictObject o(*t, "render");
        o.get("patch_width", c.render.patch_width);
        o.get("patch_ahead", c.render.patch_ahead);
        o.get("resolution", c.render.resolution);
        o.get("line_brightness", c.render.line_brightness);
        o.get("background_brightness", c.render.background_brightness);
        o.get("pixel_noise_std", c.render.pixel_noise_std);
        o.get("neighbor_lines", c.render.neighbor_lines);
        o.get("occlusion_count", c.render.occlusion_count);
        o.get("occlusion_size_px", c.render.occlusion_size_px);
        o.finish();
    }
    if (const json* t = root.child("detect")) {
        detail::StrictObject o(*t, "detect");
        o.get("threshold_window", c.detect.threshold_window);
        o.get("threshold_offset", c.detect.threshold_offset);
        o.get("min_component_size", c.detect.min_component_size);
        o.finish();
    }
    if (const json* t = root.child("select")) {
        detail::StrictObject o(*t, "select");
        o.get("center_weight", c.select.center_weight);
        o.get("vertical_weight", c.select.vertical_weight);
        o.finish();
    }
    if (const json* t = root.child("runner_sensor")) {
        detail::StrictObject o(*t, "runner_sensor");
        o.get("noise_std", c.runner_sensor.noise_std);
        o.get("drop_probability", c.runner_sensor.drop_probability);
        o.get("max_range", c.runner_sensor.max_range);
        o.finish();
    }
    if (const json* t = root.child("nav")) {
        detail::StrictObject o(*t, "nav");
        o.get("kp", c.nav.kp);
        o.get("ki", c.nav.ki);
        o.get("kd", c.nav.kd);
        o.get("lookahead", c.nav.lookahead);
        o.get("smoothing_alpha", c.nav.smoothing_alpha);
        o.get("max_missed_frames", c.nav.max_missed_frames);
        o.get("yaw_rate_limit", c.nav.yaw_rate_limit);
        o.get("integral_limit", c.nav.integral_limit);
        o.finish();
    }
    if (const json* t = root.child("calibration")) {
        detail::StrictObject o(*t, "calibration");
        o.get("initial_speed", c.calibration.initial_speed);
        o.get("u_min", c.calibration.u_min);
        o.get("u_max", c.calibration.u_max);
        o.get("gain", c.calibration.gain);
        o.get("deadband", c.calibration.deadband);
        o.get("duration", c.calibration.duration);
        o.get("meas_period", c.calibration.meas_period);
        o.finish();
    }
    if (const json* t = root.child("schedule")) {
        detail::StrictObject o(*t, "schedule");
        o.get("intervals", c.schedule.intervals);
        o.get("interval_duration", c.schedule.interval_duration);
        o.get("slow_first", c.schedule.slow_first);
        o.get("cue_lead", c.schedule.cue_lead);
        o.get("pre_start_pause", c.schedule.pre_start_pause);
        o.finish();
    }
    if (const json* t = root.child("extended")) {
        detail::StrictObject o(*t, "extended");
        o.get("sessions", c.extended.sessions);
        o.get("segments", c.extended.segments);
        o.get("interval_duration", c.extended.interval_duration);
        o.get("natural_pace", c.extended.natural_pace);
        o.get("pace_drift_std", c.extended.pace_drift_std);
        o.finish();
    }
    if (const json* t = root.child("paces")) {
        detail::StrictObject o(*t, "paces");
        o.get("delta_u", c.paces.delta_u);
        o.get("cap", c.paces.cap);
        o.get("u_floor", c.paces.u_floor);
        o.finish();
    }
    if (const json* t = root.child("runner")) {
        detail::StrictObject o(*t, "runner");
        o.get("preferred_gap", c.runner.preferred_gap);
        o.get("reaction_delay", c.runner.reaction_delay);
        o.get("pursuit_tau", c.runner.pursuit_tau);
        o.get("gap_gain", c.runner.gap_gain);
        o.get("crowd_gain", c.runner.crowd_gain);
        o.get("min_gap", c.runner.min_gap);
        o.get("capability_headroom", c.runner.capability_headroom);
        o.get("follow_noise_std", c.runner.follow_noise_std);
        o.get("wearable_noise_std", c.runner.wearable_noise_std);
        o.get("correction_gain", c.runner.correction_gain);
        o.get("display_latency", c.runner.display_latency);
        o.get("display_quantum", c.runner.display_quantum);
        o.get("glance_period", c.runner.glance_period);
        o.get("control_noise_std", c.runner.control_noise_std);
        o.get("drift_rate", c.runner.drift_rate);
        o.get("memory_std", c.runner.memory_std);
        o.get("mean_reversion", c.runner.mean_reversion);
        if (const json* p = o.child("population")) {
            detail::StrictObject po(*p, "runner.population");
            po.get("pace_min", c.runner.population.pace_min);
            po.get("pace_max", c.runner.population.pace_max);
            po.get("noise_scale_min", c.runner.population.noise_scale_min);
            po.get("noise_scale_max", c.runner.population.noise_scale_max);
            po.finish();
        }
        o.finish();
    }
    if (const json* t = root.child("gps")) {
        detail::StrictObject o(*t, "gps");
        o.get("rate_hz", c.gps.rate_hz);
        o.get("noise_std", c.gps.noise_std);
        o.finish();
    }
    if (const json* t = root.child("metrics")) {
        detail::StrictObject o(*t, "metrics");
        o.get("guard_band", c.metrics.guard_band);
        o.get("speed_window", c.metrics.speed_window);
        o.get("distance_window", c.metrics.distance_window);
        o.finish();
    }
    if (const json* t = root.child("study")) {
        detail::StrictObject o(*t, "study");
        o.get("participants", c.study.participants);
        o.finish();
    }
    if (const json* t = root.child("sim")) {
        detail::StrictObject o(*t, "sim");
        o.get("dt", c.sim.dt);
        o.get("frame_dropout", c.sim.frame_dropout);
        o.finish();
    }
    root.get("master_seed", c.master_seed);
    root.get("output_dir", c.output_dir);
    root.finish();
    c.validate();
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

/// Applies one `--set a.b.c=value` override. The path must already exist in
/// the document (everything has a default), which catches typos.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->is_object() || !node->contains(key))
            throw ConfigError("override: unknown config key '" + path + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // treat unparsable values as strings
    *node = parsed;
}

/// Canonical serialized form (sorted keys, 2-space indent) used both for
/// config snapshots on disk and for the manifest hash.
inline std::string canonical_config_text(const ExperimentConfig& c) { return to_json(c).dump(2); }

inline std::string config_hash(const ExperimentConfig& c) {
    return hex64(fnv1a64(canonical_config_text(c)));
}

/// Per-condition runner model parameters for one participant.
inline RunnerModelParams make_model_params(const RunnerConfig& rc, RunnerModel model,
                                           double noise_scale, double memory_scale,
                                           std::uint64_t seed) {
    RunnerModelParams p;
    p.model = model;
    p.reaction_delay = rc.reaction_delay;
    p.pursuit_tau = rc.pursuit_tau;
    p.gap_gain = rc.gap_gain;
    p.crowd_gain = rc.crowd_gain;
    p.min_gap = rc.min_gap;
    p.capability_headroom = rc.capability_headroom;
    p.correction_gain = rc.correction_gain;
    p.display_latency = rc.display_latency;
    p.display_quantum = rc.display_quantum;
    p.glance_period = rc.glance_period;
    p.drift_rate = rc.drift_rate;
    p.memory_std = rc.memory_std * memory_scale;
    p.mean_reversion = rc.mean_reversion;
    p.seed = seed;
    switch (model) {
        case RunnerModel::FollowRobot: p.noise_std = rc.follow_noise_std * noise_scale; break;
        case RunnerModel::WearableFeedback: p.noise_std = rc.wearable_noise_std * noise_scale; break;
        case RunnerModel::Control: p.noise_std = rc.control_noise_std * noise_scale; break;
    }
    return p;
}

}  // namespace pacerbot
