// GPS-style runner tracking, speed estimation, and the pace accuracy /
// consistency metrics computed per schedule interval.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pacerbot/common.hpp"
#include "pacerbot/protocol.hpp"
#include "pacerbot/rng.hpp"

namespace pacerbot {

struct GpsConfig {
    double rate_hz = 1.0;
    double noise_std = 1.5;  // m per axis, isotropic

    void validate() const {
        if (!(rate_hz > 0.0)) throw ConfigError("gps: rate_hz must be > 0");
        if (noise_std < 0.0) throw ConfigError("gps: noise_std must be >= 0");
    }
};

struct TelemetrySample {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
};

struct TelemetryLog {
    std::vector<TelemetrySample> samples;
    double rate_hz = 1.0;
    double position_noise_std = 1.5;

    void append(const TelemetrySample& s) {
        if (!samples.empty() && s.t <= samples.back().t)
            throw std::invalid_argument("telemetry: timestamps must strictly increase");
        samples.push_back(s);
    }
};

/// One GPS fix: the true position plus isotropic Gaussian noise.
inline TelemetrySample log_gps(Vec2 true_position, double t, const GpsConfig& cfg, Rng& rng) {
    TelemetrySample s;
    s.t = t;
    s.x = true_position.x;
    s.y = true_position.y;
    if (cfg.noise_std > 0.0) {
        s.x += rng.gaussian() * cfg.noise_std;
        s.y += rng.gaussian() * cfg.noise_std;
    }
    return s;
}

struct SpeedSample {
    double t = 0.0;
    double speed = 0.0;
};

/// Speed series from a position log: central finite differences between the
/// neighbors of each sample, then a centered moving average spanning
/// `window` seconds. Output timestamps sit at the midpoint of each
/// difference/averaging span. Fewer than 3 samples yield an empty series.
inline std::vector<SpeedSample> estimate_speed(const TelemetryLog& log, double window = 5.0) {
    std::vector<SpeedSample> out;
    const auto& s = log.samples;
    if (s.size() < 3) return out;

    std::vector<SpeedSample> raw;
    raw.reserve(s.size() - 2);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const double dt = s[i + 1].t - s[i - 1].t;
        const double dx = s[i + 1].x - s[i - 1].x;
        const double dy = s[i + 1].y - s[i - 1].y;
        raw.push_back({s[i].t, std::hypot(dx, dy) / dt});
    }

    std::size_t w = static_cast<std::size_t>(std::lround(window * log.rate_hz));
    if (w < 1) w = 1;
    if (w > raw.size()) w = raw.size();
    out.reserve(raw.size() - w + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        acc += raw[i].speed;
        if (i + 1 >= w) {
            const std::size_t lo = i + 1 - w;
            out.push_back({0.5 * (raw[lo].t + raw[i].t), acc / w});
            acc -= raw[lo].speed;
        }
    }
    return out;
}

struct IntervalMetrics {
    std::size_t segment_index = 0;
    IntervalSchedule::Label label = IntervalSchedule::Label::Slow;
    double target = 0.0;          // m/s
    double mean_speed = 0.0;      // m/s
    double mean_abs_error = 0.0;  // m/s
    double variance = 0.0;        // (m/s)^2, unbiased
    std::size_t sample_count = 0;
    bool excluded = false;        // no usable samples in the interval
};

struct MetricsConfig {
    double guard_band = 2.0;        // s dropped around each transition
    double speed_window = 5.0;      // s, estimator smoothing
    double distance_window = 25.0;  // s, path-smoothing block for distance

    void validate() const {
        if (guard_band < 0.0) throw ConfigError("metrics: guard_band must be >= 0");
        if (!(speed_window > 0.0) || !(distance_window > 0.0))
            throw ConfigError("metrics: windows must be > 0");
    }
};

namespace detail {

/// Buckets speed samples into schedule intervals, excluding samples within
/// guard_band of any transition. schedule_start is the session time at
/// which segment 0 begins.
inline std::vector<IntervalMetrics> bucket_intervals(const std::vector<SpeedSample>& speeds,
                                                     const IntervalSchedule& sched,
                                                     const PaceProfile& profile,
                                                     double schedule_start, double guard_band) {
    std::vector<IntervalMetrics> out;
    double start = schedule_start;
    for (std::size_t i = 0; i < sched.segments.size(); ++i) {
        const double end = start + sched.segments[i].duration;
        IntervalMetrics m;
        m.segment_index = i;
        m.label = sched.segments[i].label;
        m.target = pace_for(m.label, profile);

        double sum = 0.0, sum_abs_err = 0.0;
        std::vector<double> vals;
        for (const auto& sp : speeds) {
            if (sp.t < start + guard_band || sp.t > end - guard_band) continue;
            vals.push_back(sp.speed);
            sum += sp.speed;
            sum_abs_err += std::fabs(sp.speed - m.target);
        }
        m.sample_count = vals.size();
        if (vals.empty()) {
            m.excluded = true;
        } else {
            m.mean_speed = sum / vals.size();
            m.mean_abs_error = sum_abs_err / vals.size();
            if (vals.size() >= 2) {
                double ss = 0.0;
                for (double v : vals) ss += (v - m.mean_speed) * (v - m.mean_speed);
                m.variance = ss / (vals.size() - 1);
            }
        }
        out.push_back(m);
        start = end;
    }
    return out;
}

inline double mean_over_included(const std::vector<IntervalMetrics>& intervals,
                                 double IntervalMetrics::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& m : intervals) {
        if (m.excluded) continue;
        sum += m.*field;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace detail

struct PaceAccuracy {
    std::vector<IntervalMetrics> per_interval;
    double overall_error = 0.0;  // m/s, mean of per-interval mean absolute errors
};

/// Accuracy: per interval, the mean absolute deviation of estimated speed
/// from that interval's target; overall is the mean across usable intervals.
inline PaceAccuracy pace_error(const std::vector<SpeedSample>& speeds, const IntervalSchedule& sched,
                               const PaceProfile& profile, double schedule_start = 0.0,
                               double guard_band = 2.0) {
    PaceAccuracy a;
    a.per_interval = detail::bucket_intervals(speeds, sched, profile, schedule_start, guard_band);
    a.overall_error = detail::mean_over_included(a.per_interval, &IntervalMetrics::mean_abs_error);
    return a;
}

struct PaceConsistency {
    std::vector<IntervalMetrics> per_interval;
    double overall_variance = 0.0;  // (m/s)^2, mean of per-interval variances
};

/// Consistency: unbiased within-interval sample variance of estimated speed.
inline PaceConsistency pace_variance(const std::vector<SpeedSample>& speeds,
                                     const IntervalSchedule& sched, const PaceProfile& profile,
                                     double schedule_start = 0.0, double guard_band = 2.0) {
    PaceConsistency c;
    c.per_interval = detail::bucket_intervals(speeds, sched, profile, schedule_start, guard_band);
    c.overall_variance = detail::mean_over_included(c.per_interval, &IntervalMetrics::variance);
    return c;
}

struct MetricsReport {
    std::vector<IntervalMetrics> per_interval;
    double overall_error = 0.0;     // m/s
    double overall_variance = 0.0;  // (m/s)^2
    double distance_total = 0.0;    // m
    double duration_total = 0.0;    // s
};

/// Path length of a noisy log: positions are block-averaged over
/// distance_window-sized spans and chords are summed between the first raw
/// sample, the block centers, and the last raw sample. Block averaging is
/// what keeps the zero-motion noise floor small at consumer-GPS noise.
inline double smoothed_path_distance(const TelemetryLog& log, double distance_window) {
    const auto& s = log.samples;
    if (s.size() < 2) return 0.0;
    std::size_t block = static_cast<std::size_t>(std::lround(distance_window * log.rate_hz));
    if (block < 1) block = 1;

    std::vector<Vec2> pts;
    pts.push_back({s.front().x, s.front().y});
    const std::size_t full_blocks = s.size() / block;
    for (std::size_t b = 0; b < full_blocks; ++b) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = b * block; i < (b + 1) * block; ++i) {
            mx += s[i].x;
            my += s[i].y;
        }
        pts.push_back({mx / block, my / block});
    }
    pts.push_back({s.back().x, s.back().y});

    double dist = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) dist += (pts[i] - pts[i - 1]).norm();
    return dist;
}

/// Full per-session report: interval metrics plus total distance (smoothed
/// chord sum) and duration (last minus first timestamp).
inline MetricsReport session_summary(const TelemetryLog& log, const IntervalSchedule& sched,
                                     const PaceProfile& profile, double schedule_start,
                                     const MetricsConfig& cfg) {
    MetricsReport r;
    const auto speeds = estimate_speed(log, cfg.speed_window);
    r.per_interval = detail::bucket_intervals(speeds, sched, profile, schedule_start, cfg.guard_band);
    r.overall_error = detail::mean_over_included(r.per_interval, &IntervalMetrics::mean_abs_error);
    r.overall_variance = detail::mean_over_included(r.per_interval, &IntervalMetrics::variance);
    r.distance_total = smoothed_path_distance(log, cfg.distance_window);
    if (!log.samples.empty()) r.duration_total = log.samples.back().t - log.samples.front().t;
    return r;
}

}  // namespace pacerbot
