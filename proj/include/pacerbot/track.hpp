// Track geometry: a stadium-shaped lane line with arc-length parameterization.
//
// The followed line is two straights joined by two semicircular turns,
// traversed counter-clockwise (left turns, athletics convention):
//
//   s = 0            datum (0, 0), heading +x
//   [0, L)           bottom straight, y = 0
//   [L, L+piR)       turn 1, center (L, R)
//   [L+piR, 2L+piR)  top straight, y = 2R, heading -x
//   [2L+piR, P)      turn 2, center (0, R)
//
// where L = straight_length, R = effective turn radius of the followed lane,
// P = 2L + 2piR. Signed lateral offsets are positive to the LEFT of the
// travel direction, so the infield is positive and outer lanes negative.
#pragma once

#include <cmath>
#include <stdexcept>

#include "pacerbot/common.hpp"

namespace pacerbot {

struct TrackModel {
    double straight_length = 84.39;
    // Default radius chosen so the lane-1 line perimeter is exactly 400 m.
    double turn_radius = (400.0 - 2.0 * 84.39) / (2.0 * kPi);
    double lane_width = 1.22;
    double line_width = 0.05;
    int lane_index = 1;

    void validate() const {
        if (!(straight_length > 0.0) || !(turn_radius > 0.0))
            throw ConfigError("track: non-positive dimensions");
        if (!(line_width > 0.0)) throw ConfigError("track: line_width must be > 0");
        if (!(lane_width > line_width)) throw ConfigError("track: lane_width must exceed line_width");
        if (lane_index < 1) throw ConfigError("track: lane_index must be >= 1");
    }

    /// Radius of the followed lane line (outer lanes sit further from the infield).
    double followed_radius() const { return turn_radius + (lane_index - 1) * lane_width; }

    double perimeter() const { return 2.0 * straight_length + 2.0 * kPi * followed_radius(); }
};

struct TrackPose {
    Vec2 position;
    double heading = 0.0;  // forward tangent, normalized to (-pi, pi]
};

/// Centerline point and forward tangent of the followed lane line at arc
/// length s. Continuous and periodic; s may be any real.
inline TrackPose track_point(double s, const TrackModel& track) {
    const double L = track.straight_length;
    const double R = track.followed_radius();
    const double P = track.perimeter();

    s = std::fmod(s, P);
    if (s < 0.0) s += P;

    if (s < L) {
        return {{s, 0.0}, 0.0};
    }
    if (s < L + kPi * R) {
        const double phi = (s - L) / R;
        return {{L + R * std::sin(phi), R - R * std::cos(phi)}, normalize_angle(phi)};
    }
    if (s < 2.0 * L + kPi * R) {
        const double d = s - (L + kPi * R);
        return {{L - d, 2.0 * R}, kPi};
    }
    const double phi = (s - (2.0 * L + kPi * R)) / R;
    return {{-R * std::sin(phi), R + R * std::cos(phi)}, normalize_angle(kPi + phi)};
}

namespace detail {

struct FootPoint {
    double distance;       // unsigned distance to the followed centerline
    double signed_offset;  // left-positive lateral offset
    double arc_length;     // s of the foot point
};

inline FootPoint nearest_on_track(Vec2 p, const TrackModel& track) {
    const double L = track.straight_length;
    const double R = track.followed_radius();

    FootPoint best{1e300, 0.0, 0.0};
    auto consider = [&best](double dist, double offset, double s) {
        if (dist < best.distance) best = {dist, offset, s};
    };

    // Bottom straight (travel +x): left normal is +y.
    {
        const double cx = clamp(p.x, 0.0, L);
        const double dist = std::hypot(p.x - cx, p.y);
        consider(dist, p.y, cx);
    }
    // Top straight (travel -x): left normal is -y.
    {
        const double cx = clamp(p.x, 0.0, L);
        const double dist = std::hypot(p.x - cx, p.y - 2.0 * R);
        consider(dist, 2.0 * R - p.y, L + kPi * R + (L - cx));
    }
    // Turn 1, center (L, R), angular range phi in [0, pi]. Left normal points
    // at the center, so the offset is R - |p - c|.
    {
        const double dx = p.x - L, dy = p.y - R;
        if (dx >= 0.0) {
            const double rad = std::hypot(dx, dy);
            const double theta = std::atan2(dy, dx);  // [-pi/2, pi/2] when dx >= 0
            consider(std::fabs(rad - R), R - rad, L + R * (theta + kPi / 2.0));
        }
    }
    // Turn 2, center (0, R).
    {
        const double dx = p.x, dy = p.y - R;
        if (dx <= 0.0) {
            const double rad = std::hypot(dx, dy);
            double theta = std::atan2(dy, dx);  // |theta| >= pi/2 when dx <= 0
            double phi = theta >= 0.0 ? theta - kPi / 2.0 : theta + 3.0 * kPi / 2.0;
            consider(std::fabs(rad - R), R - rad, 2.0 * L + kPi * R + R * phi);
        }
    }
    return best;
}

}  // namespace detail

/// Signed perpendicular distance from the followed line centerline,
/// positive to the left of the travel direction.
inline double signed_lateral_offset(Vec2 p, const TrackModel& track) {
    return detail::nearest_on_track(p, track).signed_offset;
}

/// Arc length of the closest centerline point, in [0, perimeter).
inline double nearest_arc_length(Vec2 p, const TrackModel& track) {
    double s = detail::nearest_on_track(p, track).arc_length;
    const double P = track.perimeter();
    if (s >= P) s -= P;
    if (s < 0.0) s += P;
    return s;
}

}  // namespace pacerbot
