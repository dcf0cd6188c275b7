// Small shared vocabulary: 2-D vectors, angle helpers, error types.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pacerbot {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    // z-component of the 3-D cross product; positive when o is to the left of this.
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 unit_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SessionAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pacerbot
