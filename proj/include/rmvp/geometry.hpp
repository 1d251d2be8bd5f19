#pragma once

#include <cmath>
#include <numbers>

namespace rmvp {

/// Vacuum permeability (H/m), fixed at its pre-2019 exact value.
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double kNu0 = 1.0 / kMu0;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// +90 degrees (counter-clockwise)
constexpr Vec2 rotate_ccw(Vec2 v) { return {-v.y, v.x}; }
constexpr Vec2 rotate_cw(Vec2 v) { return {v.y, -v.x}; }

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
constexpr double signed_area2(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return distance(p, a + ab * t);
}

}  // namespace rmvp
