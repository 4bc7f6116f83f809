#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace raytold {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
    friend constexpr Vec2 operator*(const Vec2& v, double s) { return {s * v.x, s * v.y}; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

/// Rotates a world-frame vector into a frame whose +x axis points along `heading`.
inline Vec2 to_body_frame(const Vec2& v, double heading) {
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
    double wrapped = std::remainder(angle, 2.0 * kPi);
    if (wrapped <= -kPi) {
        wrapped += 2.0 * kPi;
    }
    return wrapped;
}

/// Thrown for invalid user-facing configuration (bad keys, missing checkpoint, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a checkpoint is malformed or does not match the expected networks.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27u)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31u);
}

/// Derives an independent stream seed from a master seed and a tuple of labels.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0x9e3779b97f4a7c15ull + 1));
}

}  // namespace raytold
