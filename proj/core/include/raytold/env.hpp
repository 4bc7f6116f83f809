#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "raytold/common.hpp"

namespace raytold {

/// Ego kinematics [x, y, theta, v] in the map frame.
struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // wrapped to (-pi, pi]
    double v = 0.0;

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

inline constexpr double kMaxAccel = 3.0;
inline constexpr double kMaxSteer = kPi / 4.0;

/// Physical control: longitudinal acceleration (m/s^2) and front-wheel steering angle (rad).
struct Action {
    double accel = 0.0;
    double steer = 0.0;
    friend bool operator==(const Action&, const Action&) = default;
};

/// Action in the normalized [-1, 1]^2 box used by the planner and the learned networks.
using NormAction = std::array<double, 2>;

struct WorldConfig {
    Vec2 map_half_extents{10.0, 5.0};
    double wheelbase = 2.5;
    double dt = 0.1;
    Vec2 start{1.0, 0.0};
    Vec2 goal{19.0, 0.0};
    double goal_radius = 0.7;
    double collision_clearance = 0.1;
    double obstacle_radius = 0.4;
    std::array<int, 2> obstacle_count_range{40, 60};
    int max_steps = 300;

    /// The arena spans x in [0, 2*hx] and y in [-hy, hy].
    Vec2 map_min() const { return {0.0, -map_half_extents.y}; }
    Vec2 map_max() const { return {2.0 * map_half_extents.x, map_half_extents.y}; }
    bool contains(const Vec2& p) const;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

enum class EpisodeStatus { Running, Success, Collision, Timeout };

std::string_view to_string(EpisodeStatus status);

/// Clamps into accel in [-3, 3], steer in [-pi/4, pi/4]. Throws std::invalid_argument on non-finite input.
Action clip_action(const Action& raw);

/// Maps a normalized action (clipped to [-1, 1]^2) to physical units.
Action to_physical(const NormAction& a);
NormAction to_normalized(const Action& a);

/// Forward-Euler kinematic bicycle step at cfg.dt. The action must already be clipped.
VehicleState step_vehicle(const VehicleState& s, const Action& a, const WorldConfig& cfg);

/// Collision has priority over success; terminal states are decided purely from the inputs.
EpisodeStatus episode_status(const VehicleState& s, double d_obs, int step, const WorldConfig& cfg);

inline VehicleState initial_vehicle_state(const WorldConfig& cfg) {
    return {cfg.start.x, cfg.start.y, 0.0, 0.0};
}

}  // namespace raytold
