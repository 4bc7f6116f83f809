#pragma once

#include <optional>
#include <span>
#include <vector>

#include "raytold/common.hpp"
#include "raytold/crowd.hpp"
#include "raytold/env.hpp"

namespace raytold {

struct LidarConfig {
    int num_rays = 60;
    double max_range = 10.0;      // m
    double velocity_scale = 2.0;  // m/s, divides hit velocities in the observation

    void validate() const;
    /// 4 kinematic + 2 relative-goal + one range and two velocity channels per ray.
    int observation_size() const { return 6 + 3 * num_rays; }
};

inline constexpr int kDefaultObservationSize = 186;

enum class RayHit : unsigned char { None, Wall, Obstacle };

/// One sweep. Ranges lie in [0, max_range]; a zero range only occurs when the sensor origin is
/// inside an obstacle disc.
struct RayScan {
    std::vector<double> ranges;
    std::vector<Vec2> hit_velocity;  // world frame, zero for walls and misses
    std::vector<RayHit> hit;
    double max_range = 10.0;
};

using Observation = std::vector<double>;

/// Distance along a unit ray to the first boundary crossing of a disc. Returns 0 when the origin
/// lies inside or on the disc, nullopt when the ray misses.
std::optional<double> ray_circle_distance(const Vec2& origin, const Vec2& dir, const Vec2& center, double radius);

/// Distance along a unit ray to the map boundary, measured from inside or outside the rectangle.
std::optional<double> ray_wall_distance(const Vec2& origin, const Vec2& dir, const WorldConfig& world);

/// Unit direction of ray k for a sensor heading.
Vec2 ray_direction(double heading, int k, int num_rays);

/// Occlusion-aware 360 degree sweep. Each ray stops at the first obstacle boundary or wall.
RayScan cast_rays(const VehicleState& ego, std::span<const Obstacle> crowd, const LidarConfig& lidar,
                  const WorldConfig& world);

/// Minimum range over rays whose first hit is an obstacle; max_range when none is.
double min_clearance(const RayScan& scan);

/// Equals min_clearance(cast_rays(...)) bit-for-bit, but only traces the rays that can meet each
/// obstacle. Used inside planner rollouts.
double obstacle_clearance(const VehicleState& ego, std::span<const Obstacle> crowd, const LidarConfig& lidar,
                          const WorldConfig& world);

/// Layout: [x, y, theta, v, goal_rel (ego frame), ranges / max_range, ego-frame hit velocity / scale].
Observation assemble_observation(const VehicleState& ego, const Vec2& goal, const RayScan& scan,
                                 const LidarConfig& lidar);

}  // namespace raytold
