#include "raytold/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace raytold {

bool WorldConfig::contains(const Vec2& p) const {
    const Vec2 lo = map_min();
    const Vec2 hi = map_max();
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
}

void WorldConfig::validate() const {
    const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(map_half_extents.x) || !positive(map_half_extents.y) || !positive(wheelbase) || !positive(dt) ||
        !positive(goal_radius) || !positive(collision_clearance) || !positive(obstacle_radius)) {
        throw ConfigError("world: all lengths and dt must be positive");
    }
    if (!contains(start) || !contains(goal)) {
        throw ConfigError("world: start and goal must lie inside the map");
    }
    if (collision_clearance >= goal_radius) {
        throw ConfigError("world: collision_clearance must be smaller than goal_radius");
    }
    if (obstacle_count_range[0] < 0 || obstacle_count_range[1] < obstacle_count_range[0]) {
        throw ConfigError("world: obstacle_count_range must be a non-negative ordered pair");
    }
    if (max_steps < 1) {
        throw ConfigError("world: max_steps must be at least 1");
    }
}

std::string_view to_string(EpisodeStatus status) {
    switch (status) {
        case EpisodeStatus::Running:
            return "running";
        case EpisodeStatus::Success:
            return "success";
        case EpisodeStatus::Collision:
            return "collision";
        case EpisodeStatus::Timeout:
            return "timeout";
    }
    return "unknown";
}

Action clip_action(const Action& raw) {
    if (!std::isfinite(raw.accel) || !std::isfinite(raw.steer)) {
        throw std::invalid_argument("clip_action: non-finite action");
    }
    return {std::clamp(raw.accel, -kMaxAccel, kMaxAccel), std::clamp(raw.steer, -kMaxSteer, kMaxSteer)};
}

Action to_physical(const NormAction& a) {
    return {kMaxAccel * std::clamp(a[0], -1.0, 1.0), kMaxSteer * std::clamp(a[1], -1.0, 1.0)};
}

NormAction to_normalized(const Action& a) {
    const Action c = clip_action(a);
    return {c.accel / kMaxAccel, c.steer / kMaxSteer};
}

VehicleState step_vehicle(const VehicleState& s, const Action& a, const WorldConfig& cfg) {
    const double dt = cfg.dt;
    VehicleState next;
    next.x = s.x + s.v * std::cos(s.theta) * dt;
    next.y = s.y + s.v * std::sin(s.theta) * dt;
    next.theta = wrap_angle(s.theta + (s.v / cfg.wheelbase) * std::tan(a.steer) * dt);
    next.v = s.v + a.accel * dt;
    return next;
}

EpisodeStatus episode_status(const VehicleState& s, double d_obs, int step, const WorldConfig& cfg) {
    if (d_obs < cfg.collision_clearance) {
        return EpisodeStatus::Collision;
    }
    if (norm(s.position() - cfg.goal) < cfg.goal_radius) {
        return EpisodeStatus::Success;
    }
    if (step >= cfg.max_steps) {
        return EpisodeStatus::Timeout;
    }
    return EpisodeStatus::Running;
}

}  // namespace raytold
