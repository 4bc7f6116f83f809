#include "raytold/lidar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace raytold {

void LidarConfig::validate() const {
    if (num_rays < 1) {
        throw ConfigError("lidar: num_rays must be at least 1");
    }
    if (!std::isfinite(max_range) || max_range <= 0.0) {
        throw ConfigError("lidar: max_range must be positive");
    }
    if (!std::isfinite(velocity_scale) || velocity_scale <= 0.0) {
        throw ConfigError("lidar: velocity_scale must be positive");
    }
}

std::optional<double> ray_circle_distance(const Vec2& origin, const Vec2& dir, const Vec2& center, double radius) {
    const Vec2 m = origin - center;
    const double c = dot(m, m) - radius * radius;
    if (c <= 0.0) {
        return 0.0;
    }
    const double b = dot(m, dir);
    if (b >= 0.0) {
        return std::nullopt;  // outside and pointing away
    }
    const double disc = b * b - c;
    if (disc < 0.0) {
        return std::nullopt;
    }
    return -b - std::sqrt(disc);
}

std::optional<double> ray_wall_distance(const Vec2& origin, const Vec2& dir, const WorldConfig& world) {
    const Vec2 lo = world.map_min();
    const Vec2 hi = world.map_max();
    std::optional<double> best;
    const auto consider = [&best](double t) {
        if (!best || t < *best) {
            best = t;
        }
    };
    if (dir.x != 0.0) {
        for (double wall_x : {lo.x, hi.x}) {
            const double t = (wall_x - origin.x) / dir.x;
            const double y = origin.y + t * dir.y;
            if (t >= 0.0 && y >= lo.y && y <= hi.y) {
                consider(t);
            }
        }
    }
    if (dir.y != 0.0) {
        for (double wall_y : {lo.y, hi.y}) {
            const double t = (wall_y - origin.y) / dir.y;
            const double x = origin.x + t * dir.x;
            if (t >= 0.0 && x >= lo.x && x <= hi.x) {
                consider(t);
            }
        }
    }
    return best;
}

Vec2 ray_direction(double heading, int k, int num_rays) {
    const double angle = heading + 2.0 * kPi * static_cast<double>(k) / static_cast<double>(num_rays);
    return {std::cos(angle), std::sin(angle)};
}

RayScan cast_rays(const VehicleState& ego, std::span<const Obstacle> crowd, const LidarConfig& lidar,
                  const WorldConfig& world) {
    const auto n = static_cast<std::size_t>(lidar.num_rays);
    RayScan scan;
    scan.max_range = lidar.max_range;
    scan.ranges.assign(n, lidar.max_range);
    scan.hit_velocity.assign(n, Vec2{});
    scan.hit.assign(n, RayHit::None);

    const Vec2 origin = ego.position();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 dir = ray_direction(ego.theta, static_cast<int>(k), lidar.num_rays);
        double best = lidar.max_range;
        RayHit kind = RayHit::None;
        Vec2 velocity{};
        if (const auto wall = ray_wall_distance(origin, dir, world); wall && *wall <= best) {
            best = *wall;
            kind = RayHit::Wall;
        }
        for (const Obstacle& o : crowd) {
            const auto t = ray_circle_distance(origin, dir, o.pos, o.radius);
            if (t && (*t < best || (*t == best && kind != RayHit::Obstacle))) {
                best = *t;
                kind = RayHit::Obstacle;
                velocity = o.vel;
            }
        }
        scan.ranges[k] = best;
        scan.hit[k] = kind;
        scan.hit_velocity[k] = velocity;
    }
    return scan;
}

double min_clearance(const RayScan& scan) {
    double best = scan.max_range;
    for (std::size_t k = 0; k < scan.ranges.size(); ++k) {
        if (scan.hit[k] == RayHit::Obstacle) {
            best = std::min(best, scan.ranges[k]);
        }
    }
    return best;
}

double obstacle_clearance(const VehicleState& ego, std::span<const Obstacle> crowd, const LidarConfig& lidar,
                          const WorldConfig& world) {
    const int n = lidar.num_rays;
    const Vec2 origin = ego.position();
    const double step = 2.0 * kPi / static_cast<double>(n);
    constexpr double kUnset = -1.0;
    // Small per-call caches of wall distances (infinity when the ray never meets a wall).
    std::array<double, 512> wall_cache;
    const bool use_cache = n <= static_cast<int>(wall_cache.size());
    if (use_cache) {
        std::fill_n(wall_cache.begin(), n, kUnset);
    }
    const auto wall_at = [&](int k, const Vec2& dir) {
        if (use_cache && wall_cache[static_cast<std::size_t>(k)] != kUnset) {
            return wall_cache[static_cast<std::size_t>(k)];
        }
        const auto w = ray_wall_distance(origin, dir, world);
        const double value = w ? *w : std::numeric_limits<double>::infinity();
        if (use_cache) {
            wall_cache[static_cast<std::size_t>(k)] = value;
        }
        return value;
    };

    // Visiting the nearest disc first tightens `best` early so most others fail the cheap test.
    std::size_t nearest = 0;
    double nearest_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < crowd.size(); ++j) {
        const Vec2 m = crowd[j].pos - origin;
        const double gap = dot(m, m) - crowd[j].radius * crowd[j].radius;
        if (gap < nearest_gap) {
            nearest_gap = gap;
            nearest = j;
        }
    }

    double best = lidar.max_range;
    for (std::size_t j = 0; j < crowd.size(); ++j) {
        // The nearest disc goes first, then every other disc in index order.
        const std::size_t idx = j == 0 ? nearest : (j <= nearest ? j - 1 : j);
        const Obstacle& o = crowd[idx];
        const Vec2 m = o.pos - origin;
        const double dist = norm(m);
        if (dist - o.radius > best + 1e-9) {
            continue;
        }
        int first = 0;
        int count = n;
        if (dist > o.radius) {
            const double half = std::asin(std::min(1.0, o.radius / dist));
            const double rel = std::atan2(m.y, m.x) - ego.theta;
            const int lo = static_cast<int>(std::floor((rel - half) / step)) - 1;
            const int hi = static_cast<int>(std::ceil((rel + half) / step)) + 1;
            if (hi - lo + 1 < n) {
                first = lo;
                count = hi - lo + 1;
            }
        }
        for (int i = 0; i < count; ++i) {
            const int k = ((first + i) % n + n) % n;
            const Vec2 dir = ray_direction(ego.theta, k, n);
            const auto t = ray_circle_distance(origin, dir, o.pos, o.radius);
            if (!t || *t >= best) {
                continue;
            }
            if (*t <= wall_at(k, dir)) {
                best = *t;
            }
        }
    }
    return best;
}

Observation assemble_observation(const VehicleState& ego, const Vec2& goal, const RayScan& scan,
                                 const LidarConfig& lidar) {
    const std::size_t n = scan.ranges.size();
    Observation x;
    x.reserve(6 + 3 * n);
    x.push_back(ego.x);
    x.push_back(ego.y);
    x.push_back(ego.theta);
    x.push_back(ego.v);
    const Vec2 goal_rel = to_body_frame(goal - ego.position(), ego.theta);
    x.push_back(goal_rel.x);
    x.push_back(goal_rel.y);
    for (double r : scan.ranges) {
        x.push_back(r / lidar.max_range);
    }
    for (const Vec2& v : scan.hit_velocity) {
        const Vec2 body = to_body_frame(v, ego.theta);
        x.push_back(body.x / lidar.velocity_scale);
        x.push_back(body.y / lidar.velocity_scale);
    }
    return x;
}

}  // namespace raytold
