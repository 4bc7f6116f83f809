#include "raytold/crowd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace raytold {
namespace {

Vec2 uniform_point(Rng& rng, const Vec2& lo, const Vec2& hi) {
    std::uniform_real_distribution<double> ux(lo.x, hi.x);
    std::uniform_real_distribution<double> uy(lo.y, hi.y);
    const double x = ux(rng);
    const double y = uy(rng);
    return {x, y};
}

Vec2 random_waypoint(Rng& rng, double radius, const WorldConfig& cfg) {
    const Vec2 inset{radius, radius};
    return uniform_point(rng, cfg.map_min() + inset, cfg.map_max() - inset);
}

Vec2 clip_norm(const Vec2& v, double max_norm) {
    const double n = norm(v);
    if (n > max_norm && n > 0.0) {
        return v * (max_norm / n);
    }
    return v;
}

}  // namespace

void SfmParams::validate() const {
    const double values[] = {relax_time, max_speed, boundary_gain, boundary_range,
                             repel_gain, repel_range, waypoint_reach_radius};
    for (double v : values) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw ConfigError("sfm: all parameters must be positive");
        }
    }
    if (!std::isfinite(start_clearance) || start_clearance < 0.0) {
        throw ConfigError("sfm: start_clearance must be non-negative");
    }
}

Vec2 clamp_to_map(const Vec2& p, double radius, const WorldConfig& cfg) {
    const Vec2 lo = cfg.map_min();
    const Vec2 hi = cfg.map_max();
    return {std::clamp(p.x, lo.x + radius, hi.x - radius), std::clamp(p.y, lo.y + radius, hi.y - radius)};
}

Crowd spawn_crowd(Rng& rng, const WorldConfig& cfg, const SfmParams& params) {
    std::uniform_int_distribution<int> count_dist(cfg.obstacle_count_range[0], cfg.obstacle_count_range[1]);
    const int count = count_dist(rng);
    const double r = cfg.obstacle_radius;
    const Vec2 inset{r, r};
    const Vec2 lo = cfg.map_min() + inset;
    const Vec2 hi = cfg.map_max() - inset;

    std::uniform_real_distribution<double> heading(-kPi, kPi);
    std::uniform_real_distribution<double> speed(0.0, params.max_speed);

    Crowd crowd;
    crowd.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        bool placed = false;
        Vec2 pos;
        for (int attempt = 0; attempt < kMaxSpawnAttempts && !placed; ++attempt) {
            pos = uniform_point(rng, lo, hi);
            if (norm(pos - cfg.start) < params.start_clearance + r) {
                continue;
            }
            placed = std::none_of(crowd.begin(), crowd.end(),
                                  [&](const Obstacle& o) { return norm(pos - o.pos) < o.radius + r; });
        }
        if (!placed) {
            throw std::runtime_error("spawn_crowd: arena oversaturated");
        }
        Obstacle o;
        o.pos = pos;
        o.radius = r;
        o.waypoint = random_waypoint(rng, r, cfg);
        const double h = heading(rng);
        const double s = speed(rng);
        o.vel = {s * std::cos(h), s * std::sin(h)};
        crowd.push_back(o);
    }
    return crowd;
}

Vec2 sfm_forces(std::size_t i, std::span<const Obstacle> crowd, const SfmParams& params, const WorldConfig& cfg) {
    const Obstacle& self = crowd[i];

    Vec2 desired{};
    const Vec2 to_waypoint = self.waypoint - self.pos;
    const double dist_wp = norm(to_waypoint);
    if (dist_wp > 0.0) {
        desired = to_waypoint * (params.max_speed / dist_wp);
    }
    const Vec2 attract = (desired - self.vel) * (1.0 / params.relax_time);

    const Vec2 lo = cfg.map_min();
    const Vec2 hi = cfg.map_max();
    const auto wall = [&](double dist) {
        return params.boundary_gain * std::exp(-std::max(dist, 0.0) / params.boundary_range);
    };
    const Vec2 boundary{wall(self.pos.x - lo.x) - wall(hi.x - self.pos.x),
                        wall(self.pos.y - lo.y) - wall(hi.y - self.pos.y)};

    Vec2 repel{};
    for (std::size_t j = 0; j < crowd.size(); ++j) {
        if (j == i) {
            continue;
        }
        const Vec2 diff = self.pos - crowd[j].pos;
        const double d = norm(diff);
        const Vec2 dir = d > 0.0 ? diff * (1.0 / d) : Vec2{1.0, 0.0};
        const double gap = d - self.radius - crowd[j].radius;
        repel += dir * (params.repel_gain * std::exp(-gap / params.repel_range));
    }
    return attract + boundary + repel;
}

Crowd step_crowd(std::span<const Obstacle> crowd, const SfmParams& params, const WorldConfig& cfg, double dt, Rng& rng) {
    Crowd next(crowd.begin(), crowd.end());
    for (std::size_t i = 0; i < crowd.size(); ++i) {
        const Vec2 force = sfm_forces(i, crowd, params, cfg);
        Obstacle& o = next[i];
        o.vel = clip_norm(o.vel + force * dt, params.max_speed);
        o.pos = clamp_to_map(o.pos + o.vel * dt, o.radius, cfg);
    }
    // Waypoint redraws happen after the commit, in index order, so the rng stream is deterministic.
    for (Obstacle& o : next) {
        if (norm(o.waypoint - o.pos) < params.waypoint_reach_radius) {
            o.waypoint = random_waypoint(rng, o.radius, cfg);
        }
    }
    return next;
}

std::uint64_t crowd_hash(std::span<const Obstacle> crowd) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto mix = [&h](double v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    for (const Obstacle& o : crowd) {
        mix(o.pos.x);
        mix(o.pos.y);
        mix(o.vel.x);
        mix(o.vel.y);
        mix(o.radius);
        mix(o.waypoint.x);
        mix(o.waypoint.y);
    }
    return h;
}

}  // namespace raytold
