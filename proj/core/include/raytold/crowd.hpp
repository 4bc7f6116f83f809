#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "raytold/common.hpp"
#include "raytold/env.hpp"

namespace raytold {

/// A dynamic disc obstacle steered toward its current waypoint.
struct Obstacle {
    Vec2 pos;
    Vec2 vel;
    double radius = 0.4;
    Vec2 waypoint;
};

using Crowd = std::vector<Obstacle>;

/// Social-force constants. None are published for the reference setup; defaults give purposeful,
/// mutually avoiding motion at walking pace.
struct SfmParams {
    double relax_time = 0.5;        // s
    double max_speed = 1.2;         // m/s
    double boundary_gain = 3.0;     // m/s^2
    double boundary_range = 0.5;    // m
    double repel_gain = 2.0;        // m/s^2
    double repel_range = 0.5;       // m
    double waypoint_reach_radius = 0.5;  // m
    double start_clearance = 1.0;   // m, spawn exclusion around the ego start

    void validate() const;
};

inline constexpr int kMaxSpawnAttempts = 10000;

/// Draws a crowd of uniformly many obstacles in cfg.obstacle_count_range. Positions are rejection
/// sampled so discs never overlap each other or the start exclusion disc; throws std::runtime_error
/// ("arena oversaturated") when placement fails.
Crowd spawn_crowd(Rng& rng, const WorldConfig& cfg, const SfmParams& params);

/// Net social-force acceleration on obstacle `i`: waypoint attraction, wall repulsion and
/// pairwise repulsion.
Vec2 sfm_forces(std::size_t i, std::span<const Obstacle> crowd, const SfmParams& params, const WorldConfig& cfg);

/// Synchronous crowd update: all forces are evaluated on the incoming snapshot, then committed.
Crowd step_crowd(std::span<const Obstacle> crowd, const SfmParams& params, const WorldConfig& cfg, double dt, Rng& rng);

/// Clamps an obstacle centre to the map shrunk by its radius.
Vec2 clamp_to_map(const Vec2& p, double radius, const WorldConfig& cfg);

/// Order-sensitive FNV-1a hash over the exact bit patterns of all obstacle fields.
std::uint64_t crowd_hash(std::span<const Obstacle> crowd);

}  // namespace raytold
