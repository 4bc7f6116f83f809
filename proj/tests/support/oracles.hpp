#pragma once

// Independent reference implementations used as test oracles. They share only value types and
// the vehicle/reward primitives with the library, never its geometry or planner code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "raytold/crowd.hpp"
#include "raytold/env.hpp"
#include "raytold/reward.hpp"

namespace raytold::oracle {

inline bool inside_map(double x, double y, const WorldConfig& world) {
    const Vec2 lo = world.map_min();
    const Vec2 hi = world.map_max();
    return x >= lo.x && x <= hi.x && y >= lo.y && y <= hi.y;
}

/// Marches each ray in `step` increments until the sample point enters a disc, leaves the map or
/// passes max_range. Only point-membership tests are used; discs far off the ray line are skipped.
inline std::vector<double> ray_march_ranges(const VehicleState& ego, const Crowd& crowd, int num_rays,
                                            double max_range, const WorldConfig& world, double step = 1e-3) {
    std::vector<double> ranges(static_cast<std::size_t>(num_rays), max_range);
    const double ox = ego.x;
    const double oy = ego.y;
    std::vector<const Obstacle*> near;
    for (int k = 0; k < num_rays; ++k) {
        const double angle = ego.theta + 2.0 * 3.14159265358979323846 * k / num_rays;
        const double dx = std::cos(angle);
        const double dy = std::sin(angle);
        near.clear();
        for (const Obstacle& o : crowd) {
            const double rx = o.pos.x - ox;
            const double ry = o.pos.y - oy;
            const double perp = std::abs(rx * dy - ry * dx);
            const double along = rx * dx + ry * dy;
            const bool origin_inside = rx * rx + ry * ry <= o.radius * o.radius;
            if (origin_inside || (perp <= o.radius + 1e-9 && along > -o.radius)) {
                near.push_back(&o);
            }
        }
        const int n_steps = static_cast<int>(std::ceil(max_range / step));
        for (int i = 0; i <= n_steps; ++i) {
            const double s = std::min(i * step, max_range);
            const double px = ox + s * dx;
            const double py = oy + s * dy;
            bool hit = !inside_map(px, py, world);
            for (const Obstacle* o : near) {
                const double ex = px - o->pos.x;
                const double ey = py - o->pos.y;
                if (ex * ex + ey * ey <= o->radius * o->radius) {
                    hit = true;
                    break;
                }
            }
            if (hit) {
                ranges[static_cast<std::size_t>(k)] = s;
                break;
            }
        }
    }
    return ranges;
}

/// Plain MPPI written straight from the algorithm: zero-mean warm start shifted each call, noise
/// drawn sample by sample, step by step, acceleration before steering; rewards evaluated after each
/// step against constant-velocity obstacle positions; exponential weights with max subtraction.
/// `clearance` is the d_obs model, f(state, obstacle positions) -> metres.
struct ReferenceMppi {
    int horizon = 30;
    int samples = 256;
    int iterations = 3;
    double lambda = 1.0;
    double gamma = 0.99;
    double noise_std[2] = {0.5, 0.5};
    WorldConfig world;
    RewardParams reward;
    Vec2 goal{19.0, 0.0};

    std::vector<std::array<double, 2>> mean;

    template <typename Clearance>
    std::vector<std::array<double, 2>> plan(const VehicleState& ego, const Crowd& crowd, std::mt19937_64& rng,
                                            Clearance&& clearance) {
        std::vector<std::array<double, 2>> shifted(static_cast<std::size_t>(horizon), {0.0, 0.0});
        for (std::size_t t = 1; t < mean.size(); ++t) {
            shifted[t - 1] = mean[t];
        }
        mean = shifted;

        // Predicted obstacle field per step.
        std::vector<Crowd> future;
        for (int t = 0; t <= horizon; ++t) {
            Crowd snap = crowd;
            for (Obstacle& o : snap) {
                const double px = o.pos.x + o.vel.x * (t * world.dt);
                const double py = o.pos.y + o.vel.y * (t * world.dt);
                const Vec2 lo = world.map_min();
                const Vec2 hi = world.map_max();
                o.pos = {std::clamp(px, lo.x + o.radius, hi.x - o.radius),
                         std::clamp(py, lo.y + o.radius, hi.y - o.radius)};
            }
            future.push_back(snap);
        }

        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<std::vector<std::array<double, 2>>> cand(static_cast<std::size_t>(samples));
        std::vector<double> ret(static_cast<std::size_t>(samples));
        for (int it = 0; it < iterations; ++it) {
            for (int k = 0; k < samples; ++k) {
                auto& c = cand[static_cast<std::size_t>(k)];
                c.assign(static_cast<std::size_t>(horizon), {0.0, 0.0});
                for (int t = 0; t < horizon; ++t) {
                    const double a = noise_std[0] * gauss(rng);
                    const double d = noise_std[1] * gauss(rng);
                    c[t][0] = std::clamp(mean[t][0] + a, -1.0, 1.0);
                    c[t][1] = std::clamp(mean[t][1] + d, -1.0, 1.0);
                }
            }
            for (int k = 0; k < samples; ++k) {
                VehicleState s = ego;
                double total = 0.0;
                double disc = 1.0;
                for (int t = 0; t < horizon; ++t) {
                    const auto& u = cand[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
                    s = step_vehicle(s, {u[0] * kMaxAccel, u[1] * kMaxSteer}, world);
                    const double d = clearance(s, future[static_cast<std::size_t>(t + 1)]);
                    total += disc * compute_reward(s, d, goal, reward).total;
                    disc *= gamma;
                }
                ret[static_cast<std::size_t>(k)] = total;
            }
            const double top = *std::max_element(ret.begin(), ret.end());
            std::vector<double> w(ret.size());
            double z = 0.0;
            for (std::size_t k = 0; k < ret.size(); ++k) {
                w[k] = std::exp((ret[k] - top) / lambda);
                z += w[k];
            }
            for (double& v : w) {
                v /= z;
            }
            std::vector<std::array<double, 2>> next(static_cast<std::size_t>(horizon), {0.0, 0.0});
            for (std::size_t k = 0; k < cand.size(); ++k) {
                for (std::size_t t = 0; t < next.size(); ++t) {
                    next[t][0] += w[k] * cand[k][t][0];
                    next[t][1] += w[k] * cand[k][t][1];
                }
            }
            mean = next;
        }
        return mean;
    }
};

}  // namespace raytold::oracle
