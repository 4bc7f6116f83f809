#include "raytold/reward.hpp"

#include <cmath>

namespace raytold {

RewardBreakdown compute_reward(const VehicleState& ego, double d_obs, const Vec2& goal, const RewardParams& params) {
    const Vec2 to_goal = goal - ego.position();
    const double dist = norm(to_goal);

    RewardBreakdown r;
    r.dist = -dist;
    r.coll = d_obs < params.collision_clearance ? -params.collision_penalty : 0.0;
    r.side = -params.side_gain * std::exp(-params.side_decay * d_obs);
    r.vel = dist >= params.brake_radius ? params.speed_gain * ego.v : -ego.v;
    if (dist > 0.0) {
        const double alignment = (std::cos(ego.theta) * to_goal.x + std::sin(ego.theta) * to_goal.y) / dist;
        r.prog = params.progress_gain * alignment * ego.v;
    }
    r.goal = dist < params.goal_radius ? params.goal_bonus : 0.0;
    r.total = r.dist + r.coll + r.side + r.vel + r.prog + r.goal;
    return r;
}

}  // namespace raytold
