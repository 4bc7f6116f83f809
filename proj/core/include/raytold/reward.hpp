#pragma once

#include "raytold/common.hpp"
#include "raytold/env.hpp"

namespace raytold {

/// Per-term navigation reward. `total` is the left-to-right sum of the six terms.
struct RewardBreakdown {
    double dist = 0.0;
    double coll = 0.0;
    double side = 0.0;
    double vel = 0.0;
    double prog = 0.0;
    double goal = 0.0;
    double total = 0.0;
};

struct RewardParams {
    double collision_penalty = 120.0;
    double collision_clearance = 0.1;
    double side_gain = 15.0;
    double side_decay = 4.0;
    double speed_gain = 0.5;
    double brake_radius = 2.0;
    double progress_gain = 5.0;
    double goal_bonus = 300.0;
    double goal_radius = 0.7;
};

RewardBreakdown compute_reward(const VehicleState& ego, double d_obs, const Vec2& goal,
                               const RewardParams& params = {});

}  // namespace raytold
