#pragma once

// Reward terms hand-evaluated from their closed forms at fixed states, goal at (19, 0).

#include <cmath>
#include <vector>

#include "raytold/reward.hpp"

namespace raytold::reward_cases {

struct Case {
    VehicleState ego;
    double d_obs;
    RewardBreakdown expect;
};

inline std::vector<Case> tabulated() {
    return {
        // 3-4-5 triangle to the goal, heading along +x, 2 m/s, near an obstacle.
        {{15.0, 3.0, 0.0, 2.0}, 0.05,
         {-5.0, -120.0, -15.0 * std::exp(-0.2), 1.0, 5.0 * (4.0 / 5.0) * 2.0, 0.0, 0.0}},
        // Inside the braking radius, heading straight at the goal.
        {{17.5, 0.0, 0.0, 1.5}, 0.3, {-1.5, 0.0, -15.0 * std::exp(-1.2), -1.5, 7.5, 0.0, 0.0}},
        // Exactly on the brake threshold: incentive branch.
        {{17.0, 0.0, 0.0, 2.0}, 1.0, {-2.0, 0.0, -15.0 * std::exp(-4.0), 1.0, 10.0, 0.0, 0.0}},
        // Reversing while facing away from the goal.
        {{5.0, 0.0, kPi, -1.0}, 2.0, {-14.0, 0.0, -15.0 * std::exp(-8.0), -0.5, 5.0, 0.0, 0.0}},
        // Facing sideways: no progress.
        {{10.0, 0.0, kPi / 2.0, 3.0}, 0.1, {-9.0, 0.0, -15.0 * std::exp(-0.4), 1.5, 5.0 * std::cos(kPi / 2.0) * 3.0, 0.0, 0.0}},
        // At the goal itself: progress defined as zero.
        {{19.0, 0.0, 0.3, 0.4}, 4.0, {0.0, 0.0, -15.0 * std::exp(-16.0), -0.4, 0.0, 300.0, 0.0}},
        // In the goal disc and colliding.
        {{18.6, 0.3, 0.0, 0.0}, 0.0, {-0.5, -120.0, -15.0, 0.0, 0.0, 300.0, 0.0}},
    };
}

/// The six terms summed left to right.
inline double expected_total(const RewardBreakdown& e) {
    return e.dist + e.coll + e.side + e.vel + e.prog + e.goal;
}

}  // namespace raytold::reward_cases
